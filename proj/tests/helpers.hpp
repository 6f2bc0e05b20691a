#pragma once
// Shared fixtures for the test suites.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fedsurv/data.hpp"
#include "fedsurv/experiment.hpp"

namespace testutil {

// Writes content to a temp file and removes it on destruction.
struct TempFile {
    std::string path;
    explicit TempFile(const std::string& content, const std::string& name = "") {
        static int counter = 0;
        path = "test_tmp_" + (name.empty() ? std::to_string(counter++) : name) + ".csv";
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

inline fedsurv::Dataset make_dataset(const std::vector<std::vector<double>>& features,
                                     const std::vector<double>& times,
                                     const std::vector<char>& events) {
    fedsurv::Dataset d;
    const std::size_t p = features.empty() ? 0 : features[0].size();
    for (std::size_t j = 0; j < p; ++j) d.feature_names.push_back("x" + std::to_string(j));
    for (std::size_t i = 0; i < times.size(); ++i) {
        fedsurv::SurvivalRecord r;
        r.features = features[i];
        r.time = times[i];
        r.event = events[i] != 0;
        d.records.push_back(r);
    }
    return d;
}

inline fedsurv::Dataset synthetic(std::size_t n, std::size_t p, std::uint64_t seed,
                                  double coef_scale = 1.0) {
    fedsurv::SyntheticParams sp;
    sp.n = n;
    sp.p = p;
    sp.seed = seed;
    sp.coef_scale = coef_scale;
    return fedsurv::generate_synthetic(sp);
}

}  // namespace testutil
