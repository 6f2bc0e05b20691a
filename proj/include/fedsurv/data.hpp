#pragma once
// Survival dataset ingestion, standardization and split machinery.
// CSV layout: one header row, comma-delimited, a time column, an event
// column in {0,1}, every other column a numeric feature.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedsurv/random.hpp"

namespace fedsurv {

struct SurvivalRecord {
    std::vector<double> features;
    double time = 0.0;   // days, >= 0
    bool event = false;  // true = event observed, false = censored
};

struct FeatureStats {
    double mean = 0.0;
    double stddev = 0.0;  // population stddev; 0 marks a constant column
};

struct Dataset {
    std::vector<SurvivalRecord> records;
    std::vector<std::string> feature_names;
    std::optional<std::vector<FeatureStats>> standardization;

    std::size_t size() const { return records.size(); }
    std::size_t num_features() const { return feature_names.size(); }

    Eigen::MatrixXd feature_matrix() const {
        Eigen::MatrixXd X(records.size(), feature_names.size());
        for (std::size_t i = 0; i < records.size(); ++i)
            for (std::size_t j = 0; j < feature_names.size(); ++j)
                X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records[i].features[j];
        return X;
    }

    std::vector<double> times() const {
        std::vector<double> t(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) t[i] = records[i].time;
        return t;
    }

    std::vector<char> events() const {
        std::vector<char> s(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) s[i] = records[i].event ? 1 : 0;
        return s;
    }
};

struct FoldSplit {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                                 ", column '" + column + "'");
    }
    // reject trailing garbage such as "1.2x"
    while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
    if (pos != cell.size())
        throw std::runtime_error("non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                                 ", column '" + column + "'");
    return v;
}

}  // namespace detail

// Rows are 1-based in error messages (header = row 0 conceptually, first data
// row = row 1). Row order of the file is preserved in the Dataset.
inline Dataset load_csv(const std::string& path, const std::string& time_column,
                        const std::string& event_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file '" + path + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = detail::split_csv_line(line);
    std::ptrdiff_t time_idx = -1, event_idx = -1;
    std::vector<std::string> feature_names;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == time_column)
            time_idx = static_cast<std::ptrdiff_t>(c);
        else if (header[c] == event_column)
            event_idx = static_cast<std::ptrdiff_t>(c);
        else {
            feature_names.push_back(header[c]);
            feature_cols.push_back(c);
        }
    }
    if (time_idx < 0) throw std::runtime_error("missing column '" + time_column + "' in '" + path + "'");
    if (event_idx < 0) throw std::runtime_error("missing column '" + event_column + "' in '" + path + "'");

    Dataset d;
    d.feature_names = feature_names;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        SurvivalRecord r;
        r.time = detail::parse_number(cells[static_cast<std::size_t>(time_idx)], row, time_column);
        if (r.time < 0)
            throw std::runtime_error("negative time " + std::to_string(r.time) + " at row " +
                                     std::to_string(row));
        const double ev = detail::parse_number(cells[static_cast<std::size_t>(event_idx)], row, event_column);
        if (ev != 0.0 && ev != 1.0)
            throw std::runtime_error("event value outside {0,1} at row " + std::to_string(row) +
                                     ", column '" + event_column + "'");
        r.event = (ev == 1.0);
        r.features.reserve(feature_cols.size());
        for (std::size_t j = 0; j < feature_cols.size(); ++j)
            r.features.push_back(detail::parse_number(cells[feature_cols[j]], row, feature_names[j]));
        d.records.push_back(std::move(r));
    }
    if (d.records.empty()) throw std::runtime_error("empty dataset in '" + path + "'");
    return d;
}

// Fits per-column (mean, population stddev) and rescales in place.
// Constant columns map to all-zeros (stddev stored as 0).
inline Dataset standardize(const Dataset& d) {
    if (d.standardization) throw std::logic_error("dataset already standardized");
    const std::size_t n = d.size(), p = d.num_features();
    std::vector<FeatureStats> stats(p);
    for (std::size_t j = 0; j < p; ++j) {
        double sum = 0.0;
        for (const auto& r : d.records) sum += r.features[j];
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& r : d.records) {
            const double dlt = r.features[j] - mean;
            ss += dlt * dlt;
        }
        const double var = ss / static_cast<double>(n);
        stats[j] = {mean, var > 0.0 ? std::sqrt(var) : 0.0};
    }
    Dataset out = d;
    out.standardization = stats;
    for (auto& r : out.records)
        for (std::size_t j = 0; j < p; ++j)
            r.features[j] = stats[j].stddev > 0.0 ? (r.features[j] - stats[j].mean) / stats[j].stddev : 0.0;
    return out;
}

// Applies previously fitted stats (e.g. train stats onto a test split).
inline Dataset apply_standardization(const Dataset& d, const std::vector<FeatureStats>& stats) {
    if (stats.size() != d.num_features())
        throw std::invalid_argument("standardization stats do not match feature count");
    Dataset out = d;
    out.standardization = stats;
    for (auto& r : out.records)
        for (std::size_t j = 0; j < stats.size(); ++j)
            r.features[j] = stats[j].stddev > 0.0 ? (r.features[j] - stats[j].mean) / stats[j].stddev : 0.0;
    return out;
}

inline Dataset destandardize(const Dataset& d) {
    if (!d.standardization) throw std::logic_error("dataset is not standardized");
    const auto& stats = *d.standardization;
    Dataset out = d;
    out.standardization.reset();
    for (auto& r : out.records)
        for (std::size_t j = 0; j < stats.size(); ++j)
            r.features[j] = stats[j].stddev > 0.0 ? r.features[j] * stats[j].stddev + stats[j].mean
                                                  : stats[j].mean;
    return out;
}

// Test size = round(test_fraction * N) to nearest integer.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("empty dataset");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must lie in (0,1)");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto rng = make_rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(n)));
    std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    return {std::move(train), std::move(test)};
}

// k folds with test sizes differing by at most one; test partitions are
// disjoint and cover all indices.
inline std::vector<FoldSplit> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2 || k > n) throw std::invalid_argument("k must satisfy 2 <= k <= N");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto rng = make_rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<FoldSplit> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t sz = n / k + (f < n % k ? 1 : 0);
        folds[f].test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                                     perm.begin() + static_cast<std::ptrdiff_t>(pos + sz));
        pos += sz;
    }
    for (std::size_t f = 0; f < k; ++f) {
        for (std::size_t g = 0; g < k; ++g)
            if (g != f)
                folds[f].train_indices.insert(folds[f].train_indices.end(),
                                              folds[g].test_indices.begin(),
                                              folds[g].test_indices.end());
    }
    return folds;
}

inline Dataset subset(const Dataset& d, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.feature_names = d.feature_names;
    out.standardization = d.standardization;
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(d.records[i]);
    return out;
}

}  // namespace fedsurv
