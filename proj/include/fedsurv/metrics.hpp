#pragma once
// Evaluation metrics: time-dependent concordance over event-anchored pairs
// and the censoring-weighted (Graf) Brier score with trapezoidal
// integration over the observed time range.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsurv/survival.hpp"

namespace fedsurv {

struct PredictionSet {
    std::vector<StepFunction> survival;  // per patient, on the model grid
    std::vector<double> times;           // observed times
    std::vector<char> events;            // 1 = event, 0 = censored

    std::size_t size() const { return times.size(); }

    void validate() const {
        if (survival.size() != times.size() || events.size() != times.size())
            throw std::invalid_argument("PredictionSet: misaligned fields");
    }
};

// Pair (i,j) is comparable when i's event anchors a verifiable ranking:
// t_i < t_j with s_i = 1, or t_i = t_j with s_i = 1 and s_j = 0. Concordant
// when S(t_i|x_i) < S(t_i|x_j) strictly (ties score 0). Survival is
// evaluated with constant-density interpolation. Returns nullopt when no
// pair is comparable.
inline std::optional<double> concordance_td(const PredictionSet& preds) {
    preds.validate();
    const std::size_t n = preds.size();
    long long comparable = 0, concordant = 0;
    std::vector<double> s_at_ti(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!preds.events[i]) continue;  // only events anchor pairs
        const double ti = preds.times[i];
        for (std::size_t j = 0; j < n; ++j) s_at_ti[j] = interpolate_survival(preds.survival[j], ti);
        const double sii = s_at_ti[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool comp = (ti < preds.times[j]) ||
                              (ti == preds.times[j] && !preds.events[j]);
            if (!comp) continue;
            ++comparable;
            if (sii < s_at_ti[j]) ++concordant;
        }
    }
    if (comparable == 0) return std::nullopt;
    return static_cast<double>(concordant) / static_cast<double>(comparable);
}

// Graf convention: patients with an event at t_i <= t contribute
// (0 - S(t|x_i))^2 weighted 1/G(t_i-); patients with t_i > t contribute
// (1 - S(t|x_i))^2 weighted 1/G(t); patients censored at or before t drop
// out (weight 0). G is the KM estimate of the censoring distribution,
// evaluated with left limits at event times. Terms whose G weight would
// divide by zero are dropped and counted.
inline double brier_score(const PredictionSet& preds, double t, const StepFunction& censor_curve,
                          int* dropped_terms = nullptr) {
    preds.validate();
    const std::size_t n = preds.size();
    if (n == 0) throw std::invalid_argument("brier_score: empty prediction set");
    double total = 0.0;
    int dropped = 0;
    const double g_t = censor_curve.value_at(t);
    for (std::size_t i = 0; i < n; ++i) {
        const double s_hat = interpolate_survival(preds.survival[i], t);
        if (preds.times[i] <= t) {
            if (!preds.events[i]) continue;  // censored before t: weight 0
            const double g = censor_curve.value_before(preds.times[i]);
            if (g <= 0.0) {
                ++dropped;
                continue;
            }
            total += (s_hat * s_hat) / g;
        } else {
            if (g_t <= 0.0) {
                ++dropped;
                continue;
            }
            total += (1.0 - s_hat) * (1.0 - s_hat) / g_t;
        }
    }
    if (dropped_terms) *dropped_terms += dropped;
    return total / static_cast<double>(n);
}

// Trapezoidal integration of BS(t) over [min observed time, max observed
// time] at num_points equally spaced points, normalized by the range.
inline double integrated_brier(const PredictionSet& preds, const StepFunction& censor_curve,
                               int num_points = 100) {
    preds.validate();
    if (num_points < 2) throw std::invalid_argument("integrated_brier: need at least 2 points");
    const auto [lo_it, hi_it] = std::minmax_element(preds.times.begin(), preds.times.end());
    const double lo = *lo_it, hi = *hi_it;
    if (lo == hi) throw std::invalid_argument("integrated_brier: degenerate time range");
    double integral = 0.0;
    double prev_t = lo, prev_bs = brier_score(preds, lo, censor_curve);
    for (int k = 1; k < num_points; ++k) {
        const double t = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(num_points - 1);
        const double bs = brier_score(preds, t, censor_curve);
        integral += 0.5 * (bs + prev_bs) * (t - prev_t);
        prev_t = t;
        prev_bs = bs;
    }
    return integral / (hi - lo);
}

struct MetricReport {
    std::optional<double> c_index;
    double integrated_brier_score = 0.0;
    std::vector<std::pair<double, double>> brier_curve;  // (t, BS(t))

    nlohmann::json to_json() const {
        nlohmann::json j;
        if (c_index)
            j["c_index"] = *c_index;
        else
            j["c_index"] = nullptr;
        j["integrated_brier"] = integrated_brier_score;
        if (c_index) j["c_index_rebased"] = std::round(*c_index * 1000.0) / 10.0;
        j["integrated_brier_rebased"] = std::round(integrated_brier_score * 1000.0) / 10.0;
        nlohmann::json curve = nlohmann::json::array();
        for (const auto& [t, bs] : brier_curve) curve.push_back({t, bs});
        j["brier_curve"] = curve;
        return j;
    }
};

// Censoring-distribution KM: kaplan_meier on flipped indicators.
inline StepFunction censoring_km(const std::vector<double>& times, const std::vector<char>& events) {
    std::vector<char> flipped(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) flipped[i] = events[i] ? 0 : 1;
    return kaplan_meier(times, flipped);
}

inline MetricReport evaluate(const PredictionSet& preds, int num_points = 100) {
    MetricReport r;
    r.c_index = concordance_td(preds);
    const StepFunction g = censoring_km(preds.times, preds.events);
    const auto [lo_it, hi_it] = std::minmax_element(preds.times.begin(), preds.times.end());
    const double lo = *lo_it, hi = *hi_it;
    if (lo == hi) throw std::invalid_argument("evaluate: degenerate time range");
    r.brier_curve.reserve(static_cast<std::size_t>(num_points));
    for (int k = 0; k < num_points; ++k) {
        const double t = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(num_points - 1);
        r.brier_curve.emplace_back(t, brier_score(preds, t, g));
    }
    double integral = 0.0;
    for (int k = 1; k < num_points; ++k)
        integral += 0.5 * (r.brier_curve[k].second + r.brier_curve[k - 1].second) *
                    (r.brier_curve[k].first - r.brier_curve[k - 1].first);
    r.integrated_brier_score = integral / (hi - lo);
    return r;
}

}  // namespace fedsurv
