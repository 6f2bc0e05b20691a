#pragma once
// Kaplan-Meier estimation, KM-quantile time grids, discrete labels,
// survival-curve composition and constant-density interpolation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include "fedsurv/data.hpp"

namespace fedsurv {

// Right-continuous step function on [0, inf); value_before_first applies
// left of the first step time (1 for survival curves).
struct StepFunction {
    std::vector<double> times;   // strictly increasing
    std::vector<double> values;  // same length
    double value_before_first = 1.0;

    double value_at(double t) const {
        // last step time <= t
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return value_before_first;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }

    // left limit: last step time strictly < t
    double value_before(double t) const {
        auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return value_before_first;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }
};

// Interval cut points {tau_1..tau_m}; interval j (0-based) is
// [tau_j, tau_{j+1}) with tau_0 = 0. Last cut equals the maximum observed
// time in the fitting data. requested_m records the m asked for before
// duplicate collapsing.
struct TimeGrid {
    std::vector<double> cuts;
    std::size_t requested_m = 0;

    std::size_t m() const { return cuts.size(); }
};

struct DiscreteLabel {
    std::size_t interval = 0;
    bool event = false;
};

// Product-limit estimator. Ties between events and censorings at the same
// time are handled events-first: censored individuals at time t remain in
// the risk set for the event step at t. Steps only at distinct event times.
inline StepFunction kaplan_meier(const std::vector<double>& times, const std::vector<char>& events) {
    if (times.empty()) throw std::invalid_argument("kaplan_meier: empty input");
    if (times.size() != events.size())
        throw std::invalid_argument("kaplan_meier: times/events length mismatch");

    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    StepFunction s;
    s.value_before_first = 1.0;
    double surv = 1.0;
    const std::size_t n = times.size();
    std::size_t i = 0;
    std::size_t at_risk = n;
    while (i < n) {
        const double t = times[order[i]];
        if (t < 0) throw std::invalid_argument("kaplan_meier: negative time");
        std::size_t deaths = 0, leaving = 0;
        while (i < n && times[order[i]] == t) {
            if (events[order[i]]) ++deaths;
            ++leaving;
            ++i;
        }
        if (deaths > 0) {
            surv *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
            s.times.push_back(t);
            s.values.push_back(surv);
        }
        at_risk -= leaving;
    }
    return s;
}

// Eq-style KM-quantile grid: cuts are the earliest observed times where the
// KM curve first drops to or below the targets 1 - j*(1-S(tau_max))/m; the
// final cut is forced to the maximum observed time. Consecutive duplicates
// are collapsed, reducing the effective m.
inline TimeGrid km_quantile_grid(const std::vector<double>& times, const std::vector<char>& events,
                                 std::size_t m) {
    if (m < 1) throw std::invalid_argument("km_quantile_grid: m must be >= 1");
    if (std::find(events.begin(), events.end(), char(1)) == events.end())
        throw std::invalid_argument("km_quantile_grid: no events; KM never drops");

    const StepFunction km = kaplan_meier(times, events);
    const double t_max = *std::max_element(times.begin(), times.end());
    const double s_max = km.value_at(t_max);
    const double step = (1.0 - s_max) / static_cast<double>(m);
    constexpr double kEps = 1e-12;

    TimeGrid grid;
    grid.requested_m = m;
    for (std::size_t j = 1; j <= m; ++j) {
        const double target = 1.0 - static_cast<double>(j) * step;
        double cut = t_max;
        for (std::size_t i = 0; i < km.times.size(); ++i) {
            if (km.values[i] <= target + kEps) {
                cut = km.times[i];
                break;
            }
        }
        if (j == m) cut = t_max;  // tau_m pinned to the max observed time
        if (grid.cuts.empty() || cut > grid.cuts.back()) grid.cuts.push_back(cut);
    }
    if (grid.cuts.back() != t_max) {
        if (!grid.cuts.empty() && grid.cuts.back() > t_max) grid.cuts.pop_back();
        grid.cuts.push_back(t_max);
    }
    return grid;
}

// Half-open intervals [tau_j, tau_{j+1}); times at or beyond tau_m clamp to
// the last interval so held-out data always maps somewhere.
inline std::size_t interval_of(const TimeGrid& grid, double t) {
    if (t < 0) throw std::invalid_argument("interval_of: negative time");
    const auto k = static_cast<std::size_t>(
        std::upper_bound(grid.cuts.begin(), grid.cuts.end(), t) - grid.cuts.begin());
    return std::min(k, grid.m() - 1);
}

inline std::vector<DiscreteLabel> discretize_labels(const Dataset& d, const TimeGrid& grid) {
    std::vector<DiscreteLabel> labels(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        labels[i] = {interval_of(grid, d.records[i].time), d.records[i].event};
    return labels;
}

inline std::vector<DiscreteLabel> discretize_labels(const std::vector<double>& times,
                                                    const std::vector<char>& events,
                                                    const TimeGrid& grid) {
    std::vector<DiscreteLabel> labels(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        labels[i] = {interval_of(grid, times[i]), events[i] != 0};
    return labels;
}

// S_j = prod_{k<=j} (1 - h_k)
inline std::vector<double> survival_from_hazards(const std::vector<double>& hazards) {
    std::vector<double> s(hazards.size());
    double acc = 1.0;
    for (std::size_t k = 0; k < hazards.size(); ++k) {
        acc *= 1.0 - hazards[k];
        s[k] = acc;
    }
    return s;
}

// Constant-density interpolation of a survival step curve whose step times
// are the grid cuts: linear between adjacent cut values, anchored at
// (0, 1) on the left, constant beyond the last cut.
inline double interpolate_survival(const StepFunction& curve, double t) {
    if (t < 0) throw std::invalid_argument("interpolate_survival: negative time");
    if (curve.times.empty()) return curve.value_before_first;
    if (t >= curve.times.back()) return curve.values.back();
    double t0 = 0.0, v0 = curve.value_before_first;
    for (std::size_t j = 0; j < curve.times.size(); ++j) {
        const double t1 = curve.times[j], v1 = curve.values[j];
        if (t <= t1) {
            if (t1 == t0) return v1;
            return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
        }
        t0 = t1;
        v0 = v1;
    }
    return curve.values.back();
}

inline double interpolate_survival(const StepFunction& curve, const TimeGrid& grid, double t) {
    if (curve.times.size() != grid.m())
        throw std::invalid_argument("interpolate_survival: curve does not match grid");
    return interpolate_survival(curve, t);
}

}  // namespace fedsurv
