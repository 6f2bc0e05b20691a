#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fedsurv/metrics.hpp"

using namespace fedsurv;

namespace {

// Independent brute-force estimator of the time-dependent concordance:
// straight double loop over ordered pairs with its own linear interpolation,
// kept separate from the production path on purpose.
std::optional<double> concordance_bruteforce(const PredictionSet& preds) {
    auto interp = [](const StepFunction& c, double t) {
        if (c.times.empty()) return 1.0;
        double prev_t = 0.0, prev_v = 1.0;
        for (std::size_t k = 0; k < c.times.size(); ++k) {
            if (t <= c.times[k]) {
                const double span = c.times[k] - prev_t;
                if (span == 0.0) return c.values[k];
                return prev_v + (c.values[k] - prev_v) * (t - prev_t) / span;
            }
            prev_t = c.times[k];
            prev_v = c.values[k];
        }
        return c.values.back();
    };
    long long comp_total = 0, conc_total = 0;
    const std::size_t n = preds.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            int comp = 0;
            if (preds.times[i] < preds.times[j] && preds.events[i]) comp = 1;
            if (preds.times[i] == preds.times[j] && preds.events[i] && !preds.events[j]) comp = 1;
            if (!comp) continue;
            comp_total += comp;
            if (interp(preds.survival[i], preds.times[i]) <
                interp(preds.survival[j], preds.times[i]))
                conc_total += comp;
        }
    if (comp_total == 0) return std::nullopt;
    return static_cast<double>(conc_total) / static_cast<double>(comp_total);
}

PredictionSet random_prediction_set(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PredictionSet p;
    const std::size_t m = 3 + rng() % 5;
    std::vector<double> cuts(m);
    double acc = 0.0;
    for (auto& c : cuts) {
        acc += 0.5 + u(rng) * 5.0;
        c = acc;
    }
    for (std::size_t i = 0; i < n; ++i) {
        StepFunction s;
        s.times = cuts;
        double v = 1.0;
        for (std::size_t k = 0; k < m; ++k) {
            v *= 1.0 - u(rng) * 0.6;
            s.values.push_back(v);
        }
        p.survival.push_back(std::move(s));
        // occasionally collide times to exercise the tie branch
        p.times.push_back(std::round(u(rng) * (acc + 2.0) * 4.0) / 4.0);
        p.events.push_back(u(rng) < 0.6 ? 1 : 0);
    }
    return p;
}

StepFunction flat_curve(const std::vector<double>& cuts, double level) {
    StepFunction s;
    s.times = cuts;
    s.values.assign(cuts.size(), level);
    return s;
}

}  // namespace

TEST_CASE("single correctly ranked pair gives c-index one") {
    PredictionSet p;
    p.times = {1.0, 2.0};
    p.events = {1, 1};
    StepFunction s1;  // S(1|x_1) = 0.3
    s1.times = {1.0, 2.0};
    s1.values = {0.3, 0.1};
    StepFunction s2;  // S(1|x_2) = 0.9
    s2.times = {1.0, 2.0};
    s2.values = {0.9, 0.5};
    p.survival = {s1, s2};
    REQUIRE(concordance_td(p).has_value());
    CHECK(*concordance_td(p) == 1.0);
}

TEST_CASE("all-censored data has no comparable pairs") {
    PredictionSet p;
    p.times = {1.0, 2.0, 3.0};
    p.events = {0, 0, 0};
    p.survival = {flat_curve({5.0}, 0.5), flat_curve({5.0}, 0.6), flat_curve({5.0}, 0.7)};
    CHECK_FALSE(concordance_td(p).has_value());
}

TEST_CASE("tied event time against a censored patient is comparable") {
    PredictionSet p;
    p.times = {2.0, 2.0};
    p.events = {1, 0};
    p.survival = {flat_curve({4.0}, 0.2), flat_curve({4.0}, 0.8)};
    REQUIRE(concordance_td(p).has_value());
    CHECK(*concordance_td(p) == 1.0);  // one pair (event vs censored), ranked right
}

TEST_CASE("tied survival predictions score zero, not half") {
    PredictionSet p;
    p.times = {1.0, 2.0};
    p.events = {1, 1};
    p.survival = {flat_curve({3.0}, 0.5), flat_curve({3.0}, 0.5)};
    CHECK(*concordance_td(p) == 0.0);
}

TEST_CASE("production concordance equals the brute-force enumeration") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 49;
        const PredictionSet p = random_prediction_set(n, rng);
        const auto fast = concordance_td(p);
        const auto slow = concordance_bruteforce(p);
        REQUIRE(fast.has_value() == slow.has_value());
        if (fast) {
            CHECK(*fast == *slow);  // exact: both are ratios of identical integer counts
            ++checked;
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("concordance is invariant under increasing affine maps of survival") {
    // affine maps commute with the linear interpolation used at evaluation
    // time, so every pairwise strict inequality is preserved exactly
    std::mt19937_64 rng(7);
    PredictionSet p = random_prediction_set(30, rng);
    const auto base = concordance_td(p);
    PredictionSet scaled = p;
    for (auto& s : scaled.survival)
        for (auto& v : s.values) v = 0.4 * v + 0.1;
    const auto after = concordance_td(scaled);
    REQUIRE(base.has_value());
    REQUIRE(after.has_value());
    CHECK(*base == *after);
}

TEST_CASE("perfect prediction with no censoring gives zero Brier score") {
    PredictionSet p;
    p.times = {1.0, 2.0, 3.0, 4.0};
    p.events = {1, 1, 1, 1};
    const double t = 2.5;
    for (double ti : p.times) p.survival.push_back(flat_curve({0.5}, ti > t ? 1.0 : 0.0));
    // indicator-matching curves: S = 1{t_i > t} exactly at t
    StepFunction g = censoring_km(p.times, p.events);
    CHECK(brier_score(p, t, g) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("constant one-half prediction gives a quarter everywhere without censoring") {
    PredictionSet p;
    p.times = {1.0, 2.0, 3.0, 4.0, 5.0};
    p.events = {1, 1, 1, 1, 1};
    for (std::size_t i = 0; i < 5; ++i) p.survival.push_back(flat_curve({10.0}, 0.5));
    // flat interpolated value 0.5 requires an exactly flat curve: anchor at 1
    // makes the pre-cut segment slope, so evaluate beyond the last cut
    StepFunction g = censoring_km(p.times, p.events);
    for (double t : {12.0, 20.0, 30.0}) {
        double expected = 0.0;
        for (std::size_t i = 0; i < 5; ++i)
            expected += p.times[i] > t ? 0.25 : 0.25;  // (1-0.5)^2 or (0-0.5)^2
        CHECK(brier_score(p, t, g) == Catch::Approx(expected / 5.0));
    }
}

TEST_CASE("uncensored Brier reduces to plain mean squared error") {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PredictionSet p;
    for (int i = 0; i < 25; ++i) {
        p.times.push_back(1.0 + u(rng) * 9.0);
        p.events.push_back(1);
        StepFunction s;
        s.times = {0.5, 11.0};
        const double v = u(rng);
        s.values = {std::max(v, 0.05), std::max(v, 0.05) * 0.5};
        p.survival.push_back(std::move(s));
    }
    StepFunction g = censoring_km(p.times, p.events);  // == 1 everywhere needed
    for (double t : {2.0, 5.0, 8.0}) {
        double mse = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double s_hat = interpolate_survival(p.survival[i], t);
            const double y = p.times[i] > t ? 1.0 : 0.0;
            mse += (y - s_hat) * (y - s_hat);
        }
        mse /= static_cast<double>(p.size());
        CHECK(brier_score(p, t, g) == Catch::Approx(mse).epsilon(1e-12));
    }
}

TEST_CASE("hand-worked 4-patient censored example") {
    // patients: (2, event), (3, censored), (7, event), (9, censored), t = 5
    // censoring KM: G = 1 before 3, 2/3 on [3,9), 0 from 9
    // weights: patient 1 event before t -> 1/G(2-) = 1; patient 2 dropped;
    // patients 3,4 alive -> 1/G(5) = 1.5
    PredictionSet p;
    p.times = {2.0, 3.0, 7.0, 9.0};
    p.events = {1, 0, 1, 0};
    auto curve = [](double at5, double at10) {
        StepFunction s;
        s.times = {5.0, 10.0};
        s.values = {at5, at10};
        return s;
    };
    p.survival = {curve(0.4, 0.2), curve(0.9, 0.8), curve(0.8, 0.6), curve(0.7, 0.5)};
    const StepFunction g = censoring_km(p.times, p.events);
    CHECK(g.value_before(2.0) == 1.0);
    CHECK(g.value_at(5.0) == Catch::Approx(2.0 / 3.0));

    const double expected = (1.0 * 0.4 * 0.4 + 1.5 * 0.2 * 0.2 + 1.5 * 0.3 * 0.3) / 4.0;
    int dropped = 0;
    CHECK(brier_score(p, 5.0, g, &dropped) == Catch::Approx(expected).margin(1e-15));
    CHECK(dropped == 0);
}

TEST_CASE("terms with zero censoring weight are dropped and counted") {
    // a KM fitted on the evaluation set itself never zeroes where a weight is
    // needed, so exercise the guard with an external censor curve
    PredictionSet p;
    p.times = {2.0, 6.0};
    p.events = {1, 1};
    p.survival = {flat_curve({1.0}, 0.4), flat_curve({1.0}, 0.7)};
    StepFunction g;
    g.times = {4.0};
    g.values = {0.0};  // G vanishes from t = 4
    int dropped = 0;
    const double bs = brier_score(p, 5.0, g, &dropped);
    CHECK(dropped == 1);                              // alive patient at t=6 dropped
    CHECK(bs == Catch::Approx(0.4 * 0.4 / 2.0));      // event patient keeps weight 1
}

TEST_CASE("integrated Brier normalization and degenerate inputs") {
    // all patients censored after the window: BS(t) = (1-1)^2 = 0 throughout,
    // so the normalized integral is the constant 0
    PredictionSet flat;
    flat.times = {10.0, 20.0};
    flat.events = {0, 0};
    flat.survival = {flat_curve({1.0}, 1.0), flat_curve({1.0}, 1.0)};
    StepFunction gc = censoring_km(flat.times, flat.events);
    CHECK(integrated_brier(flat, gc, 100) == Catch::Approx(0.0).margin(1e-12));
    CHECK_THROWS_AS(integrated_brier(flat, gc, 1), std::invalid_argument);

    PredictionSet single;
    single.times = {5.0, 5.0};
    single.events = {1, 1};
    single.survival = {flat_curve({1.0}, 0.5), flat_curve({1.0}, 0.5)};
    CHECK_THROWS_AS(integrated_brier(single, gc, 10), std::invalid_argument);
}

TEST_CASE("integrated Brier lies between the sampled extremes") {
    std::mt19937_64 rng(33);
    PredictionSet p = random_prediction_set(40, rng);
    StepFunction g = censoring_km(p.times, p.events);
    const double ib = integrated_brier(p, g, 100);
    double lo = 1e300, hi = -1e300;
    const auto [mn, mx] = std::minmax_element(p.times.begin(), p.times.end());
    for (int k = 0; k < 100; ++k) {
        const double t = *mn + (*mx - *mn) * k / 99.0;
        const double bs = brier_score(p, t, g);
        lo = std::min(lo, bs);
        hi = std::max(hi, bs);
    }
    CHECK(ib >= lo - 1e-12);
    CHECK(ib <= hi + 1e-12);
}
