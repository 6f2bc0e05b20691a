#pragma once
// Discrete-time Cox model family: linear or dense ReLU predictor with a
// proportional-hazards (PH) or non-PH output head. Hazards come out of a
// sigmoid over per-interval logits; the loss is the per-interval Bernoulli
// negative log-likelihood. Gradients are hand-derived reverse mode for this
// fixed architecture family.

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsurv/random.hpp"
#include "fedsurv/survival.hpp"

namespace fedsurv {

enum class PredictorKind { Linear, Dense };
enum class HeadKind { PH, NonPH };

struct ModelConfig {
    PredictorKind predictor = PredictorKind::Dense;
    std::vector<int> hidden_sizes = {32, 32};  // empty for linear
    HeadKind head = HeadKind::PH;
    int num_intervals = 10;  // m
    int input_dim = 0;       // p
    std::uint64_t seed = 0;

    void validate() const {
        if (num_intervals < 1) throw std::invalid_argument("num_intervals must be >= 1");
        if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
        if (predictor == PredictorKind::Linear && !hidden_sizes.empty())
            throw std::invalid_argument("linear predictor takes no hidden layers");
        for (int h : hidden_sizes)
            if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");
    }
};

struct DenseLayer {
    Eigen::MatrixXd W;  // fan_in x fan_out
    Eigen::VectorXd b;  // fan_out
};

// Logits are clamped to this range before the sigmoid/log so the loss stays
// finite even at divergent learning-rate grid points.
constexpr double kLogitClamp = 30.0;

struct Model {
    ModelConfig config;
    std::vector<DenseLayer> hidden;

    // PH head: scalar g = w . z with no bias, plus per-interval alphas
    Eigen::VectorXd ph_weight;
    Eigen::VectorXd ph_alpha;

    // non-PH head: fully connected last layer with per-interval weights
    Eigen::MatrixXd out_W;  // last_dim x m
    Eigen::VectorXd out_b;  // m

    int last_hidden_dim() const {
        return hidden.empty() ? config.input_dim : static_cast<int>(hidden.back().b.size());
    }

    // Visits every parameter tensor in a fixed order with a stable name.
    template <typename F>
    void for_each_param(F&& f) {
        for (std::size_t l = 0; l < hidden.size(); ++l) {
            f("hidden" + std::to_string(l) + ".W", hidden[l].W);
            f("hidden" + std::to_string(l) + ".b", hidden[l].b);
        }
        if (config.head == HeadKind::PH) {
            f("head.w", ph_weight);
            f("head.alpha", ph_alpha);
        } else {
            f("head.W", out_W);
            f("head.b", out_b);
        }
    }

    template <typename F>
    void for_each_param(F&& f) const {
        const_cast<Model*>(this)->for_each_param([&](const std::string& name, auto& t) {
            f(name, static_cast<const std::decay_t<decltype(t)>&>(t));
        });
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_param([&](const std::string&, const auto& t) {
            n += static_cast<std::size_t>(t.size());
        });
        return n;
    }

    bool all_finite() const {
        bool ok = true;
        for_each_param([&](const std::string&, const auto& t) {
            if (!t.allFinite()) ok = false;
        });
        return ok;
    }

    Model zeros_like() const {
        Model z = *this;
        z.for_each_param([](const std::string&, auto& t) { t.setZero(); });
        return z;
    }
};

// Layers get uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights and biases;
// PH alphas start at zero (logit 0 = baseline hazard one half).
inline Model init_model(const ModelConfig& config) {
    config.validate();
    Model model;
    model.config = config;
    auto rng = make_rng(config.seed);

    auto uniform_fill = [&](auto& t, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = u(rng);
    };

    int dim = config.input_dim;
    for (int h : config.hidden_sizes) {
        DenseLayer layer;
        layer.W.resize(dim, h);
        layer.b.resize(h);
        uniform_fill(layer.W, dim);
        uniform_fill(layer.b, dim);
        model.hidden.push_back(std::move(layer));
        dim = h;
    }
    const int m = config.num_intervals;
    if (config.head == HeadKind::PH) {
        model.ph_weight.resize(dim);
        uniform_fill(model.ph_weight, dim);
        model.ph_alpha = Eigen::VectorXd::Zero(m);
    } else {
        model.out_W.resize(dim, m);
        model.out_b.resize(m);
        uniform_fill(model.out_W, dim);
        uniform_fill(model.out_b, dim);
    }
    return model;
}

struct ForwardPass {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] = X, then post-ReLU
    Eigen::MatrixXd raw_logits;                // pre-clamp
    Eigen::MatrixXd logits;                    // clamped
    Eigen::MatrixXd hazards;                   // sigmoid(logits), n x m in (0,1)
    Eigen::VectorXd ph_scores;                 // scalar g per row (PH only)
};

inline ForwardPass forward_pass(const Model& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.config.input_dim)
        throw std::invalid_argument("forward: feature dimension mismatch");
    ForwardPass fp;
    fp.activations.push_back(X);
    Eigen::MatrixXd a = X;
    for (const auto& layer : model.hidden) {
        a = ((a * layer.W).rowwise() + layer.b.transpose()).cwiseMax(0.0);
        fp.activations.push_back(a);
    }
    if (model.config.head == HeadKind::PH) {
        fp.ph_scores = a * model.ph_weight;
        fp.raw_logits = fp.ph_scores.replicate(1, model.config.num_intervals);
        fp.raw_logits.rowwise() += model.ph_alpha.transpose();
    } else {
        fp.raw_logits = (a * model.out_W).rowwise() + model.out_b.transpose();
    }
    fp.logits = fp.raw_logits.cwiseMax(-kLogitClamp).cwiseMin(kLogitClamp);
    fp.hazards = fp.logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
    return fp;
}

inline Eigen::MatrixXd forward(const Model& model, const Eigen::MatrixXd& X) {
    return forward_pass(model, X).hazards;
}

namespace detail {
inline double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
}  // namespace detail

// Sum over individuals of the per-interval Bernoulli log-losses for
// intervals 0..interval_i inclusive; y = 1 only at interval_i when
// event = true. Computed from logits for numerical stability:
//   -log h = softplus(-z), -log(1-h) = softplus(z).
inline double nll_sum(const Model& model, const ForwardPass& fp,
                      const std::vector<DiscreteLabel>& labels) {
    const auto n = static_cast<std::size_t>(fp.logits.rows());
    const auto m = static_cast<std::size_t>(model.config.num_intervals);
    if (labels.size() != n) throw std::invalid_argument("nll: label count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i].interval >= m) throw std::invalid_argument("nll: label interval out of range");
        for (std::size_t k = 0; k <= labels[i].interval; ++k) {
            const double z = fp.logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            const bool y = labels[i].event && k == labels[i].interval;
            total += y ? detail::softplus(-z) : detail::softplus(z);
        }
    }
    return total;
}

inline double nll_sum(const Model& model, const Eigen::MatrixXd& X,
                      const std::vector<DiscreteLabel>& labels) {
    return nll_sum(model, forward_pass(model, X), labels);
}

// Mean over individuals; the convention used for optimization.
inline double nll_loss(const Model& model, const Eigen::MatrixXd& X,
                       const std::vector<DiscreteLabel>& labels) {
    return nll_sum(model, X, labels) / static_cast<double>(labels.size());
}

// Exact reverse-mode gradients of the mean NLL. Returns a Model-shaped
// parameter set (config copied along for shape bookkeeping).
inline Model gradient(const Model& model, const Eigen::MatrixXd& X,
                      const std::vector<DiscreteLabel>& labels, double* loss_out = nullptr) {
    const ForwardPass fp = forward_pass(model, X);
    const auto n = static_cast<Eigen::Index>(X.rows());
    const auto m = static_cast<Eigen::Index>(model.config.num_intervals);
    if (loss_out) *loss_out = nll_sum(model, fp, labels) / static_cast<double>(labels.size());

    // dL/dlogit: (h - y)/n on active intervals, 0 elsewhere; clamped logits
    // pass no gradient.
    Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(n, m);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto last = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)].interval);
        for (Eigen::Index k = 0; k <= last; ++k) {
            if (std::abs(fp.raw_logits(i, k)) >= kLogitClamp) continue;
            const double y =
                (labels[static_cast<std::size_t>(i)].event && k == last) ? 1.0 : 0.0;
            dlogits(i, k) = (fp.hazards(i, k) - y) * inv_n;
        }
    }

    Model grads = model.zeros_like();
    const Eigen::MatrixXd& z_last = fp.activations.back();
    Eigen::MatrixXd dz;  // gradient wrt last hidden activation
    if (model.config.head == HeadKind::PH) {
        const Eigen::VectorXd dg = dlogits.rowwise().sum();
        grads.ph_alpha = dlogits.colwise().sum().transpose();
        grads.ph_weight = z_last.transpose() * dg;
        dz = dg * model.ph_weight.transpose();
    } else {
        grads.out_W = z_last.transpose() * dlogits;
        grads.out_b = dlogits.colwise().sum().transpose();
        dz = dlogits * model.out_W.transpose();
    }

    for (std::size_t l = model.hidden.size(); l-- > 0;) {
        // ReLU mask from the post-activation values
        const Eigen::MatrixXd masked =
            ((fp.activations[l + 1].array() > 0.0).cast<double>() * dz.array()).matrix();
        grads.hidden[l].W = fp.activations[l].transpose() * masked;
        grads.hidden[l].b = masked.colwise().sum().transpose();
        dz = masked * model.hidden[l].W.transpose();
    }
    return grads;
}

enum class OptimizerKind { Sgd, Adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<Eigen::MatrixXd> first_moment;   // aligned with for_each_param order
    std::vector<Eigen::MatrixXd> second_moment;

    void apply(Model& model, const Model& grads) {
        ++step_count;
        std::vector<Eigen::MatrixXd> gmat;
        grads.for_each_param([&](const std::string&, const auto& g) { gmat.emplace_back(g); });
        std::size_t idx = 0;
        model.for_each_param([&](const std::string&, auto& param) {
            const Eigen::MatrixXd& g = gmat[idx];
            if (kind == OptimizerKind::Sgd) {
                param -= learning_rate * g;
            } else {
                if (first_moment.size() <= idx) {
                    first_moment.emplace_back(Eigen::MatrixXd::Zero(g.rows(), g.cols()));
                    second_moment.emplace_back(Eigen::MatrixXd::Zero(g.rows(), g.cols()));
                }
                auto& mm = first_moment[idx];
                auto& vv = second_moment[idx];
                mm = beta1 * mm + (1.0 - beta1) * g;
                vv = beta2 * vv + (1.0 - beta2) * g.cwiseProduct(g);
                const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
                const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
                const Eigen::MatrixXd upd =
                    learning_rate *
                    ((mm / bc1).array() / ((vv / bc2).array().sqrt() + eps)).matrix();
                param -= upd;
            }
            ++idx;
        });
    }
};

// Per-row survival step functions on the grid via S_j = prod(1 - h_k).
inline std::vector<StepFunction> predict_survival(const Model& model, const Eigen::MatrixXd& X,
                                                  const TimeGrid& grid) {
    if (grid.m() != static_cast<std::size_t>(model.config.num_intervals))
        throw std::invalid_argument("predict_survival: grid does not match model intervals");
    const Eigen::MatrixXd h = forward(model, X);
    std::vector<StepFunction> curves(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        StepFunction& c = curves[static_cast<std::size_t>(i)];
        c.times = grid.cuts;
        c.values.resize(grid.m());
        double acc = 1.0;
        for (std::size_t k = 0; k < grid.m(); ++k) {
            acc *= 1.0 - h(i, static_cast<Eigen::Index>(k));
            c.values[k] = acc;
        }
    }
    return curves;
}

// ---- checkpoint serialization (bit-exact round trip via nlohmann round-trip
// doubles) ----

inline nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"predictor", c.predictor == PredictorKind::Linear ? "linear" : "dense"},
            {"hidden_sizes", c.hidden_sizes},
            {"head", c.head == HeadKind::PH ? "ph" : "nonph"},
            {"num_intervals", c.num_intervals},
            {"input_dim", c.input_dim},
            {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.predictor = j.at("predictor") == "linear" ? PredictorKind::Linear : PredictorKind::Dense;
    c.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
    c.head = j.at("head") == "ph" ? HeadKind::PH : HeadKind::NonPH;
    c.num_intervals = j.at("num_intervals").get<int>();
    c.input_dim = j.at("input_dim").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline nlohmann::json model_to_json(const Model& model) {
    nlohmann::json j;
    j["config"] = config_to_json(model.config);
    nlohmann::json params = nlohmann::json::object();
    model.for_each_param([&](const std::string& name, const auto& t) {
        std::vector<double> flat(static_cast<std::size_t>(t.size()));
        // row-major flattening
        std::size_t idx = 0;
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) flat[idx++] = t(r, c);
        params[name] = {{"rows", t.rows()}, {"cols", t.cols()}, {"data", flat}};
    });
    j["parameters"] = params;
    return j;
}

inline Model model_from_json(const nlohmann::json& j) {
    Model model = init_model(config_from_json(j.at("config")));
    const auto& params = j.at("parameters");
    model.for_each_param([&](const std::string& name, auto& t) {
        const auto& entry = params.at(name);
        const auto rows = entry.at("rows").get<Eigen::Index>();
        const auto cols = entry.at("cols").get<Eigen::Index>();
        if (rows != t.rows() || cols != t.cols())
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        const auto flat = entry.at("data").get<std::vector<double>>();
        std::size_t idx = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) t(r, c) = flat[idx++];
    });
    return model;
}

}  // namespace fedsurv
