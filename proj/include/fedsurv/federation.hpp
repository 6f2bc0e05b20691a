#pragma once
// Simulated federation: centre partitioning (IID or event-time stratified),
// size-weighted parameter aggregation and the global/local round loop.
// Everything is deterministic given the config seed; per-epoch shuffle seeds
// are derived from (seed, centre_id, cumulative epoch index) so a K=1
// federation reproduces pooled training bit-exactly for any (T, B) split.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsurv/data.hpp"
#include "fedsurv/model.hpp"

namespace fedsurv {

enum class PartitionKind { Iid, Stratified };

struct FederationConfig {
    int num_centres = 4;  // K
    PartitionKind partition = PartitionKind::Iid;
    int global_rounds = 100;  // T
    int local_rounds = 1;     // B; presets keep T*B = 100
    double learning_rate = 1e-3;
    int batch_size = 256;
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::uint64_t seed = 0;

    void validate() const {
        if (num_centres < 1 || global_rounds < 1 || local_rounds < 1 || batch_size < 1)
            throw std::invalid_argument("federation config: K, T, B, batch_size must be >= 1");
        if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
    }
};

struct CentreData {
    int centre_id = 0;
    std::vector<std::size_t> indices;  // into the training dataset
};

// Seeded shuffle, contiguous blocks, sizes differing by at most one.
inline std::vector<CentreData> partition_iid(const std::vector<std::size_t>& train_indices,
                                             int num_centres, std::uint64_t seed) {
    const auto K = static_cast<std::size_t>(num_centres);
    if (K == 0 || train_indices.size() < K)
        throw std::invalid_argument("partition_iid: need at least one index per centre");
    std::vector<std::size_t> shuffled = train_indices;
    auto rng = make_rng(seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    std::vector<CentreData> centres(K);
    const std::size_t n = shuffled.size();
    std::size_t pos = 0;
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t sz = n / K + (k < n % K ? 1 : 0);
        centres[k].centre_id = static_cast<int>(k);
        centres[k].indices.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                                  shuffled.begin() + static_cast<std::ptrdiff_t>(pos + sz));
        pos += sz;
    }
    return centres;
}

// Sort ascending by observed time (stable on ties by original index) and cut
// into K contiguous quantile blocks: centre 0 shortest survivals, centre K-1
// longest.
inline std::vector<CentreData> partition_stratified(const Dataset& d,
                                                    const std::vector<std::size_t>& train_indices,
                                                    int num_centres) {
    const auto K = static_cast<std::size_t>(num_centres);
    if (K == 0 || train_indices.size() < K)
        throw std::invalid_argument("partition_stratified: need at least one index per centre");
    std::vector<std::size_t> sorted = train_indices;
    std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return d.records[a].time < d.records[b].time;
    });
    std::vector<CentreData> centres(K);
    const std::size_t n = sorted.size();
    std::size_t pos = 0;
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t sz = n / K + (k < n % K ? 1 : 0);
        centres[k].centre_id = static_cast<int>(k);
        centres[k].indices.assign(sorted.begin() + static_cast<std::ptrdiff_t>(pos),
                                  sorted.begin() + static_cast<std::ptrdiff_t>(pos + sz));
        pos += sz;
    }
    return centres;
}

// Element-wise weighted average of parameter sets.
inline Model aggregate(const std::vector<Model>& params, const std::vector<double>& weights) {
    if (params.empty() || params.size() != weights.size())
        throw std::invalid_argument("aggregate: params/weights mismatch");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0) throw std::invalid_argument("aggregate: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("aggregate: weights must sum to 1");

    Model out = params[0].zeros_like();
    for (std::size_t k = 0; k < params.size(); ++k) {
        std::vector<const Eigen::MatrixXd*> src;
        std::vector<Eigen::MatrixXd> copies;
        params[k].for_each_param(
            [&](const std::string&, const auto& t) { copies.emplace_back(t); });
        std::size_t idx = 0;
        out.for_each_param([&](const std::string& name, auto& t) {
            if (copies[idx].rows() != t.rows() || copies[idx].cols() != t.cols())
                throw std::invalid_argument("aggregate: shape mismatch at " + name);
            t += weights[k] * copies[idx];
            ++idx;
        });
    }
    return out;
}

// One local round = one epoch of seeded mini-batch optimization. The epoch
// counter is cumulative per centre across global rounds.
inline void train_epochs(Model& model, const Eigen::MatrixXd& X,
                         const std::vector<DiscreteLabel>& labels, int epochs,
                         OptimizerState& opt, int batch_size, std::uint64_t base_seed,
                         int centre_id, long& epoch_counter) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (n == 0) throw std::invalid_argument("train_epochs: empty data");
    std::vector<std::size_t> order(n);
    for (int e = 0; e < epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto rng = make_rng(mix64(base_seed, static_cast<std::uint64_t>(centre_id),
                                  static_cast<std::uint64_t>(epoch_counter)));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
            const auto bsz = static_cast<Eigen::Index>(end - start);
            Eigen::MatrixXd Xb(bsz, X.cols());
            std::vector<DiscreteLabel> lb(static_cast<std::size_t>(bsz));
            for (Eigen::Index r = 0; r < bsz; ++r) {
                const std::size_t src = order[start + static_cast<std::size_t>(r)];
                Xb.row(r) = X.row(static_cast<Eigen::Index>(src));
                lb[static_cast<std::size_t>(r)] = labels[src];
            }
            const Model grads = gradient(model, Xb, lb);
            opt.apply(model, grads);
        }
        ++epoch_counter;
        if (!model.all_finite())
            throw std::runtime_error("train_epochs: non-finite parameters after epoch " +
                                     std::to_string(epoch_counter) + " (centre " +
                                     std::to_string(centre_id) + ")");
    }
}

// Pooled baseline: same loop as a single centre running total_epochs epochs.
inline Model pooled_train(const Model& model0, const Eigen::MatrixXd& X,
                          const std::vector<DiscreteLabel>& labels, int total_epochs,
                          OptimizerKind optimizer, double learning_rate, int batch_size,
                          std::uint64_t seed) {
    Model model = model0;
    OptimizerState opt;
    opt.kind = optimizer;
    opt.learning_rate = learning_rate;
    long epoch_counter = 0;
    train_epochs(model, X, labels, total_epochs, opt, batch_size, seed, 0, epoch_counter);
    return model;
}

// Optional round-by-round diagnostics, one JSON line per global round.
struct RoundLogger {
    std::ostream* out = nullptr;

    void log(int round, const std::vector<double>& centre_losses, double global_loss) const {
        if (!out) return;
        nlohmann::json j{{"round", round},
                         {"centre_losses", centre_losses},
                         {"global_loss", global_loss}};
        (*out) << j.dump() << "\n";
    }
};

// FedAvg over the centre partition: per global round, broadcast the global
// parameters, run B local epochs per centre, aggregate with weights
// |N_k|/|N|. Adam state is per-centre and persists across rounds; only the
// parameters are aggregated.
inline Model fed_avg(const Model& model0, const std::vector<CentreData>& centres,
                     const FederationConfig& cfg, const Eigen::MatrixXd& X_train,
                     const std::vector<DiscreteLabel>& labels,
                     const RoundLogger& logger = {}) {
    cfg.validate();
    if (centres.empty()) throw std::invalid_argument("fed_avg: no centres");
    std::size_t total = 0;
    for (const auto& c : centres) {
        if (c.indices.empty()) throw std::invalid_argument("fed_avg: empty centre");
        total += c.indices.size();
    }

    const std::size_t K = centres.size();
    std::vector<Eigen::MatrixXd> Xc(K);
    std::vector<std::vector<DiscreteLabel>> Lc(K);
    std::vector<double> weights(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto nk = static_cast<Eigen::Index>(centres[k].indices.size());
        Xc[k].resize(nk, X_train.cols());
        Lc[k].resize(static_cast<std::size_t>(nk));
        for (Eigen::Index r = 0; r < nk; ++r) {
            const std::size_t src = centres[k].indices[static_cast<std::size_t>(r)];
            Xc[k].row(r) = X_train.row(static_cast<Eigen::Index>(src));
            Lc[k][static_cast<std::size_t>(r)] = labels[src];
        }
        weights[k] = static_cast<double>(centres[k].indices.size()) / static_cast<double>(total);
    }

    Model global = model0;
    std::vector<OptimizerState> opt(K);
    std::vector<long> epoch_counter(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        opt[k].kind = cfg.optimizer;
        opt[k].learning_rate = cfg.learning_rate;
    }

    for (int round = 1; round <= cfg.global_rounds; ++round) {
        std::vector<Model> locals;
        locals.reserve(K);
        std::vector<double> centre_losses(K);
        for (std::size_t k = 0; k < K; ++k) {
            Model local = global;
            try {
                train_epochs(local, Xc[k], Lc[k], cfg.local_rounds, opt[k], cfg.batch_size,
                             cfg.seed, centres[k].centre_id, epoch_counter[k]);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("fed_avg: round " + std::to_string(round) + ", centre " +
                                         std::to_string(centres[k].centre_id) + ": " + e.what());
            }
            centre_losses[k] = nll_loss(local, Xc[k], Lc[k]);
            locals.push_back(std::move(local));
        }
        global = aggregate(locals, weights);
        if (!global.all_finite())
            throw std::runtime_error("fed_avg: non-finite aggregated parameters at round " +
                                     std::to_string(round));
        if (logger.out) logger.log(round, centre_losses, nll_loss(global, X_train, labels));
    }
    return global;
}

}  // namespace fedsurv
