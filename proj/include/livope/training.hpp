#ifndef LIVOPE_TRAINING_HPP
#define LIVOPE_TRAINING_HPP

// Shared training loop: prioritized replay over a table of frames, a fixed
// number of gradient steps per sampled batch, priorities refreshed from the
// pre-update prediction error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "livope/dataset.hpp"
#include "livope/error.hpp"
#include "livope/liveness.hpp"
#include "livope/nn/mlp.hpp"
#include "livope/replay.hpp"

namespace livope {

struct TrainConfig {
    double learning_rate = 1e-5;
    std::size_t batch_size = 512;
    std::size_t epochs = 100;
    Discount gamma{0.993};
    std::size_t target_sync_interval = 200;
    std::uint64_t seed = 0;
    nn::OptimizerKind optimizer = nn::OptimizerKind::sgd;

    void validate() const {
        if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be nonnegative");
        if (batch_size == 0 || epochs == 0 || target_sync_interval == 0)
            throw ConfigError("batch_size, epochs and target_sync_interval must be positive");
    }
};

inline constexpr double priority_floor = 1e-3;

/// Flattened view of every frame in a dataset.
struct FrameTable {
    nn::Matrix features;                 // feature_dim x N
    std::vector<std::size_t> episode;    // owning episode
    std::vector<std::size_t> position;   // index within the episode
    std::vector<std::ptrdiff_t> next;    // row of the following frame, -1 at the end
    std::vector<char> goal;
    std::vector<std::size_t> episode_start;

    std::size_t size() const noexcept { return goal.size(); }
};

inline FrameTable build_frame_table(const Dataset& d) {
    FrameTable t;
    const std::size_t n = d.num_frames();
    t.features.resize(static_cast<Eigen::Index>(d.feature_dim), static_cast<Eigen::Index>(n));
    std::size_t row = 0;
    for (std::size_t e = 0; e < d.episodes.size(); ++e) {
        const auto& ep = d.episodes[e];
        t.episode_start.push_back(row);
        for (std::size_t i = 0; i < ep.frames.size(); ++i, ++row) {
            const auto& f = ep.frames[i];
            if (f.features.size() != d.feature_dim) throw DatasetError("feature dimension mismatch");
            for (std::size_t k = 0; k < d.feature_dim; ++k)
                t.features(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(row)) = f.features[k];
            t.episode.push_back(e);
            t.position.push_back(i);
            t.next.push_back(i + 1 < ep.frames.size() ? static_cast<std::ptrdiff_t>(row + 1) : -1);
            t.goal.push_back(f.goal ? 1 : 0);
        }
    }
    return t;
}

inline nn::Matrix gather_columns(const nn::Matrix& m, const std::vector<std::size_t>& cols) {
    nn::Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(cols[k]));
    return out;
}

/// Predictions of a scalar network for every column, evaluated in chunks.
inline std::vector<double> predict_all(const nn::Mlp& net, const nn::Matrix& inputs, std::size_t chunk = 1024) {
    std::vector<double> out(static_cast<std::size_t>(inputs.cols()));
    for (Eigen::Index start = 0; start < inputs.cols(); start += static_cast<Eigen::Index>(chunk)) {
        const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk), inputs.cols() - start);
        const nn::Matrix y = net.forward(inputs.middleCols(start, len));
        for (Eigen::Index i = 0; i < len; ++i) out[static_cast<std::size_t>(start + i)] = y(0, i);
    }
    return out;
}

struct CurvePoint {
    std::string stage;
    std::size_t epoch;
    double loss;
};

namespace detail {

/// Drives batches through the replay buffer. `step(sample, grad_step)` performs
/// the gradient updates for one batch and returns the per-item priorities and
/// the batch loss.
template <class Step>
std::vector<CurvePoint> replay_loop(std::size_t num_items, const ReplayConfig& rc, const TrainConfig& tc,
                                    const std::string& stage, std::mt19937_64& rng, Step&& step) {
    rc.validate();
    tc.validate();
    if (num_items == 0) throw DatasetError("no training items");
    PrioritizedReplay replay(rc.capacity, rc.alpha);
    std::vector<std::size_t> order(num_items);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    auto stream = [&](std::size_t k) {
        for (std::size_t i = 0; i < k; ++i) {
            replay.add(order[cursor]);
            cursor = (cursor + 1) % num_items;
        }
    };
    const bool streaming = num_items > rc.capacity;
    stream(streaming ? rc.capacity : num_items);

    const std::size_t batches_per_epoch = (num_items + tc.batch_size - 1) / tc.batch_size;
    const std::size_t total = batches_per_epoch * tc.epochs;
    std::size_t grad_step = 0;
    std::vector<CurvePoint> curve;
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            if (streaming) stream(std::min(tc.batch_size, rc.capacity));
            const std::size_t k = epoch * batches_per_epoch + b;
            const double frac = total > 1 ? static_cast<double>(k) / static_cast<double>(total - 1) : 1.0;
            const double beta = rc.beta_start + (rc.beta_end - rc.beta_start) * frac;
            const ReplaySample sample = replay.sample(tc.batch_size, beta, rng);
            std::vector<double> priorities;
            const double loss = step(sample, grad_step, priorities);
            grad_step += rc.grad_steps_per_batch;
            if (!std::isfinite(loss))
                throw DomainError("non-finite loss in stage '" + stage + "' at epoch " + std::to_string(epoch));
            for (std::size_t i = 0; i < sample.indices.size(); ++i)
                replay.set_priority(sample.indices[i], priorities[i] + priority_floor);
            loss_sum += loss;
        }
        curve.push_back({stage, epoch, loss_sum / static_cast<double>(batches_per_epoch)});
    }
    return curve;
}

} // namespace detail

/// Regression onto targets produced per batch by `targets_for(items, grad_step)`.
template <class TargetFn>
std::vector<CurvePoint> train_regression(nn::Mlp& net, const nn::Matrix& inputs,
                                         const std::vector<std::size_t>& item_rows, TargetFn&& targets_for,
                                         const ReplayConfig& rc, const TrainConfig& tc, const std::string& stage,
                                         std::uint64_t stream_seed) {
    std::mt19937_64 rng(stream_seed);
    nn::Optimizer opt(tc.optimizer, tc.learning_rate, net.num_params());
    return detail::replay_loop(item_rows.size(), rc, tc, stage, rng,
                               [&](const ReplaySample& s, std::size_t grad_step, std::vector<double>& prio) {
                                   std::vector<std::size_t> rows(s.items.size());
                                   for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = item_rows[s.items[i]];
                                   const nn::Matrix x = gather_columns(inputs, rows);
                                   const std::vector<double> y = targets_for(s.items, grad_step);
                                   double first_loss = 0.0;
                                   std::vector<double> before;
                                   for (std::size_t g = 0; g < rc.grad_steps_per_batch; ++g) {
                                       double loss = 0.0;
                                       const nn::Vector grad = net.regression_gradient(
                                           x, y, s.weights, &loss, g == 0 ? &before : nullptr);
                                       if (g == 0) first_loss = loss;
                                       opt.step(net.params(), grad);
                                   }
                                   prio.resize(y.size());
                                   for (std::size_t i = 0; i < y.size(); ++i) prio[i] = std::abs(y[i] - before[i]);
                                   return first_loss;
                               });
}

/// Cross-entropy onto fixed class labels; priorities are |y - E[value]| where
/// `centers` maps classes to scalar values.
inline std::vector<CurvePoint> train_categorical(nn::Mlp& net, const nn::Matrix& inputs,
                                                 const std::vector<std::size_t>& item_rows,
                                                 const std::vector<std::size_t>& classes,
                                                 const std::vector<double>& scalar_targets,
                                                 const std::vector<double>& centers, const ReplayConfig& rc,
                                                 const TrainConfig& tc, const std::string& stage,
                                                 std::uint64_t stream_seed) {
    std::mt19937_64 rng(stream_seed);
    nn::Optimizer opt(tc.optimizer, tc.learning_rate, net.num_params());
    return detail::replay_loop(item_rows.size(), rc, tc, stage, rng,
                               [&](const ReplaySample& s, std::size_t, std::vector<double>& prio) {
                                   std::vector<std::size_t> rows(s.items.size()), cls(s.items.size());
                                   for (std::size_t i = 0; i < rows.size(); ++i) {
                                       rows[i] = item_rows[s.items[i]];
                                       cls[i] = classes[s.items[i]];
                                   }
                                   const nn::Matrix x = gather_columns(inputs, rows);
                                   double first_loss = 0.0;
                                   nn::Matrix probs;
                                   for (std::size_t g = 0; g < rc.grad_steps_per_batch; ++g) {
                                       double loss = 0.0;
                                       const nn::Vector grad =
                                           net.categorical_gradient(x, cls, s.weights, &loss, g == 0 ? &probs : nullptr);
                                       if (g == 0) first_loss = loss;
                                       opt.step(net.params(), grad);
                                   }
                                   prio.resize(rows.size());
                                   for (std::size_t i = 0; i < rows.size(); ++i) {
                                       double v = 0.0;
                                       for (std::size_t b = 0; b < centers.size(); ++b)
                                           v += probs(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) * centers[b];
                                       prio[i] = std::abs(scalar_targets[s.items[i]] - v);
                                   }
                                   return first_loss;
                               });
}

} // namespace livope

#endif
