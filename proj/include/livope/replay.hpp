#ifndef LIVOPE_REPLAY_HPP
#define LIVOPE_REPLAY_HPP

// Prioritized experience replay over a fixed-capacity ring buffer. Item i is
// drawn with probability p_i^alpha / sum_j p_j^alpha via a sum tree; the
// importance weights (N P(i))^-beta are divided by the batch maximum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "livope/error.hpp"

namespace livope {

struct ReplayConfig {
    std::size_t capacity = 10000;
    double alpha = 0.6;
    double beta_start = 0.4;
    double beta_end = 1.0;
    std::size_t grad_steps_per_batch = 2;

    void validate() const {
        if (capacity == 0) throw ConfigError("replay capacity must be positive");
        if (!(alpha >= 0.0)) throw ConfigError("priority exponent alpha must be nonnegative");
        if (!(beta_start >= 0.0 && beta_start <= beta_end && beta_end <= 1.0))
            throw ConfigError("need 0 <= beta_start <= beta_end <= 1");
        if (grad_steps_per_batch == 0) throw ConfigError("grad_steps_per_batch must be positive");
    }
};

class SumTree {
public:
    explicit SumTree(std::size_t capacity) {
        leaves_ = 1;
        while (leaves_ < capacity) leaves_ <<= 1;
        nodes_.assign(2 * leaves_, 0.0);
    }

    void set(std::size_t i, double value) {
        std::size_t n = i + leaves_;
        nodes_[n] = value;
        for (n >>= 1; n >= 1; n >>= 1) nodes_[n] = nodes_[2 * n] + nodes_[2 * n + 1];
    }

    double get(std::size_t i) const { return nodes_[i + leaves_]; }
    double total() const { return nodes_[1]; }

    /// Leaf whose cumulative range contains mass in [0, total).
    std::size_t find(double mass) const {
        std::size_t n = 1;
        while (n < leaves_) {
            const double left = nodes_[2 * n];
            if (mass < left || nodes_[2 * n + 1] <= 0.0) {
                n = 2 * n;
            } else {
                mass -= left;
                n = 2 * n + 1;
            }
        }
        return n - leaves_;
    }

private:
    std::size_t leaves_;
    std::vector<double> nodes_;
};

struct ReplaySample {
    std::vector<std::size_t> indices; // buffer slots
    std::vector<std::size_t> items;   // stored payloads
    std::vector<double> weights;      // max-normalized importance weights
};

/// Stores item ids (indices into the caller's transition table).
class PrioritizedReplay {
public:
    PrioritizedReplay(std::size_t capacity, double alpha) : capacity_(capacity), alpha_(alpha), tree_(capacity) {
        if (capacity == 0) throw ConfigError("replay capacity must be positive");
        if (!(alpha >= 0.0)) throw ConfigError("priority exponent alpha must be nonnegative");
        items_.reserve(capacity);
    }

    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool empty() const noexcept { return items_.empty(); }

    /// Inserts with the current maximum priority, overwriting the oldest slot when full.
    void add(std::size_t item) {
        const std::size_t slot = next_;
        if (items_.size() < capacity_)
            items_.push_back(item);
        else
            items_[slot] = item;
        next_ = (next_ + 1) % capacity_;
        set_priority(slot, max_priority_);
    }

    void set_priority(std::size_t slot, double priority) {
        if (!(priority > 0.0) || !std::isfinite(priority)) throw DomainError("priority must be positive and finite");
        max_priority_ = std::max(max_priority_, priority);
        tree_.set(slot, std::pow(priority, alpha_));
    }

    /// Probability of drawing the given slot.
    double probability(std::size_t slot) const { return tree_.get(slot) / tree_.total(); }

    template <class Rng>
    ReplaySample sample(std::size_t batch_size, double beta, Rng& rng) const {
        if (items_.empty()) throw DomainError("cannot sample from an empty replay buffer");
        std::uniform_real_distribution<double> u(0.0, 1.0);
        ReplaySample out;
        out.indices.reserve(batch_size);
        const double total = tree_.total();
        const auto n = static_cast<double>(items_.size());
        double max_w = 0.0;
        for (std::size_t k = 0; k < batch_size; ++k) {
            std::size_t slot = tree_.find(u(rng) * total);
            if (slot >= items_.size()) slot = items_.size() - 1;
            const double w = std::pow(n * tree_.get(slot) / total, -beta);
            out.indices.push_back(slot);
            out.items.push_back(items_[slot]);
            out.weights.push_back(w);
            max_w = std::max(max_w, w);
        }
        for (double& w : out.weights) w /= max_w;
        return out;
    }

private:
    std::size_t capacity_;
    double alpha_;
    SumTree tree_;
    std::vector<std::size_t> items_;
    std::size_t next_ = 0;
    double max_priority_ = 1.0;
};

} // namespace livope

#endif
