#ifndef LIVOPE_TEST_FIXTURES_HPP
#define LIVOPE_TEST_FIXTURES_HPP

#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "livope/dataset.hpp"

namespace fixtures {

using namespace livope;

// One-hot frame over `dim` slots, keyed by the hot slot.
inline Frame one_hot(std::size_t t, std::size_t slot, std::size_t dim, bool goal) {
    Frame f;
    f.index = t;
    f.features.assign(dim, 0.0);
    f.features[slot] = 1.0;
    f.goal = goal;
    f.state_key = "s" + std::to_string(slot);
    return f;
}

// Episode visiting `slots` in order; the goal flag is set on `goals`.
inline Episode path(const std::string& id, const std::vector<std::size_t>& slots, std::size_t dim,
                    const std::vector<std::size_t>& goals = {}) {
    Episode e;
    e.id = id;
    for (std::size_t t = 0; t < slots.size(); ++t) {
        bool g = false;
        for (auto x : goals) g = g || x == t;
        e.frames.push_back(one_hot(t, slots[t], dim, g));
    }
    e.outcome = derive_outcome(e);
    return e;
}

// Deterministic chain of `n` states ending in a goal, one-hot over n slots.
inline Dataset chain(std::size_t n, std::size_t copies = 1) {
    Dataset d;
    d.feature_dim = n;
    std::vector<std::size_t> slots(n);
    for (std::size_t i = 0; i < n; ++i) slots[i] = i;
    for (std::size_t c = 0; c < copies; ++c) d.episodes.push_back(path("chain" + std::to_string(c), slots, n, {n - 1}));
    return d;
}

inline Episode dense_episode(const std::string& id, std::size_t len, std::size_t dim, bool success, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Episode e;
    e.id = id;
    for (std::size_t t = 0; t < len; ++t) {
        Frame f;
        f.index = t;
        for (std::size_t k = 0; k < dim; ++k) f.features.push_back(n(rng));
        f.goal = success && t + 1 == len;
        e.frames.push_back(f);
    }
    e.outcome = success ? Outcome::success : Outcome::timed_out;
    return e;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("livope_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace fixtures

#endif
