#ifndef LIVOPE_SYNTHETIC_ENV_HPP
#define LIVOPE_SYNTHETIC_ENV_HPP

// Enumerable MDPs, the slip-grid task, rollouts, and the two exact oracles:
// expectation-form value iteration of the discounted operator and brute-force
// enumeration of the undiscounted liveness value.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "livope/dataset.hpp"
#include "livope/error.hpp"
#include "livope/liveness.hpp"

namespace livope {

struct Successor {
    std::size_t state;
    double prob;
};

/// Finite MDP with sparse transition rows P(.|s,a).
struct TabularMDP {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<std::vector<Successor>> rows; // indexed s * num_actions + a
    std::vector<char> goal;
    std::vector<std::string> labels;
    std::vector<double> initial; // start-state distribution used by rollouts

    const std::vector<Successor>& successors(std::size_t s, std::size_t a) const { return rows[s * num_actions + a]; }
    std::vector<Successor>& successors(std::size_t s, std::size_t a) { return rows[s * num_actions + a]; }

    double probability(std::size_t s, std::size_t a, std::size_t next) const {
        double p = 0.0;
        for (const auto& x : successors(s, a))
            if (x.state == next) p += x.prob;
        return p;
    }

    std::vector<double> sparse_targets() const {
        std::vector<double> l(num_states);
        for (std::size_t s = 0; s < num_states; ++s) l[s] = goal[s] ? -1.0 : 1.0;
        return l;
    }
};

struct PolicyMatrix {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<double> probs; // row-major pi(a|s)

    double operator()(std::size_t s, std::size_t a) const { return probs[s * num_actions + a]; }
    double& operator()(std::size_t s, std::size_t a) { return probs[s * num_actions + a]; }
};

inline void validate(const TabularMDP& m) {
    if (m.num_states == 0 || m.num_actions == 0) throw ConfigError("MDP needs states and actions");
    if (m.rows.size() != m.num_states * m.num_actions) throw ConfigError("MDP transition table has wrong size");
    if (m.goal.size() != m.num_states || m.labels.size() != m.num_states)
        throw ConfigError("MDP goal/label tables have wrong size");
    bool any_goal = false;
    for (char g : m.goal) any_goal = any_goal || g;
    if (!any_goal) throw ConfigError("MDP has no goal state");
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        double sum = 0.0;
        for (const auto& x : m.rows[i]) {
            if (x.state >= m.num_states || !(x.prob >= 0.0)) throw ConfigError("invalid transition entry");
            sum += x.prob;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("transition row does not sum to 1");
    }
    if (!m.initial.empty()) {
        if (m.initial.size() != m.num_states) throw ConfigError("initial distribution has wrong size");
        double sum = 0.0;
        for (double p : m.initial) sum += p;
        if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("initial distribution does not sum to 1");
    }
}

inline void validate(const PolicyMatrix& pol, const TabularMDP& m) {
    if (pol.num_states != m.num_states || pol.num_actions != m.num_actions ||
        pol.probs.size() != m.num_states * m.num_actions)
        throw ConfigError("policy shape does not match the MDP");
    for (std::size_t s = 0; s < pol.num_states; ++s) {
        double sum = 0.0;
        for (std::size_t a = 0; a < pol.num_actions; ++a) {
            if (!(pol(s, a) >= 0.0)) throw ConfigError("negative policy probability");
            sum += pol(s, a);
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("policy row does not sum to 1");
    }
}

// ---------------------------------------------------------------------------
// Slip grid: carry an object to the bottom-right cell. The object may slip out
// of the gripper on any carrying step and land on a uniformly random cell; the
// scripted policy then walks back to it and tries again.

struct SlipGridConfig {
    std::size_t grid_side = 4;
    double slip_prob = 0.2;
    std::size_t timeout = 25;
    std::uint64_t seed = 0;
    double feature_noise = 0.05;

    void validate() const {
        if (grid_side < 2) throw ConfigError("grid_side must be at least 2");
        if (!(slip_prob >= 0.0 && slip_prob <= 1.0)) throw ConfigError("slip_prob must lie in [0, 1]");
        if (timeout < 2 * grid_side) throw ConfigError("timeout must be at least 2 * grid_side");
        if (!(feature_noise >= 0.0)) throw ConfigError("feature_noise must be nonnegative");
    }
};

namespace slipgrid {

enum Action : std::size_t { up = 0, down, left, right, grasp, place, count };

struct Layout {
    std::size_t side;
    std::size_t cells() const { return side * side; }
    std::size_t carried() const { return cells(); } // object "cell" meaning in-gripper
    std::size_t target() const { return cells() - 1; }
    std::size_t num_states() const { return cells() * (cells() + 1) * 2; }

    std::size_t index(std::size_t agent, std::size_t object, bool placed) const {
        return ((placed ? 1 : 0) * (cells() + 1) + object) * cells() + agent;
    }
    std::size_t agent_of(std::size_t s) const { return s % cells(); }
    std::size_t object_of(std::size_t s) const { return (s / cells()) % (cells() + 1); }
    bool placed_of(std::size_t s) const { return s / (cells() * (cells() + 1)) == 1; }

    std::size_t move(std::size_t cell, std::size_t action) const {
        std::size_t r = cell / side, c = cell % side;
        if (action == up && r > 0) --r;
        if (action == down && r + 1 < side) ++r;
        if (action == left && c > 0) --c;
        if (action == right && c + 1 < side) ++c;
        return r * side + c;
    }

    std::size_t distance(std::size_t a, std::size_t b) const {
        auto d = [](std::size_t x, std::size_t y) { return x > y ? x - y : y - x; };
        return d(a / side, b / side) + d(a % side, b % side);
    }

    std::string label(std::size_t s) const {
        const std::size_t o = object_of(s);
        return "a" + std::to_string(agent_of(s)) + "_o" + (o == carried() ? std::string("C") : std::to_string(o)) +
               (placed_of(s) ? "_p1" : "_p0");
    }
};

} // namespace slipgrid

inline std::pair<TabularMDP, PolicyMatrix> build_slipgrid(const SlipGridConfig& cfg) {
    cfg.validate();
    using namespace slipgrid;
    const Layout g{cfg.grid_side};
    const std::size_t C = g.cells();
    TabularMDP m;
    m.num_states = g.num_states();
    m.num_actions = Action::count;
    m.rows.resize(m.num_states * m.num_actions);
    m.goal.assign(m.num_states, 0);
    m.labels.resize(m.num_states);
    m.initial.assign(m.num_states, 0.0);
    PolicyMatrix pol{m.num_states, m.num_actions, std::vector<double>(m.num_states * m.num_actions, 0.0)};

    for (std::size_t s = 0; s < m.num_states; ++s) {
        m.labels[s] = g.label(s);
        const std::size_t agent = g.agent_of(s), object = g.object_of(s);
        if (g.placed_of(s)) {
            m.goal[s] = 1;
            for (std::size_t a = 0; a < m.num_actions; ++a) {
                m.successors(s, a) = {{s, 1.0}};
                pol(s, a) = 1.0 / static_cast<double>(m.num_actions);
            }
            continue;
        }
        const bool carrying = object == g.carried();
        for (std::size_t a = 0; a < m.num_actions; ++a) {
            auto& row = m.successors(s, a);
            if (carrying) {
                std::size_t agent_next = agent, kept;
                if (a < grasp) {
                    agent_next = g.move(agent, a);
                    kept = g.index(agent_next, g.carried(), false);
                } else if (a == grasp) {
                    kept = s;
                } else {
                    kept = agent == g.target() ? g.index(agent, g.target(), true) : g.index(agent, agent, false);
                }
                if (cfg.slip_prob < 1.0) row.push_back({kept, 1.0 - cfg.slip_prob});
                if (cfg.slip_prob > 0.0)
                    for (std::size_t cell = 0; cell < C; ++cell)
                        row.push_back({g.index(agent_next, cell, false), cfg.slip_prob / static_cast<double>(C)});
            } else if (a < grasp) {
                row.push_back({g.index(g.move(agent, a), object, false), 1.0});
            } else if (a == grasp) {
                row.push_back({agent == object ? g.index(agent, g.carried(), false) : s, 1.0});
            } else {
                row.push_back({s, 1.0});
            }
        }
        // Scripted controller: walk along a random shortest path, grasp, carry, place.
        const std::size_t goal_cell = carrying ? g.target() : object;
        if (agent == goal_cell) {
            pol(s, carrying ? place : grasp) = 1.0;
        } else {
            std::vector<std::size_t> better;
            for (std::size_t a = 0; a < grasp; ++a)
                if (g.distance(g.move(agent, a), goal_cell) < g.distance(agent, goal_cell)) better.push_back(a);
            for (auto a : better) pol(s, a) = 1.0 / static_cast<double>(better.size());
        }
        if (!carrying && object != g.target()) m.initial[s] = 1.0;
    }
    double total = 0.0;
    for (double p : m.initial) total += p;
    for (double& p : m.initial) p /= total;
    validate(m);
    validate(pol, m);
    return {std::move(m), std::move(pol)};
}

namespace detail {

template <class Rng>
std::size_t sample_index(Rng& rng, const std::vector<double>& weights) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng), acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (x < acc) return i;
    }
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return 0;
}

template <class Rng>
std::size_t sample_successor(Rng& rng, const std::vector<Successor>& row) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng), acc = 0.0;
    for (const auto& s : row) {
        acc += s.prob;
        if (x < acc) return s.state;
    }
    for (auto it = row.rbegin(); it != row.rend(); ++it)
        if (it->prob > 0.0) return it->state;
    return row.front().state;
}

inline std::vector<double> initial_distribution(const TabularMDP& mdp) {
    if (!mdp.initial.empty()) return mdp.initial;
    std::vector<double> init(mdp.num_states, 0.0);
    std::size_t k = 0;
    for (std::size_t s = 0; s < mdp.num_states; ++s) k += mdp.goal[s] ? 0 : 1;
    for (std::size_t s = 0; s < mdp.num_states; ++s) init[s] = mdp.goal[s] ? 0.0 : 1.0 / static_cast<double>(k);
    return init;
}

} // namespace detail

/// Episode number `i` of the stream identified by `seed`; it stops at its
/// first goal state or after `timeout` frames.
inline Episode rollout_episode(const TabularMDP& mdp, const PolicyMatrix& pol, const std::vector<double>& init,
                               std::size_t i, std::size_t timeout, std::uint64_t seed, double feature_noise) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> action_probs(mdp.num_actions);
    Episode ep;
    ep.id = "ep" + std::to_string(i);
    std::size_t s = detail::sample_index(rng, init);
    for (std::size_t t = 0;; ++t) {
        Frame f;
        f.index = t;
        f.goal = mdp.goal[s] != 0;
        f.state_key = mdp.labels[s];
        f.features.assign(mdp.num_states, 0.0);
        f.features[s] = 1.0;
        if (feature_noise > 0.0)
            for (double& x : f.features) x += feature_noise * noise(rng);
        ep.frames.push_back(std::move(f));
        if (mdp.goal[s] || t + 1 >= timeout) break;
        for (std::size_t a = 0; a < mdp.num_actions; ++a) action_probs[a] = pol(s, a);
        const std::size_t a = detail::sample_index(rng, action_probs);
        s = detail::sample_successor(rng, mdp.successors(s, a));
    }
    ep.outcome = derive_outcome(ep);
    return ep;
}

/// Rolls out n episodes. Every episode draws from its own engine seeded with
/// (seed, episode index), so a prefix of a larger run equals a smaller run.
inline Dataset rollout_episodes(const TabularMDP& mdp, const PolicyMatrix& pol, std::size_t n, std::size_t timeout,
                                std::uint64_t seed, double feature_noise) {
    if (n == 0) throw ConfigError("rollout needs at least one episode");
    if (timeout == 0) throw ConfigError("timeout must be positive");
    const auto init = detail::initial_distribution(mdp);
    Dataset d;
    d.feature_dim = mdp.num_states;
    d.episodes.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        d.episodes.push_back(rollout_episode(mdp, pol, init, i, timeout, seed, feature_noise));
    return d;
}

/// Walks the episode stream in order, keeping the first `successes` successes
/// and the first `timeouts` time-outs. Gives up after `max_rollouts` episodes.
inline Dataset rollout_balanced(const TabularMDP& mdp, const PolicyMatrix& pol, std::size_t successes,
                                std::size_t timeouts, std::size_t timeout, std::uint64_t seed, double feature_noise,
                                std::size_t max_rollouts = 1000000) {
    if (successes + timeouts == 0) throw ConfigError("rollout needs at least one episode");
    if (timeout == 0) throw ConfigError("timeout must be positive");
    const auto init = detail::initial_distribution(mdp);
    Dataset d;
    d.feature_dim = mdp.num_states;
    std::size_t ns = 0, nt = 0;
    for (std::size_t i = 0; ns < successes || nt < timeouts; ++i) {
        if (i >= max_rollouts)
            throw ConfigError("could not collect the requested success/time-out mix within " +
                              std::to_string(max_rollouts) + " rollouts");
        Episode ep = rollout_episode(mdp, pol, init, i, timeout, seed, feature_noise);
        std::size_t& have = ep.succeeded() ? ns : nt;
        if (have < (ep.succeeded() ? successes : timeouts)) {
            ++have;
            d.episodes.push_back(std::move(ep));
        }
    }
    return d;
}

struct ValueIterationResult {
    std::vector<double> values;
    std::size_t iterations = 0;
};

/// Expectation-form fixed point V = (1-gamma) + gamma E[min{l(s), V(s')}],
/// goal states pinned to -1, iterated from V = 1 until the sup-norm change is
/// below tol. `targets` defaults to the sparse target.
inline ValueIterationResult exact_value_iteration(const TabularMDP& mdp, const PolicyMatrix& pol, const Discount& cfg,
                                                  double tol, std::span<const double> targets = {}) {
    if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
    const auto sparse = mdp.sparse_targets();
    if (targets.empty()) targets = sparse;
    const double g = cfg.gamma();

    // Policy-marginal transition lists.
    std::vector<std::vector<Successor>> flow(mdp.num_states);
    for (std::size_t s = 0; s < mdp.num_states; ++s)
        for (std::size_t a = 0; a < mdp.num_actions; ++a)
            if (pol(s, a) > 0.0)
                for (const auto& x : mdp.successors(s, a)) flow[s].push_back({x.state, pol(s, a) * x.prob});

    ValueIterationResult r;
    r.values.assign(mdp.num_states, 1.0);
    std::vector<double> next(mdp.num_states);
    for (;;) {
        double change = 0.0;
        for (std::size_t s = 0; s < mdp.num_states; ++s) {
            if (mdp.goal[s]) {
                next[s] = -1.0;
            } else {
                double e = 0.0;
                for (const auto& x : flow[s]) e += x.prob * std::min(targets[s], r.values[x.state]);
                next[s] = (1.0 - g) + g * e;
            }
            change = std::max(change, std::abs(next[s] - r.values[s]));
        }
        r.values.swap(next);
        ++r.iterations;
        if (change < tol) return r;
    }
}

struct BruteForceResult {
    double value = 0.0;   // E[min_{k=0..h} l(s_k)]
    double sigma_y = 0.0; // E_{a0,s1}[ std(min_{k=1..h} l(s_k) | a0, s1) ]
};

namespace detail {

struct Moments {
    double p = 0.0, y = 0.0, y2 = 0.0, clipped = 0.0; // mass, E[Y], E[Y^2], E[min(l0, Y)] (unnormalized)
};

inline void enumerate_paths(const TabularMDP& mdp, const PolicyMatrix& pol, std::span<const double> l, std::size_t s,
                            std::size_t steps_left, double prob, double running_min, double l0, Moments& acc) {
    if (steps_left == 0) {
        acc.p += prob;
        acc.y += prob * running_min;
        acc.y2 += prob * running_min * running_min;
        acc.clipped += prob * std::min(l0, running_min);
        return;
    }
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
        const double pa = pol(s, a);
        if (pa == 0.0) continue;
        for (const auto& x : mdp.successors(s, a)) {
            if (x.prob == 0.0) continue;
            enumerate_paths(mdp, pol, l, x.state, steps_left - 1, prob * pa * x.prob,
                            std::min(running_min, l[x.state]), l0, acc);
        }
    }
}

} // namespace detail

/// Enumerates every trajectory of `horizon` steps from s0. Throws when
/// (num_states * num_actions)^horizon exceeds 1e7.
inline BruteForceResult brute_force_liveness(const TabularMDP& mdp, const PolicyMatrix& pol, std::size_t s0,
                                             std::size_t horizon, std::span<const double> targets = {}) {
    if (horizon == 0) throw ConfigError("horizon must be positive");
    if (s0 >= mdp.num_states) throw ConfigError("start state out of range");
    const double leaves = std::pow(static_cast<double>(mdp.num_states * mdp.num_actions), static_cast<double>(horizon));
    if (leaves > 1e7) throw ConfigError("enumeration guard exceeded: too many trajectories");
    const auto sparse = mdp.sparse_targets();
    if (targets.empty()) targets = sparse;

    const double l0 = targets[s0];
    BruteForceResult r;
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
        const double pa = pol(s0, a);
        if (pa == 0.0) continue;
        for (const auto& x : mdp.successors(s0, a)) {
            if (x.prob == 0.0) continue;
            detail::Moments m;
            detail::enumerate_paths(mdp, pol, targets, x.state, horizon - 1, 1.0, targets[x.state], l0, m);
            const double w = pa * x.prob;
            const double mean = m.y / m.p;
            const double var = std::max(0.0, m.y2 / m.p - mean * mean);
            r.value += w * (m.clipped / m.p);
            r.sigma_y += w * std::sqrt(var);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Sidecar JSON so oracles can be replayed against a generated dataset.

inline nlohmann::json mdp_to_json(const TabularMDP& m, const PolicyMatrix& pol) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : m.rows) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& x : row) r.push_back({x.state, x.prob});
        rows.push_back(std::move(r));
    }
    std::vector<int> goal(m.goal.begin(), m.goal.end());
    return {{"num_states", m.num_states}, {"num_actions", m.num_actions}, {"transitions", rows},
            {"goal", goal},               {"labels", m.labels},           {"initial", m.initial},
            {"policy", pol.probs}};
}

inline std::pair<TabularMDP, PolicyMatrix> mdp_from_json(const nlohmann::json& j) {
    TabularMDP m;
    PolicyMatrix pol;
    try {
        m.num_states = j.at("num_states").get<std::size_t>();
        m.num_actions = j.at("num_actions").get<std::size_t>();
        for (const auto& r : j.at("transitions")) {
            std::vector<Successor> row;
            for (const auto& x : r) row.push_back({x.at(0).get<std::size_t>(), x.at(1).get<double>()});
            m.rows.push_back(std::move(row));
        }
        for (int g : j.at("goal").get<std::vector<int>>()) m.goal.push_back(static_cast<char>(g != 0));
        m.labels = j.at("labels").get<std::vector<std::string>>();
        m.initial = j.at("initial").get<std::vector<double>>();
        pol.num_states = m.num_states;
        pol.num_actions = m.num_actions;
        pol.probs = j.at("policy").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed MDP sidecar: ") + e.what());
    }
    validate(m);
    validate(pol, m);
    return {std::move(m), std::move(pol)};
}

} // namespace livope

#endif
