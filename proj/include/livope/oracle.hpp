#ifndef LIVOPE_ORACLE_HPP
#define LIVOPE_ORACLE_HPP

// Executable checks of the operator's theory on small fixtures. Each check
// returns a pass flag plus the measured margin so reports can show how close
// a property came to failing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "livope/bootstrap.hpp"
#include "livope/dataset.hpp"
#include "livope/liveness.hpp"
#include "livope/synthetic_env.hpp"

namespace livope::oracle {

struct CheckResult {
    std::string name;
    bool passed = false;
    double margin = 0.0;
    std::string detail;
};

// ---------------------------------------------------------------------------
// Closed form on a goal-terminated chain.

/// Chain of `frames` frames whose last frame is the only goal.
inline Episode goal_chain(std::size_t frames, const std::string& prefix = "c") {
    Episode e;
    e.id = prefix;
    for (std::size_t t = 0; t < frames; ++t)
        e.frames.push_back({t, {}, t + 1 == frames, prefix + std::to_string(t)});
    e.outcome = Outcome::success;
    return e;
}

inline CheckResult check_closed_form(const Discount& gamma, std::size_t frames = 10, double tol = 1e-12) {
    const Episode e = goal_chain(frames);
    const auto v = backward_episode_values(e, gamma);
    double err = 0.0;
    for (std::size_t t = 0; t < frames; ++t)
        err = std::max(err, std::abs(v[t] - value_from_steps(static_cast<double>(frames - 1 - t), gamma)));
    return {"closed_form", err <= tol, err,
            std::to_string(frames) + "-frame chain, max |V - (1 - 2 gamma^k)| vs tol " + detail::format_double(tol)};
}

// ---------------------------------------------------------------------------
// Contraction in the sup norm.

using Rational = boost::multiprecision::cpp_rational;

struct TransitionSet {
    std::vector<std::vector<Successor>> rows; // policy-marginal P(s'|s)
    std::vector<double> targets;              // l(s) in [-1, 1]
    std::vector<char> goal;
};

/// Random sparse transition rows with dyadic probabilities (multiples of 1/64)
/// and dyadic targets, so every quantity converts to a rational exactly.
template <class Rng>
TransitionSet random_transition_set(std::size_t states, Rng& rng) {
    TransitionSet t;
    t.rows.resize(states);
    t.targets.resize(states);
    t.goal.assign(states, 0);
    std::uniform_int_distribution<std::size_t> pick(0, states - 1), fanout(1, 4);
    std::uniform_int_distribution<int> quarter(-4, 4);
    for (std::size_t s = 0; s < states; ++s) {
        const std::size_t k = fanout(rng);
        std::vector<int> units(k, 1);
        for (int rest = 64 - static_cast<int>(k); rest > 0; --rest) ++units[pick(rng) % k];
        for (std::size_t i = 0; i < k; ++i) t.rows[s].push_back({pick(rng), units[i] / 64.0});
        t.goal[s] = pick(rng) < states / 10 ? 1 : 0;
        t.targets[s] = t.goal[s] ? -1.0 : quarter(rng) / 4.0;
    }
    return t;
}

/// (T V)(s) = (1 - gamma) + gamma * sum_s' P(s'|s) min{l(s), V(s')}, goals pinned to -1.
template <class Real>
std::vector<Real> apply_operator(const TransitionSet& t, const std::vector<Real>& v, const Real& gamma) {
    std::vector<Real> out(t.rows.size());
    for (std::size_t s = 0; s < t.rows.size(); ++s) {
        if (t.goal[s]) {
            out[s] = Real(-1);
            continue;
        }
        Real e(0);
        const Real l(t.targets[s]);
        for (const auto& x : t.rows[s]) {
            const Real& vn = v[x.state];
            e += Real(x.prob) * (l < vn ? l : vn);
        }
        out[s] = (Real(1) - gamma) + gamma * e;
    }
    return out;
}

template <class Real>
Real sup_distance(const std::vector<Real>& a, const std::vector<Real>& b) {
    Real d(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        Real x = a[i] - b[i];
        if (x < Real(0)) x = -x;
        if (d < x) d = x;
    }
    return d;
}

/// Exact check ||T V1 - T V2|| <= gamma ||V1 - V2|| in rational arithmetic.
/// The margin is the smallest slack gamma*d - d' observed (in double).
inline CheckResult check_contraction(const std::vector<double>& gammas, std::size_t pairs = 1000,
                                     std::size_t states = 50, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> value(-1024, 1024);
    std::size_t violations = 0, checked = 0;
    double min_slack = INFINITY;
    for (double g : gammas) {
        const Discount cfg(g);
        const Rational gr(g);
        for (std::size_t p = 0; p < pairs; ++p) {
            const TransitionSet t = random_transition_set(states, rng);
            std::vector<Rational> v1(states), v2(states);
            for (std::size_t s = 0; s < states; ++s) {
                v1[s] = Rational(value(rng), 1024);
                v2[s] = Rational(value(rng), 1024);
            }
            const Rational d = sup_distance(v1, v2);
            const Rational dt = sup_distance(apply_operator(t, v1, gr), apply_operator(t, v2, gr));
            ++checked;
            if (dt > gr * d) ++violations;
            min_slack = std::min(min_slack, static_cast<double>(gr * d - dt));
        }
    }
    return {"contraction", violations == 0, min_slack,
            std::to_string(violations) + " violations in " + std::to_string(checked) + " exact pair checks"};
}

// ---------------------------------------------------------------------------
// One-step bound: inequality against the one-step expectation, gap bounded by sigma_Y.

/// Random MDP with probabilities and policy entries in multiples of 1/16, so
/// that path probabilities over short horizons are exact in double.
template <class Rng>
std::pair<TabularMDP, PolicyMatrix> random_dyadic_mdp(std::size_t states, std::size_t actions, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, states - 1);
    auto split16 = [&](std::size_t k) {
        std::vector<int> u(k, 1);
        for (int rest = 16 - static_cast<int>(k); rest > 0; --rest) ++u[pick(rng) % k];
        return u;
    };
    TabularMDP m;
    m.num_states = states;
    m.num_actions = actions;
    m.rows.resize(states * actions);
    m.goal.assign(states, 0);
    m.goal[pick(rng)] = 1;
    for (std::size_t s = 0; s < states; ++s)
        if (pick(rng) == 0) m.goal[s] = 1;
    for (std::size_t s = 0; s < states; ++s) {
        m.labels.push_back("s" + std::to_string(s));
        for (std::size_t a = 0; a < actions; ++a) {
            const std::size_t k = 1 + pick(rng) % 3;
            const auto u = split16(k);
            std::map<std::size_t, double> row;
            for (std::size_t i = 0; i < k; ++i) row[pick(rng)] += u[i] / 16.0;
            for (const auto& [n, p] : row) m.rows[s * actions + a].push_back({n, p});
        }
    }
    PolicyMatrix pol{states, actions, std::vector<double>(states * actions)};
    for (std::size_t s = 0; s < states; ++s) {
        const int first = 1 + static_cast<int>(pick(rng) % 15);
        pol(s, 0) = first / 16.0;
        for (std::size_t a = 1; a < actions; ++a) pol(s, a) = a + 1 == actions ? 1.0 - first / 16.0 : 0.0;
    }
    validate(m);
    validate(pol, m);
    return {std::move(m), std::move(pol)};
}

struct OneStepMargins {
    std::size_t checked = 0;
    std::size_t inequality_violations = 0;
    std::size_t gap_violations = 0;
    double min_inequality_slack = INFINITY; // min of RHS - V
    double min_gap_slack = INFINITY;        // min of sigma_Y - |gap|
};

inline void one_step_bound_on(const TabularMDP& m, const PolicyMatrix& pol, std::size_t horizon, OneStepMargins& out) {
    const auto l = m.sparse_targets();
    for (std::size_t s = 0; s < m.num_states; ++s) {
        const BruteForceResult lhs = brute_force_liveness(m, pol, s, horizon);
        double rhs = 0.0;
        for (std::size_t a = 0; a < m.num_actions; ++a) {
            if (pol(s, a) == 0.0) continue;
            for (const auto& x : m.successors(s, a)) {
                const double vn = horizon > 1 ? brute_force_liveness(m, pol, x.state, horizon - 1).value : l[x.state];
                rhs += pol(s, a) * x.prob * std::min(l[s], vn);
            }
        }
        ++out.checked;
        if (lhs.value > rhs) ++out.inequality_violations;
        const double gap = std::abs(lhs.value - rhs);
        if (gap > lhs.sigma_y) ++out.gap_violations;
        out.min_inequality_slack = std::min(out.min_inequality_slack, rhs - lhs.value);
        out.min_gap_slack = std::min(out.min_gap_slack, lhs.sigma_y - gap);
    }
}

inline CheckResult check_one_step_bound(std::size_t num_mdps = 20, std::size_t horizon = 6, std::uint64_t seed = 11) {
    std::mt19937_64 rng(seed);
    OneStepMargins m;
    for (std::size_t i = 0; i < num_mdps; ++i) {
        const auto [mdp, pol] = random_dyadic_mdp(5, 2, rng);
        one_step_bound_on(mdp, pol, horizon, m);
    }
    const bool ok = m.inequality_violations == 0 && m.gap_violations == 0;
    return {"one_step_inequality_and_gap", ok, std::min(m.min_inequality_slack, m.min_gap_slack),
            std::to_string(m.inequality_violations) + " inequality and " + std::to_string(m.gap_violations) +
                " gap violations over " + std::to_string(m.checked) + " states"};
}

// ---------------------------------------------------------------------------
// The three-episode bootstrap fixture.

inline Dataset three_episode_fixture() {
    Dataset d;
    d.feature_dim = 0;
    auto make = [](const std::string& id, std::vector<std::string> keys, std::size_t goal_at, Outcome o) {
        Episode e;
        e.id = id;
        for (std::size_t t = 0; t < keys.size(); ++t) e.frames.push_back({t, {}, t == goal_at, keys[t]});
        e.outcome = o;
        return e;
    };
    const std::size_t none = static_cast<std::size_t>(-1);
    d.episodes.push_back(make("episode1", {"s1_1", "s1_2", "s1_3", "s1_4", "s1_5", "s1_6"}, 5, Outcome::success));
    d.episodes.push_back(make("episode2", {"s2_1", "s2_2", "s1_4", "s2_4", "s2_5", "s2_6"}, none, Outcome::timed_out));
    d.episodes.push_back(make("episode3", {"s3_1", "s3_2", "s3_3", "s3_4", "s3_5", "s3_6"}, none, Outcome::timed_out));
    return d;
}

inline CheckResult check_three_episode(double tol = 1e-12) {
    const Discount half(0.5);
    const auto r = two_stage_evaluate(three_episode_fixture(), half);
    const std::vector<double> ep2{0.9375, 0.875, 0.75, 1.0, 1.0, 1.0};
    double err = 0.0;
    const auto& t2 = r.traces.at("episode2");
    const auto& t3 = r.traces.at("episode3");
    for (std::size_t i = 0; i < 6; ++i) {
        err = std::max(err, std::abs(t2[i] - ep2[i]));
        err = std::max(err, std::abs(t3[i] - 1.0));
    }
    bool mechanism = true;
    for (std::size_t i = 0; i < 3; ++i) mechanism = mechanism && t2[i] < 1.0;
    for (double v : t3) mechanism = mechanism && v == 1.0;
    return {"three_episode_fixture", err <= tol && mechanism, err,
            mechanism ? "episode 2 corrected through the shared state, episode 3 isolated"
                      : "bootstrap mechanism not reproduced"};
}

// ---------------------------------------------------------------------------
// Anchor codomain.

inline CheckResult check_anchor_codomain(const AnchorTable& anchors) {
    const auto bad = anchor_codomain_violations(anchors);
    double slack = INFINITY; // distance to the nearest bound; negative when violated
    for (const auto& [k, v] : anchors.entries) slack = std::min({slack, 1.0 - v, v + 1.0});
    std::string detail = std::to_string(bad.size()) + " of " + std::to_string(anchors.size()) + " anchors outside [-1, 1)";
    if (!bad.empty()) detail += ", first offending key '" + bad.front() + "'";
    return {"anchor_codomain", bad.empty(), slack, detail};
}

// ---------------------------------------------------------------------------
// Tabular two-stage estimates against exact value iteration.

/// Mean of two-stage trace values per state key.
inline std::map<std::string, double> per_state_estimates(const Dataset& d, const Discount& gamma) {
    const auto r = two_stage_evaluate(d, gamma);
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& e : d.episodes) {
        const auto& tr = r.traces.at(e.id);
        for (std::size_t t = 0; t < tr.size(); ++t) {
            auto& a = acc[*e.frames[t].state_key];
            a.first += tr[t];
            ++a.second;
        }
    }
    std::map<std::string, double> out;
    for (const auto& [k, a] : acc) out[k] = a.first / static_cast<double>(a.second);
    return out;
}

struct ConsistencyConfig {
    SlipGridConfig grid{4, 0.2, 12, 0, 0.0};
    double gamma = 0.993;
    std::vector<std::size_t> sizes{100, 1000, 10000};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

/// Mean absolute error per dataset size, measured on the non-goal states
/// visited by the smallest dataset. Datasets of one seed are nested.
inline std::vector<double> consistency_errors(const TabularMDP& mdp, const PolicyMatrix& pol,
                                              const ConsistencyConfig& cfg, std::uint64_t seed) {
    const Discount gamma(cfg.gamma);
    const auto exact = exact_value_iteration(mdp, pol, gamma, 1e-12).values;
    std::map<std::string, std::size_t> index;
    for (std::size_t s = 0; s < mdp.num_states; ++s) index[mdp.labels[s]] = s;
    const std::size_t largest = *std::max_element(cfg.sizes.begin(), cfg.sizes.end());
    const Dataset all = rollout_episodes(mdp, pol, largest, cfg.grid.timeout, seed, 0.0);
    std::vector<std::string> eval_keys;
    std::vector<double> errors;
    for (std::size_t n : cfg.sizes) {
        Dataset d;
        d.feature_dim = all.feature_dim;
        d.episodes.assign(all.episodes.begin(), all.episodes.begin() + static_cast<std::ptrdiff_t>(n));
        const auto est = per_state_estimates(d, gamma);
        if (eval_keys.empty())
            for (const auto& [k, v] : est)
                if (!mdp.goal[index.at(k)]) eval_keys.push_back(k);
        double err = 0.0;
        for (const auto& k : eval_keys) err += std::abs(est.at(k) - exact[index.at(k)]);
        errors.push_back(err / static_cast<double>(eval_keys.size()));
    }
    return errors;
}

inline CheckResult check_consistency(const ConsistencyConfig& cfg = {}) {
    const auto [mdp, pol] = build_slipgrid(cfg.grid);
    std::size_t monotone = 0;
    double min_drop = INFINITY;
    std::string detail;
    for (auto seed : cfg.seeds) {
        const auto e = consistency_errors(mdp, pol, cfg, seed);
        bool ok = true;
        for (std::size_t i = 1; i < e.size(); ++i) {
            ok = ok && e[i] < e[i - 1];
            min_drop = std::min(min_drop, e[i - 1] - e[i]);
        }
        monotone += ok ? 1 : 0;
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ":";
        for (double x : e) {
            char buf[32];
            std::snprintf(buf, sizeof buf, " %.5f", x);
            detail += buf;
        }
    }
    return {"oracle_consistency", monotone == cfg.seeds.size(), min_drop,
            std::to_string(monotone) + "/" + std::to_string(cfg.seeds.size()) + " seeds strictly decreasing (" +
                detail + ")"};
}

} // namespace livope::oracle

#endif
