#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "livope/oracle.hpp"
#include "livope/synthetic_env.hpp"

using namespace livope;

namespace {

// States 0..n-1 in a line, single action moving right; state n-1 is the goal.
std::pair<TabularMDP, PolicyMatrix> line_mdp(std::size_t n) {
    TabularMDP m;
    m.num_states = n;
    m.num_actions = 1;
    m.goal.assign(n, 0);
    m.goal[n - 1] = 1;
    for (std::size_t s = 0; s < n; ++s) {
        m.rows.push_back({{std::min(s + 1, n - 1), 1.0}});
        m.labels.push_back("s" + std::to_string(s));
    }
    return {m, PolicyMatrix{n, 1, std::vector<double>(n, 1.0)}};
}

// s0 -> goal (state 1) with probability p, else absorbing non-goal state 2.
std::pair<TabularMDP, PolicyMatrix> fork_mdp(double p) {
    TabularMDP m;
    m.num_states = 3;
    m.num_actions = 1;
    m.goal = {0, 1, 0};
    m.labels = {"s0", "goal", "sink"};
    m.rows = {{{1, p}, {2, 1.0 - p}}, {{1, 1.0}}, {{2, 1.0}}};
    return {m, PolicyMatrix{3, 1, {1.0, 1.0, 1.0}}};
}

std::string dump(const Dataset& d) {
    std::ostringstream out;
    write_dataset(out, d);
    return out.str();
}

} // namespace

TEST(SlipGrid, RowsAreStochastic) {
    for (double slip : {0.0, 0.2, 1.0}) {
        const auto [m, pol] = build_slipgrid({3, slip, 20, 0, 0.0});
        for (const auto& row : m.rows) {
            double s = 0.0;
            for (const auto& x : row) s += x.prob;
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
        for (std::size_t s = 0; s < m.num_states; ++s) {
            double t = 0.0;
            for (std::size_t a = 0; a < m.num_actions; ++a) t += pol(s, a);
            EXPECT_NEAR(t, 1.0, 1e-12);
        }
    }
}

TEST(SlipGrid, NoSlipAlwaysSucceeds) {
    const auto [m, pol] = build_slipgrid({2, 0.0, 20, 0, 0.0});
    const auto d = rollout_episodes(m, pol, 200, 20, 3, 0.0);
    EXPECT_EQ(d.count(Outcome::success), 200u);
}

TEST(SlipGrid, CertainSlipNeverSucceeds) {
    const auto [m, pol] = build_slipgrid({3, 1.0, 60, 0, 0.0});
    const auto d = rollout_episodes(m, pol, 300, 60, 4, 0.0);
    EXPECT_EQ(d.count(Outcome::success), 0u);
}

TEST(SlipGrid, ConfigValidation) {
    EXPECT_THROW(build_slipgrid({1, 0.2, 25, 0, 0.0}), ConfigError);
    EXPECT_THROW(build_slipgrid({4, 1.2, 25, 0, 0.0}), ConfigError);
    EXPECT_THROW(build_slipgrid({4, 0.2, 7, 0, 0.0}), ConfigError);
    EXPECT_THROW(build_slipgrid({4, 0.2, 25, 0, -1.0}), ConfigError);
}

TEST(Rollout, SameSeedIsByteIdentical) {
    const auto [m, pol] = build_slipgrid({4, 0.2, 25, 0, 0.05});
    EXPECT_EQ(dump(rollout_episodes(m, pol, 50, 25, 9, 0.05)), dump(rollout_episodes(m, pol, 50, 25, 9, 0.05)));
    EXPECT_NE(dump(rollout_episodes(m, pol, 50, 25, 9, 0.05)), dump(rollout_episodes(m, pol, 50, 25, 10, 0.05)));
}

TEST(Rollout, LengthsBoundedAndDatasetValid) {
    const auto [m, pol] = build_slipgrid({4, 0.3, 16, 0, 0.1});
    const auto d = rollout_episodes(m, pol, 300, 16, 1, 0.1);
    EXPECT_NO_THROW(validate(d, 16));
    for (const auto& e : d.episodes) EXPECT_LE(e.length(), 16u);
    EXPECT_GT(d.count(Outcome::success), 0u);
    EXPECT_GT(d.count(Outcome::timed_out), 0u);
}

TEST(Rollout, PrefixProperty) {
    const auto [m, pol] = build_slipgrid({3, 0.2, 20, 0, 0.0});
    const auto big = rollout_episodes(m, pol, 40, 20, 5, 0.0);
    const auto small = rollout_episodes(m, pol, 10, 20, 5, 0.0);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(big.episodes[i], small.episodes[i]);
}

TEST(Rollout, BalancedCounts) {
    const auto [m, pol] = build_slipgrid({3, 0.3, 20, 0, 0.0});
    const auto d = rollout_balanced(m, pol, 30, 20, 20, 2, 0.0);
    EXPECT_EQ(d.count(Outcome::success), 30u);
    EXPECT_EQ(d.count(Outcome::timed_out), 20u);
    const auto [m2, pol2] = build_slipgrid({3, 0.0, 20, 0, 0.0});
    EXPECT_THROW(rollout_balanced(m2, pol2, 1, 1, 20, 2, 0.0, 500), ConfigError);
}

TEST(ValueIteration, AbsorbingNonGoalIsOne) {
    const auto [m, pol] = fork_mdp(0.25);
    EXPECT_NEAR(exact_value_iteration(m, pol, Discount(0.9), 1e-12).values[2], 1.0, 1e-12);
}

TEST(ValueIteration, ChainMatchesClosedForm) {
    const auto [m, pol] = line_mdp(12);
    for (double g : {0.5, 0.9, 0.993}) {
        const auto v = exact_value_iteration(m, pol, Discount(g), 1e-13).values;
        for (std::size_t s = 0; s < 12; ++s)
            EXPECT_NEAR(v[s], 1.0 - 2.0 * std::pow(g, static_cast<double>(11 - s)), 1e-11);
    }
}

TEST(ValueIteration, IterationCountWithinGeometricBound) {
    std::mt19937_64 rng(3);
    for (double g : {0.5, 0.9, 0.99})
        for (double tol : {1e-4, 1e-8, 1e-12}) {
            const auto [m, pol] = oracle::random_dyadic_mdp(6, 2, rng);
            const auto r = exact_value_iteration(m, pol, Discount(g), tol);
            EXPECT_LE(static_cast<double>(r.iterations), std::ceil(std::log(tol / 2.0) / std::log(g)) + 1.0);
        }
}

TEST(ValueIteration, ConservativeAgainstUndiscountedReachValue) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto [m, pol] = oracle::random_dyadic_mdp(5, 2, rng);
        // Undiscounted liveness value 1 - 2 P(reach goal), by iterating the reach probability.
        std::vector<double> reach(m.num_states, 0.0);
        for (int it = 0; it < 20000; ++it)
            for (std::size_t s = 0; s < m.num_states; ++s) {
                if (m.goal[s]) {
                    reach[s] = 1.0;
                    continue;
                }
                double p = 0.0;
                for (std::size_t a = 0; a < m.num_actions; ++a)
                    for (const auto& x : m.successors(s, a)) p += pol(s, a) * x.prob * reach[x.state];
                reach[s] = p;
            }
        const auto v = exact_value_iteration(m, pol, Discount(0.9), 1e-12).values;
        for (std::size_t s = 0; s < m.num_states; ++s) EXPECT_GE(v[s], 1.0 - 2.0 * reach[s] - 1e-10);
    }
}

TEST(BruteForce, DeterministicChain) {
    const auto [m, pol] = line_mdp(5);
    const auto near = brute_force_liveness(m, pol, 0, 6);
    EXPECT_EQ(near.value, -1.0);
    EXPECT_EQ(near.sigma_y, 0.0);
    const auto far = brute_force_liveness(m, pol, 0, 3);
    EXPECT_EQ(far.value, 1.0);
    EXPECT_EQ(far.sigma_y, 0.0);
}

TEST(BruteForce, TwoOutcomeFork) {
    for (double p : {0.0, 0.125, 0.25, 0.75, 1.0}) {
        const auto [m, pol] = fork_mdp(p);
        EXPECT_NEAR(brute_force_liveness(m, pol, 0, 4).value, 1.0 - 2.0 * p, 1e-15);
    }
    const auto [m, pol] = fork_mdp(0.5);
    const auto r = brute_force_liveness(m, pol, 0, 4);
    EXPECT_EQ(r.value, 0.0);
    // Y is constant given s1, so the conditional spread is zero; the spread of Y
    // before conditioning on s1 is the unit standard deviation.
    EXPECT_EQ(r.sigma_y, 0.0);
}

TEST(BruteForce, GuardsEnumerationSize) {
    const auto [m, pol] = build_slipgrid({3, 0.2, 20, 0, 0.0});
    EXPECT_THROW(brute_force_liveness(m, pol, 0, 10), ConfigError);
}

TEST(SyntheticProperty, OneStepInequalityAndGap) {
    std::mt19937_64 rng(4);
    oracle::OneStepMargins margins;
    for (int i = 0; i < 20; ++i) {
        const auto [m, pol] = oracle::random_dyadic_mdp(5, 2, rng);
        oracle::one_step_bound_on(m, pol, 6, margins);
    }
    EXPECT_EQ(margins.inequality_violations, 0u);
    EXPECT_EQ(margins.gap_violations, 0u);
    EXPECT_EQ(margins.checked, 100u);
}

TEST(Sidecar, JsonRoundTrip) {
    const auto [m, pol] = build_slipgrid({3, 0.2, 20, 0, 0.0});
    const auto [m2, pol2] = mdp_from_json(mdp_to_json(m, pol));
    EXPECT_EQ(m2.rows.size(), m.rows.size());
    for (std::size_t i = 0; i < m.rows.size(); ++i)
        for (std::size_t k = 0; k < m.rows[i].size(); ++k) {
            EXPECT_EQ(m2.rows[i][k].state, m.rows[i][k].state);
            EXPECT_EQ(m2.rows[i][k].prob, m.rows[i][k].prob);
        }
    EXPECT_EQ(pol2.probs, pol.probs);
    EXPECT_EQ(m2.labels, m.labels);
}
