#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "livope/baselines.hpp"

using namespace livope;

namespace {

CumulativeRewardScheme scheme(double c_fail, double norm, double gamma) { return {c_fail, norm, Discount(gamma)}; }

// Normalized return of a frame followed by k rewards of -1 and a final 0.
double analytic_return(std::size_t k, double gamma, double norm) {
    return -(1.0 - std::pow(gamma, static_cast<double>(k))) / (1.0 - gamma) / norm;
}

TrainConfig quick(std::size_t epochs, double lr = 1e-3) {
    TrainConfig tc;
    tc.learning_rate = lr;
    tc.batch_size = 16;
    tc.epochs = epochs;
    tc.target_sync_interval = 50;
    tc.optimizer = nn::OptimizerKind::adam;
    return tc;
}

nn::NetworkSpec small_net() {
    nn::NetworkSpec s;
    s.hidden_layers = 2;
    s.hidden_units = 32;
    return s;
}

} // namespace

TEST(Rewards, SuccessAndTimeoutExamples) {
    const Episode s = fixtures::chain(3).episodes[0];
    const Episode t = fixtures::path("t", {0, 1, 2}, 3);
    EXPECT_EQ(episode_rewards(s, scheme(100, 1, 0.9)), (std::vector<double>{-1, 0}));
    EXPECT_EQ(episode_rewards(t, scheme(100, 1, 0.9)), (std::vector<double>{-1, -100}));
    EXPECT_EQ(episode_rewards(t, scheme(100, 500, 0.9)), (std::vector<double>{-1.0 / 500, -100.0 / 500}));
}

TEST(Rewards, SingleFrameEpisodeGetsOneSlot) {
    EXPECT_EQ(episode_rewards(fixtures::chain(1).episodes[0], scheme(4, 2, 0.9)), std::vector<double>{0.0});
    EXPECT_EQ(episode_rewards(fixtures::path("t", {0}, 1), scheme(4, 2, 0.9)), std::vector<double>{-2.0});
}

TEST(BaselineProperty, RewardEmissionIsExhaustiveAndExclusive) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> len(1, 30), coin(0, 1);
    const auto s = scheme(40, 80, 0.95);
    for (int i = 0; i < 500; ++i) {
        const std::size_t n = len(rng);
        std::vector<std::size_t> slots(n, 0);
        const bool success = coin(rng);
        const Episode e = fixtures::path("e", slots, 1, success ? std::vector<std::size_t>{n - 1} : std::vector<std::size_t>{});
        const auto r = episode_rewards(e, s);
        ASSERT_EQ(r.size(), std::max<std::size_t>(n, 2) - 1);
        for (std::size_t t = 0; t < r.size(); ++t) {
            const int hits = (r[t] == 0.0) + (r[t] == -1.0 / 80) + (r[t] == -40.0 / 80);
            EXPECT_EQ(hits, 1);
            if (t + 1 < r.size()) {
                EXPECT_EQ(r[t], -1.0 / 80);
            }
        }
        EXPECT_EQ(r.back(), success ? 0.0 : -0.5);
    }
}

TEST(Returns, HandSummedExample) {
    EXPECT_EQ(discounted_returns({-1, 0}, Discount(0.5)), (std::vector<double>{-1, 0}));
    EXPECT_EQ(discounted_returns({-1, -1, -2}, Discount(0.5)), (std::vector<double>{-2, -2, -2}));
}

TEST(Returns, ImmediateSuccessesHaveZeroTargets) {
    Dataset d;
    d.feature_dim = 1;
    for (int i = 0; i < 4; ++i) d.episodes.push_back(fixtures::path("e" + std::to_string(i), {0}, 1, {0}));
    for (double g : build_return_table(d, scheme(10, 5, 0.9)).returns) EXPECT_EQ(g, 0.0);
}

TEST(Td0, SingleTerminalUpdate) {
    TabularValues v;
    td0_update(v, "s", -1.0, nullptr, 1.0, Discount(0.9));
    EXPECT_EQ(v.at("s"), -1.0);
}

TEST(BaselineProperty, TabularMcAndTdAgreeOnDeterministicChain) {
    const Dataset d = fixtures::chain(6);
    const auto s = scheme(20, 10, 0.9);
    const auto mc = tabular_mc(d, s);
    const auto td = tabular_td0(d, s, 0.5, 400);
    for (std::size_t t = 0; t < 5; ++t) {
        const auto key = "s" + std::to_string(t);
        EXPECT_NEAR(mc.at(key), analytic_return(4 - t, 0.9, 10), 1e-12);
        EXPECT_NEAR(td.at(key), mc.at(key), 1e-3);
    }
}

TEST(BaselineProperty, TabularMcdWithinOneBinOfMc) {
    std::mt19937_64 rng(2);
    for (std::size_t n = 2; n <= 12; ++n) {
        const Dataset d = fixtures::chain(n, 3);
        const auto s = scheme(20, 10, 0.9);
        const auto dist = support_from_returns(build_return_table(d, s).returns, 51);
        const auto mc = tabular_mc(d, s), mcd = tabular_mcd(d, s, dist);
        for (const auto& [k, v] : mc) EXPECT_LE(std::abs(mcd.at(k) - v), dist.width());
    }
}

TEST(Distribution, PointMassAndUniformExpectations) {
    const ReturnDistributionSpec dist{201, -1.0, 0.0};
    std::vector<double> point(201, 0.0), uniform(201, 1.0 / 201);
    point[100] = 1.0;
    EXPECT_NEAR(dist.center(100), -0.5, 1e-15);
    EXPECT_NEAR(dist.expectation(point), -0.5, 1e-15);
    EXPECT_NEAR(dist.expectation(uniform), -0.5, 1e-12);
}

TEST(Distribution, EdgeGoesToLowerBin) {
    const ReturnDistributionSpec dist{4, 0.0, 4.0};
    EXPECT_EQ(dist.bin_of(1.0), 0u);
    EXPECT_EQ(dist.bin_of(2.0), 1u);
    EXPECT_EQ(dist.bin_of(2.5), 2u);
    EXPECT_EQ(dist.bin_of(0.0), 0u);
    EXPECT_EQ(dist.bin_of(4.0), 3u);
    EXPECT_EQ(dist.bin_of(-7.0), 0u);
}

TEST(Distribution, SupportPadsOneBinEachSide) {
    const auto d = support_from_returns({-2.0, 0.0, -1.0}, 12);
    EXPECT_NEAR(d.width(), 0.2, 1e-12);
    EXPECT_NEAR(d.lo, -2.2, 1e-12);
    EXPECT_NEAR(d.hi, 0.2, 1e-12);
    const auto flat = support_from_returns({0.0, 0.0}, 5);
    EXPECT_LT(flat.lo, 0.0);
    EXPECT_GT(flat.hi, 0.0);
    EXPECT_THROW(support_from_returns({}, 5), DatasetError);
}

TEST(BaselineSteps, Examples) {
    const auto s = scheme(400, 500, 0.993);
    EXPECT_EQ(baseline_steps(0.0, s), 0.0);
    EXPECT_NEAR(baseline_steps(analytic_return(5, 0.993, 500), s), 5.0, 1e-6);
    EXPECT_EQ(baseline_steps(-1.0 / (0.007 * 500), s), std::numeric_limits<double>::infinity());
    EXPECT_EQ(baseline_steps(-1.0, s), std::numeric_limits<double>::infinity());
}

TEST(BaselineProperty, StepsRoundTripUpTo200) {
    for (double g : {0.9, 0.95, 0.993})
        for (std::size_t k = 0; k <= 200; ++k) {
            // gamma^k below 1e-6 is swamped by rounding of the normalized return.
            if (std::pow(g, static_cast<double>(k)) < 1e-6) break;
            const auto s = scheme(400, 500, g);
            EXPECT_NEAR(baseline_steps(analytic_return(k, g, 500), s), static_cast<double>(k), 1e-6);
        }
}

TEST(Scheme, Validation) {
    EXPECT_THROW(scheme(0, 1, 0.9).validate(), ConfigError);
    EXPECT_THROW(scheme(1, -1, 0.9).validate(), ConfigError);
}

TEST(FitBaselines, ZeroLearningRateLeavesParametersUnchanged) {
    const Dataset d = fixtures::chain(4);
    auto tc = quick(5, 0.0);
    const auto fit = fit_td0(d, small_net(), ReplayConfig{}, tc, scheme(20, 10, 0.9));
    nn::Mlp init(detail::scalar_spec(small_net(), 4));
    init.init(detail::mix_seed(0, 3));
    EXPECT_TRUE(fit.network.params() == init.params());
}

TEST(FitBaselines, MonteCarloAndTdOnChain) {
    const Dataset d = fixtures::chain(6);
    const auto s = scheme(20, 10, 0.9);
    const auto table = build_frame_table(d);
    const auto mc = baseline_values(fit_mc(d, small_net(), ReplayConfig{}, quick(2000, 1e-4), s), table.features);
    const auto td = baseline_values(fit_td0(d, small_net(), ReplayConfig{}, quick(2000, 1e-4), s), table.features);
    for (std::size_t t = 0; t < 5; ++t) {
        EXPECT_NEAR(mc[t], analytic_return(4 - t, 0.9, 10), 1e-3) << t;
        EXPECT_NEAR(td[t], analytic_return(4 - t, 0.9, 10), 1e-3) << t;
    }
}

TEST(FitBaselines, DistributionalMatchesMonteCarloWithinABin) {
    const Dataset d = fixtures::chain(6);
    const auto s = scheme(20, 10, 0.9);
    const auto table = build_frame_table(d);
    const auto fit = fit_mcd(d, small_net(), ReplayConfig{}, quick(2000, 1e-4), s, 51);
    ASSERT_TRUE(fit.distribution.has_value());
    const auto v = baseline_values(fit, table.features);
    for (std::size_t t = 0; t < 5; ++t) EXPECT_LE(std::abs(v[t] - analytic_return(4 - t, 0.9, 10)), fit.distribution->width()) << t;
}
