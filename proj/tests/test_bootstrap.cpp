#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "livope/bootstrap.hpp"
#include "livope/oracle.hpp"

using namespace livope;
using fixtures::path;

namespace {

// Random tabular dataset over `keys` slots; roughly a third of episodes end in a goal.
Dataset random_tabular(std::mt19937_64& rng, std::size_t keys = 8, std::size_t episodes = 12) {
    std::uniform_int_distribution<std::size_t> slot(0, keys - 1), len(1, 9), coin(0, 2);
    Dataset d;
    d.feature_dim = keys;
    for (std::size_t i = 0; i < episodes; ++i) {
        std::vector<std::size_t> slots(len(rng));
        for (auto& s : slots) s = slot(rng);
        std::vector<std::size_t> goals;
        if (coin(rng) == 0) goals.push_back(slots.size() - 1);
        d.episodes.push_back(path("e" + std::to_string(i), slots, keys, goals));
    }
    return d;
}

} // namespace

TEST(ComputeAnchors, SixFrameEpisodeAtHalf) {
    Dataset d;
    d.feature_dim = 6;
    d.episodes.push_back(path("e", {0, 1, 2, 3, 4, 5}, 6, {5}));
    const auto a = compute_anchors(d, Discount(0.5));
    const std::vector<double> expect{0.9375, 0.875, 0.75, 0.5, 0.0, -1.0};
    ASSERT_EQ(a.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(*a.find("s" + std::to_string(i)), expect[i]);
}

TEST(ComputeAnchors, GoalAtFirstFrameAnchorsOnlyThatFrame) {
    Dataset d;
    d.feature_dim = 3;
    d.episodes.push_back(path("e", {0, 1, 2}, 3, {0}));
    const auto a = compute_anchors(d, Discount(0.5));
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(*a.find("s0"), -1.0);
}

TEST(ComputeAnchors, SharedKeyIsAveraged) {
    Dataset d;
    d.feature_dim = 5;
    d.episodes.push_back(path("a", {0, 1, 2}, 5, {2}));    // s0 -> 0.5
    d.episodes.push_back(path("b", {0, 3, 4, 2}, 5, {3})); // s0 -> 0.75
    const auto a = compute_anchors(d, Discount(0.5));
    EXPECT_DOUBLE_EQ(*a.find("s0"), 0.625);
    EXPECT_EQ(a.coverage.at("s0"), 2u);
}

TEST(ComputeAnchors, RejectsTimeoutsAndMissingKeys) {
    Dataset d;
    d.feature_dim = 2;
    d.episodes.push_back(path("t", {0, 1}, 2));
    EXPECT_THROW(compute_anchors(d, Discount(0.5)), DatasetError);
    d.episodes[0] = path("s", {0, 1}, 2, {1});
    d.episodes[0].frames[0].state_key.reset();
    EXPECT_THROW(compute_anchors(d, Discount(0.5)), DatasetError);
}

TEST(BootstrappedTarget, Cases) {
    AnchorTable a;
    a.entries["s0"] = 0.5;
    EXPECT_EQ(bootstrapped_target(fixtures::one_hot(0, 0, 2, false), a), 0.5);
    EXPECT_EQ(bootstrapped_target(fixtures::one_hot(0, 1, 2, false), a), 1.0);
    EXPECT_EQ(bootstrapped_target(fixtures::one_hot(0, 1, 2, true), a), -1.0);
}

TEST(TwoStage, ThreeEpisodeFixture) {
    const auto r = two_stage_evaluate(oracle::three_episode_fixture(), Discount(0.5));
    const ValueTrace e2{0.9375, 0.875, 0.75, 1, 1, 1};
    const auto& got = r.traces.at("episode2");
    for (std::size_t t = 0; t < 6; ++t) EXPECT_NEAR(got[t], e2[t], 1e-12);
    for (double v : r.traces.at("episode3")) EXPECT_EQ(v, 1.0);
}

TEST(TwoStage, NoSuccessesGivesAllOnes) {
    Dataset d;
    d.feature_dim = 3;
    d.episodes = {path("a", {0, 1, 2}, 3), path("b", {2, 1}, 3)};
    for (const auto& [id, tr] : two_stage_evaluate(d, Discount(0.9)).traces)
        for (double v : tr) EXPECT_EQ(v, 1.0);
}

TEST(TwoStage, SingleSuccessEqualsItsBackwardPass) {
    Dataset d;
    d.feature_dim = 5;
    d.episodes = {path("a", {0, 1, 2, 3, 4}, 5, {4})};
    EXPECT_EQ(two_stage_evaluate(d, Discount(0.8)).traces.at("a"), backward_episode_values(d.episodes[0], Discount(0.8)));
}

TEST(AnchorJson, RoundTripKeepsCorruptValues) {
    AnchorTable a;
    a.entries = {{"x", 0.25}, {"y", 1.5}};
    const auto b = anchors_from_json(anchors_to_json(a));
    EXPECT_EQ(b.entries, a.entries);
    EXPECT_EQ(anchor_codomain_violations(b), std::vector<std::string>{"y"});
}

TEST(BootstrapProperty, CorrectionDominanceIsolationAndCodomain) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const Dataset d = random_tabular(rng);
        const Discount g(trial % 2 ? 0.5 : 0.95);
        const auto two = two_stage_evaluate(d, g);
        const auto nb = no_bootstrap_evaluate(d, g);
        EXPECT_TRUE(anchor_codomain_violations(two.anchors).empty());
        for (const auto& [k, v] : two.anchors.entries) EXPECT_LT(v, 1.0);
        for (const auto& e : d.episodes) {
            const auto& a = two.traces.at(e.id);
            const auto& b = nb.traces.at(e.id);
            bool shares = false;
            for (const auto& f : e.frames) shares = shares || two.anchors.find(*f.state_key).has_value();
            for (std::size_t t = 0; t < a.size(); ++t) {
                EXPECT_LE(a[t], b[t]);
                EXPECT_GE(a[t], -1.0);
                EXPECT_LE(a[t], 1.0);
                if (!e.succeeded() && !shares) {
                    EXPECT_EQ(a[t], 1.0);
                }
            }
        }
    }
}

TEST(BootstrapProperty, CorrectionReachesTheFirstFrame) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const Dataset d = random_tabular(rng);
        const Discount g(0.9);
        const auto r = two_stage_evaluate(d, g);
        for (const auto& e : d.episodes) {
            if (e.succeeded()) continue;
            const auto& v = r.traces.at(e.id);
            for (std::size_t t = 0; t < e.frames.size(); ++t) {
                if (!(bootstrapped_target(e.frames[t], r.anchors) < 1.0)) continue;
                for (std::size_t j = 0; j < t; ++j) {
                    EXPECT_LE(v[j], (1.0 - g.gamma()) + g.gamma() * v[j + 1] + 1e-15);
                    EXPECT_LT(v[j], 1.0);
                }
            }
        }
    }
}
