#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "livope/stats.hpp"

using namespace livope;
using namespace livope::stats;

namespace {

double ag_null_rejection_rate(std::uint64_t seed, int reps = 1000) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    int rejected = 0;
    for (int r = 0; r < reps; ++r) {
        std::vector<std::vector<double>> groups(5, std::vector<double>(5));
        for (auto& g : groups)
            for (double& x : g) x = n(rng);
        rejected += alexander_govern(groups).p < 0.05 ? 1 : 0;
    }
    return rejected / static_cast<double>(reps);
}

} // namespace

TEST(Welch, IdenticalSamples) {
    const std::vector<double> a{0.1, 0.5, 0.3, 0.9};
    const auto r = welch_t(a, a);
    EXPECT_EQ(r.t, 0.0);
    EXPECT_EQ(r.p, 1.0);
}

TEST(Welch, MatchesReferenceImplementation) {
    // Reference values from scipy.stats.ttest_ind(equal_var=False).
    const std::vector<double> a{0.1, 0.4, 0.35, 0.8, 0.55}, b{0.9, 1.2, 0.7, 1.5, 1.1, 1.3};
    const auto r = welch_t(a, b);
    EXPECT_NEAR(r.t, -4.121031081780858, 1e-12);
    EXPECT_NEAR(r.dof, 8.907223236166454, 1e-10);
    EXPECT_NEAR(r.p, 0.0026520207224127092, 1e-12);
}

TEST(Welch, JitteredSeparatedSamples) {
    const std::vector<double> a{1e-9, -2e-9, 0, 3e-9}, b{1 + 2e-9, 1 - 1e-9, 1, 1 + 1e-9};
    EXPECT_LT(welch_t(a, b).p, 1e-4);
}

TEST(Welch, SwapNegatesStatistic) {
    const std::vector<double> a{0.1, 0.4, 0.35, 0.8}, b{0.9, 1.2, 0.7};
    const auto x = welch_t(a, b), y = welch_t(b, a);
    EXPECT_EQ(x.t, -y.t);
    EXPECT_EQ(x.p, y.p);
}

TEST(Welch, DegenerateInputs) {
    const std::vector<double> one{1.0}, c0{0, 0, 0}, c1{1, 1, 1};
    EXPECT_THROW(welch_t(one, c0), DomainError);
    EXPECT_EQ(welch_t(c0, c0).p, 1.0);
    EXPECT_EQ(welch_t(c0, c1).p, 0.0);
}

TEST(AlexanderGovern, MatchesReferenceImplementation) {
    // Reference values from scipy.stats.alexandergovern.
    const std::vector<std::vector<double>> g{
        {1.2, 3.4, 2.2, 5.1, 0.4}, {2.0, 2.5, 2.1, 2.9, 2.2, 2.4}, {5.0, 1.0, 7.2, 3.3, 4.4, 6.1, 0.2}};
    const auto r = alexander_govern(g);
    EXPECT_NEAR(r.statistic, 1.917871696277446, 1e-10);
    EXPECT_NEAR(r.p, 0.38330055902693916, 1e-10);
}

TEST(AlexanderGovern, WidelySeparatedGroups) {
    const auto r = alexander_govern({{0, 0.1, -0.1, 0.05, -0.05}, {1, 1.1, 0.9, 1.05, 0.95}});
    EXPECT_LT(r.p, 1e-6);
    EXPECT_NEAR(r.p, 7.716983867878023e-08, 1e-12);
}

TEST(AlexanderGovern, GroupOrderDoesNotMatter) {
    std::vector<std::vector<double>> g{{1, 2, 4, 3}, {2, 2.5, 3.5, 2.2, 1.9}, {0, 5, 3, 1}};
    const auto a = alexander_govern(g);
    std::rotate(g.begin(), g.begin() + 1, g.end());
    const auto b = alexander_govern(g);
    EXPECT_NEAR(a.statistic, b.statistic, 1e-12);
    EXPECT_NEAR(a.p, b.p, 1e-12);
}

TEST(AlexanderGovern, NullCalibration) {
    const double rate = ag_null_rejection_rate(2024);
    EXPECT_GE(rate, 0.03);
    EXPECT_LE(rate, 0.08);
}

TEST(AlexanderGovern, Errors) {
    EXPECT_THROW(alexander_govern({{1, 2, 3}}), DomainError);
    EXPECT_THROW(alexander_govern({{1, 2, 3}, {1}}), DomainError);
    EXPECT_THROW(alexander_govern({{1, 2, 3}, {2, 2, 2}}), DomainError);
}

TEST(BenjaminiHochberg, Examples) {
    const std::vector<double> p{0.005, 0.01, 0.03, 0.04};
    EXPECT_EQ(benjamini_hochberg(p, 0.05), (std::vector<std::size_t>{0, 1, 2, 3}));
    const std::vector<double> ones{1, 1, 1};
    EXPECT_TRUE(benjamini_hochberg(ones, 0.05).empty());
    const std::vector<double> single{0.04};
    EXPECT_EQ(benjamini_hochberg(single, 0.05), std::vector<std::size_t>{0});
    const std::vector<double> step{0.01, 0.5, 0.02, 0.04};
    EXPECT_EQ(benjamini_hochberg(step, 0.05), (std::vector<std::size_t>{0, 2}));
}

TEST(BenjaminiHochberg, Errors) {
    const std::vector<double> bad{0.2, 1.5};
    EXPECT_THROW(benjamini_hochberg(bad, 0.05), DomainError);
    const std::vector<double> ok{0.2};
    EXPECT_THROW(benjamini_hochberg(ok, 1.0), DomainError);
}

TEST(StatsProperty, BhMonotoneInAlpha) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 0.2);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> p(1 + trial % 12);
        for (double& x : p) x = u(rng);
        std::size_t prev = 0;
        std::vector<std::size_t> prev_set;
        for (double alpha = 0.01; alpha < 0.5; alpha += 0.01) {
            const auto r = benjamini_hochberg(p, alpha);
            EXPECT_GE(r.size(), prev);
            EXPECT_TRUE(std::includes(r.begin(), r.end(), prev_set.begin(), prev_set.end()));
            prev = r.size();
            prev_set = r;
        }
    }
}
