#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

#include "fixtures.hpp"
#include "livope/bootstrap.hpp"
#include "livope/metrics.hpp"

using namespace livope;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Liveness values whose step estimates are `steps` (+inf maps to 1).
ValueTrace from_steps(const std::vector<double>& steps, double gamma) {
    ValueTrace v;
    for (double k : steps) v.push_back(std::isinf(k) ? 1.0 : value_from_steps(k, Discount(gamma)));
    return v;
}

MetricConfig cfg(std::size_t horizon, double gamma) { return {horizon, Discount(gamma), LivenessSteps{}}; }

} // namespace

TEST(SuccessWindow, DefinitionalExample) {
    const Episode e = fixtures::chain(4).episodes[0];
    const auto s = success_window_score(e, from_steps({5, 3, 2, 0}, 0.9), cfg(200, 0.9));
    EXPECT_EQ(s.considered, 4u);
    EXPECT_EQ(s.counted, 3u);
    Dataset d;
    d.feature_dim = 4;
    d.episodes = {e};
    EXPECT_EQ(success_metric(d, {{e.id, from_steps({5, 3, 2, 0}, 0.9)}}, cfg(200, 0.9)), 0.75);
}

TEST(SuccessWindow, AllInfiniteAndAllZero) {
    Dataset d = fixtures::chain(5);
    const auto& id = d.episodes[0].id;
    EXPECT_EQ(success_metric(d, {{id, ValueTrace(5, 1.0)}}, cfg(3, 0.9)), 0.0);
    EXPECT_EQ(success_metric(d, {{id, ValueTrace(5, -1.0)}}, cfg(3, 0.9)), 1.0);
}

TEST(SuccessWindow, WindowEndsAtFirstGoal) {
    const Episode e = fixtures::path("e", {0, 1, 2, 3, 4, 5}, 6, {3, 5});
    const auto s = success_window_score(e, ValueTrace(6, -1.0), cfg(2, 0.9));
    EXPECT_EQ(s.considered, 2u);
    EXPECT_EQ(s.counted, 2u);
}

TEST(Failure, DefinitionalExample) {
    const Episode e = fixtures::path("t", {0, 1, 2}, 3);
    const auto s = failure_score(e, from_steps({inf, 150, 50}, 0.993), cfg(100, 0.993));
    EXPECT_EQ(s.counted, 2u);
    EXPECT_EQ(s.considered, 3u);
    Dataset d;
    d.feature_dim = 3;
    d.episodes = {e};
    EXPECT_DOUBLE_EQ(failure_metric(d, {{"t", from_steps({inf, 150, 50}, 0.993)}}, cfg(100, 0.993)), 2.0 / 3.0);
}

TEST(Failure, AllOnesCountsEveryFrame) {
    Dataset d;
    d.feature_dim = 3;
    d.episodes = {fixtures::path("t", {0, 1, 2}, 3)};
    EXPECT_EQ(failure_metric(d, {{"t", ValueTrace(3, 1.0)}}, cfg(200, 0.993)), 1.0);
}

TEST(Failure, EstimateEqualToHorizonIsNotCounted) {
    const MetricConfig c = cfg(2, 0.5);
    ASSERT_EQ(c.steps(0.5), 2.0);
    EXPECT_EQ(failure_score(fixtures::path("t", {0}, 1), {0.5}, c).counted, 0u);
}

TEST(Metrics, MissingOutcomeClassAndMissingTraceThrow) {
    Dataset d = fixtures::chain(3);
    EXPECT_THROW(failure_metric(d, {{d.episodes[0].id, ValueTrace(3, 1.0)}}, cfg(10, 0.9)), DatasetError);
    EXPECT_THROW(evaluate_metrics(d, {{d.episodes[0].id, ValueTrace(3, 1.0)}}, cfg(10, 0.9)), DatasetError);
    EXPECT_THROW(success_metric(d, {}, cfg(10, 0.9)), DomainError);
    EXPECT_THROW(success_metric(d, {{d.episodes[0].id, ValueTrace(2, 1.0)}}, cfg(10, 0.9)), DomainError);
}

TEST(Metrics, OutOfRangeLivenessValuesAreClamped) {
    const MetricConfig c = cfg(10, 0.9);
    EXPECT_EQ(c.steps(-1.3), 0.0);
    EXPECT_EQ(c.steps(1.2), inf);
}

TEST(MetricsProperty, CompositeIsMeanAndReportRoundTrips) {
    Dataset d = fixtures::chain(5);
    d.episodes.push_back(fixtures::path("t", {0, 1, 2}, 5));
    const std::map<std::string, ValueTrace> v{{d.episodes[0].id, {0.9, 0.5, 0.2, -0.5, -1.0}}, {"t", {1.0, 0.99, 0.2}}};
    const auto r = evaluate_metrics(d, v, cfg(4, 0.9));
    EXPECT_EQ(r.composite, (r.success + r.failure) / 2.0);
    const auto back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
    EXPECT_EQ(back.success, r.success);
    EXPECT_EQ(back.failure, r.failure);
    EXPECT_EQ(back.composite, r.composite);
    ASSERT_EQ(back.per_episode.size(), 2u);
    EXPECT_EQ(back.per_episode[1].counted, r.per_episode[1].counted);
}

TEST(MetricsProperty, ClosedFormValuesScorePerfectSuccess) {
    for (std::size_t n = 1; n <= 40; n += 3)
        for (double g : {0.5, 0.9, 0.993}) {
            const Dataset d = fixtures::chain(n);
            const auto v = backward_episode_values(d.episodes[0], Discount(g));
            EXPECT_EQ(success_metric(d, {{d.episodes[0].id, v}}, cfg(n + 5, g)), 1.0);
        }
}

TEST(MetricsProperty, DisjointTimeoutsUnderNoBootstrapFailPerfectly) {
    Dataset d;
    d.feature_dim = 8;
    d.episodes = {fixtures::path("a", {0, 1, 2}, 8), fixtures::path("b", {3, 4}, 8), fixtures::path("c", {5, 6, 7, 5}, 8)};
    const auto r = no_bootstrap_evaluate(d, Discount(0.993));
    EXPECT_EQ(failure_metric(d, r.traces, cfg(200, 0.993)), 1.0);
}

TEST(MetricsProperty, DependOnlyOnStepEstimates) {
    // The same step estimates expressed as liveness values and as normalized
    // cumulative returns give identical metrics.
    const double g = 0.95, norm = 80.0;
    Dataset d = fixtures::chain(6);
    d.episodes.push_back(fixtures::path("t", {0, 1, 2, 3}, 6));
    const std::vector<double> ks{0.0, 1.0, 2.5, 7.0, 12.0, 30.0};
    const std::vector<double> kt{3.0, 9.0, 11.0, 40.0};
    auto live = [&](const std::vector<double>& k) { return from_steps(k, g); };
    auto cum = [&](const std::vector<double>& k) {
        ValueTrace v;
        for (double x : k) v.push_back(-(1.0 - std::pow(g, x)) / (1.0 - g) / norm);
        return v;
    };
    const auto a = evaluate_metrics(d, {{d.episodes[0].id, live(ks)}, {"t", live(kt)}}, {10, Discount(g), LivenessSteps{}});
    const auto b = evaluate_metrics(d, {{d.episodes[0].id, cum(ks)}, {"t", cum(kt)}}, {10, Discount(g), CumulativeSteps{norm}});
    EXPECT_EQ(a.success, b.success);
    EXPECT_EQ(a.failure, b.failure);
}
