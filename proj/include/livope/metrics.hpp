#ifndef LIVOPE_METRICS_HPP
#define LIVOPE_METRICS_HPP

// Step-count metrics. Values are converted to estimated steps-to-success; the
// success metric counts frames in the window ending at the first goal whose
// estimate is below the window length, the failure metric counts timed-out
// frames whose estimate exceeds the standard horizon.

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "livope/dataset.hpp"
#include "livope/error.hpp"
#include "livope/liveness.hpp"

namespace livope {

struct MetricConfig {
    std::size_t standard_horizon = 200;
    Discount gamma{0.993};
    StepsModel steps_model = LivenessSteps{};

    void validate() const {
        if (standard_horizon < 1) throw ConfigError("standard horizon must be at least 1");
    }

    /// Liveness values are clamped into [-1, 1] first.
    double steps(double v) const {
        if (std::holds_alternative<LivenessSteps>(steps_model)) v = std::clamp(v, -1.0, 1.0);
        return steps_from_value(v, gamma, steps_model);
    }
};

struct EpisodeScore {
    std::string episode_id;
    Outcome outcome;
    std::size_t counted = 0;
    std::size_t considered = 0;
};

struct MetricReport {
    double success = 0.0;
    double failure = 0.0;
    double composite = 0.0;
    std::vector<EpisodeScore> per_episode;
};

/// Window [g - N + 1, g] with N = min(N_s, g + 1).
inline EpisodeScore success_window_score(const Episode& e, const ValueTrace& values, const MetricConfig& cfg) {
    const auto g = e.first_goal();
    if (!g) throw DatasetError("success episode '" + e.id + "' has no goal frame");
    if (values.size() != e.frames.size()) throw DomainError("value trace length mismatch for '" + e.id + "'");
    const std::size_t n = std::min(cfg.standard_horizon, *g + 1);
    EpisodeScore s{e.id, Outcome::success, 0, n};
    for (std::size_t t = *g + 1 - n; t <= *g; ++t)
        if (cfg.steps(values[t]) < static_cast<double>(n)) ++s.counted;
    return s;
}

inline EpisodeScore failure_score(const Episode& e, const ValueTrace& values, const MetricConfig& cfg) {
    if (values.size() != e.frames.size()) throw DomainError("value trace length mismatch for '" + e.id + "'");
    EpisodeScore s{e.id, Outcome::timed_out, 0, values.size()};
    for (double v : values)
        if (cfg.steps(v) > static_cast<double>(cfg.standard_horizon)) ++s.counted;
    return s;
}

namespace detail {

inline double ratio(const std::vector<EpisodeScore>& scores, Outcome o) {
    std::size_t c = 0, n = 0;
    for (const auto& s : scores)
        if (s.outcome == o) {
            c += s.counted;
            n += s.considered;
        }
    return n == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(n);
}

inline const ValueTrace& trace_for(const std::map<std::string, ValueTrace>& values, const Episode& e) {
    auto it = values.find(e.id);
    if (it == values.end()) throw DomainError("no values for episode '" + e.id + "'");
    return it->second;
}

} // namespace detail

inline double success_metric(const Dataset& d, const std::map<std::string, ValueTrace>& values,
                             const MetricConfig& cfg) {
    cfg.validate();
    std::vector<EpisodeScore> scores;
    for (const auto& e : d.episodes)
        if (e.succeeded()) scores.push_back(success_window_score(e, detail::trace_for(values, e), cfg));
    if (scores.empty()) throw DatasetError("success metric needs at least one success episode");
    return detail::ratio(scores, Outcome::success);
}

inline double failure_metric(const Dataset& d, const std::map<std::string, ValueTrace>& values,
                             const MetricConfig& cfg) {
    cfg.validate();
    std::vector<EpisodeScore> scores;
    for (const auto& e : d.episodes)
        if (!e.succeeded()) scores.push_back(failure_score(e, detail::trace_for(values, e), cfg));
    if (scores.empty()) throw DatasetError("failure metric needs at least one timed-out episode");
    return detail::ratio(scores, Outcome::timed_out);
}

/// Both metrics; a missing outcome class throws.
inline MetricReport evaluate_metrics(const Dataset& d, const std::map<std::string, ValueTrace>& values,
                                     const MetricConfig& cfg) {
    cfg.validate();
    MetricReport r;
    for (const auto& e : d.episodes) {
        const auto& tr = detail::trace_for(values, e);
        r.per_episode.push_back(e.succeeded() ? success_window_score(e, tr, cfg) : failure_score(e, tr, cfg));
    }
    if (d.count(Outcome::success) == 0) throw DatasetError("success metric needs at least one success episode");
    if (d.count(Outcome::timed_out) == 0) throw DatasetError("failure metric needs at least one timed-out episode");
    r.success = detail::ratio(r.per_episode, Outcome::success);
    r.failure = detail::ratio(r.per_episode, Outcome::timed_out);
    r.composite = (r.success + r.failure) / 2.0;
    return r;
}

inline nlohmann::json report_to_json(const MetricReport& r) {
    nlohmann::json eps = nlohmann::json::array();
    for (const auto& s : r.per_episode)
        eps.push_back({{"episode_id", s.episode_id},
                       {"outcome", to_string(s.outcome)},
                       {"counted", s.counted},
                       {"considered", s.considered}});
    return {{"success", r.success}, {"failure", r.failure}, {"composite", r.composite}, {"per_episode", eps}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
    MetricReport r;
    try {
        r.success = j.at("success").get<double>();
        r.failure = j.at("failure").get<double>();
        r.composite = j.at("composite").get<double>();
        if (j.contains("per_episode"))
            for (const auto& s : j.at("per_episode"))
                r.per_episode.push_back({s.at("episode_id").get<std::string>(),
                                         s.at("outcome").get<std::string>() == "success" ? Outcome::success
                                                                                          : Outcome::timed_out,
                                         s.at("counted").get<std::size_t>(), s.at("considered").get<std::size_t>()});
    } catch (const nlohmann::json::exception& ex) {
        throw DatasetError(std::string("malformed metric report: ") + ex.what());
    }
    return r;
}

} // namespace livope

#endif
