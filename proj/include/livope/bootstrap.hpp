#ifndef LIVOPE_BOOTSTRAP_HPP
#define LIVOPE_BOOTSTRAP_HPP

// Two-stage evaluation on state-keyed (tabular) data.
//
// Stage 1 runs the sparse backward pass over every success episode and keeps
// the values of frames that precede (or are) a goal frame. These anchors are
// averaged per state key. Stage 2 re-runs the backward pass over the whole
// dataset with the target replaced by the anchor value wherever one exists.

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "livope/dataset.hpp"
#include "livope/error.hpp"
#include "livope/liveness.hpp"

namespace livope {

struct AnchorTable {
    std::map<std::string, double> entries;
    std::map<std::string, std::size_t> coverage;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }

    std::optional<double> find(const std::string& key) const {
        auto it = entries.find(key);
        if (it == entries.end()) return std::nullopt;
        return it->second;
    }
};

namespace detail {

inline const std::string& require_key(const Frame& f, const Episode& e) {
    if (!f.state_key) throw DatasetError("episode '" + e.id + "' frame " + std::to_string(f.index) +
                                         " has no state_key (tabular mode requires one)");
    return *f.state_key;
}

} // namespace detail

inline AnchorTable compute_anchors(const Dataset& successes, const Discount& cfg) {
    std::map<std::string, double> sums;
    AnchorTable table;
    for (const auto& e : successes.episodes) {
        if (!e.succeeded()) throw DatasetError("anchor computation given timed-out episode '" + e.id + "'");
        for (const auto& f : e.frames) detail::require_key(f, e);
        const auto values = backward_episode_values(e, cfg);
        const std::size_t last_goal = *e.last_goal();
        for (std::size_t t = 0; t <= last_goal; ++t) {
            const auto& key = *e.frames[t].state_key;
            sums[key] += values[t];
            ++table.coverage[key];
        }
    }
    for (const auto& [key, sum] : sums)
        table.entries[key] = sum / static_cast<double>(table.coverage[key]);
    return table;
}

/// Anchor value for the frame's key if present, otherwise the sparse target.
inline double bootstrapped_target(const Frame& f, const AnchorTable& anchors) {
    if (f.state_key)
        if (auto v = anchors.find(*f.state_key)) return *v;
    return sparse_target(f);
}

struct BootstrappedTarget {
    const AnchorTable* anchors;
    double operator()(const Frame& f) const { return bootstrapped_target(f, *anchors); }
};

struct BootstrapResult {
    std::map<std::string, ValueTrace> traces;
    AnchorTable anchors;
};

/// Stage 2 alone, for a given anchor table. An empty table gives the
/// no-bootstrap ablation.
inline BootstrapResult evaluate_with_anchors(const Dataset& d, const Discount& cfg, AnchorTable anchors) {
    BootstrapResult out;
    out.anchors = std::move(anchors);
    for (const auto& e : d.episodes) {
        for (const auto& f : e.frames) detail::require_key(f, e);
        out.traces[e.id] = backward_episode_values(e, cfg, BootstrappedTarget{&out.anchors});
    }
    return out;
}

inline BootstrapResult two_stage_evaluate(const Dataset& d, const Discount& cfg) {
    return evaluate_with_anchors(d, cfg, compute_anchors(success_subset(d), cfg));
}

inline BootstrapResult no_bootstrap_evaluate(const Dataset& d, const Discount& cfg) {
    return evaluate_with_anchors(d, cfg, AnchorTable{});
}

/// Keys whose anchor value is outside [-1, 1).
inline std::vector<std::string> anchor_codomain_violations(const AnchorTable& a) {
    std::vector<std::string> bad;
    for (const auto& [key, v] : a.entries)
        if (!(v >= -1.0 && v < 1.0)) bad.push_back(key);
    return bad;
}

inline nlohmann::json anchors_to_json(const AnchorTable& a) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, v] : a.entries) j[key] = v;
    return j;
}

/// Inverse of anchors_to_json. Values are not range-checked here so a
/// corrupted table can still be loaded and inspected.
inline AnchorTable anchors_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DatasetError("anchor table must be a JSON object");
    AnchorTable a;
    for (const auto& [key, v] : j.items()) {
        if (!v.is_number()) throw DatasetError("anchor '" + key + "' is not a number");
        a.entries[key] = v.get<double>();
        a.coverage[key] = 1;
    }
    return a;
}

} // namespace livope

#endif
