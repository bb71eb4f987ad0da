#ifndef LIVOPE_DATASET_HPP
#define LIVOPE_DATASET_HPP

// Episode data model and the JSON-Lines episode format.
//
//   {"id": "...", "outcome": "success"|"timeout", "frames": [
//       {"t": 0, "features": [...], "goal": false, "state_key": "..."}, ...]}
//
// "outcome" and "state_key" are optional. Blank lines are skipped.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "livope/error.hpp"

namespace livope {

struct Frame {
    std::size_t index = 0;
    std::vector<double> features;
    bool goal = false;
    std::optional<std::string> state_key;

    bool operator==(const Frame&) const = default;
};

enum class Outcome { success, timed_out };

inline const char* to_string(Outcome o) { return o == Outcome::success ? "success" : "timeout"; }

struct Episode {
    std::string id;
    std::vector<Frame> frames;
    Outcome outcome = Outcome::timed_out;

    std::size_t length() const noexcept { return frames.size(); }
    bool succeeded() const noexcept { return outcome == Outcome::success; }

    std::optional<std::size_t> first_goal() const {
        for (const auto& f : frames)
            if (f.goal) return f.index;
        return std::nullopt;
    }

    std::optional<std::size_t> last_goal() const {
        for (auto it = frames.rbegin(); it != frames.rend(); ++it)
            if (it->goal) return it->index;
        return std::nullopt;
    }

    bool operator==(const Episode&) const = default;
};

struct Dataset {
    std::vector<Episode> episodes;
    std::size_t feature_dim = 0;

    std::size_t size() const noexcept { return episodes.size(); }
    bool empty() const noexcept { return episodes.empty(); }

    std::size_t num_frames() const {
        std::size_t n = 0;
        for (const auto& e : episodes) n += e.frames.size();
        return n;
    }

    std::size_t count(Outcome o) const {
        return static_cast<std::size_t>(std::count_if(
            episodes.begin(), episodes.end(), [o](const Episode& e) { return e.outcome == o; }));
    }

    bool operator==(const Dataset&) const = default;
};

inline Outcome derive_outcome(const Episode& e) {
    return std::any_of(e.frames.begin(), e.frames.end(), [](const Frame& f) { return f.goal; })
               ? Outcome::success
               : Outcome::timed_out;
}

/// Checks every dataset invariant; throws DatasetError on the first violation.
/// `max_horizon` of zero disables the length bound.
inline void validate(const Dataset& d, std::size_t max_horizon = 0) {
    if (d.feature_dim == 0 && !d.empty()) throw DatasetError("feature_dim must be positive");
    std::set<std::string> ids;
    for (const auto& e : d.episodes) {
        if (!ids.insert(e.id).second) throw DatasetError("duplicate episode id '" + e.id + "'");
        if (e.frames.empty()) throw DatasetError("episode '" + e.id + "' has no frames");
        if (max_horizon != 0 && e.frames.size() > max_horizon)
            throw DatasetError("episode '" + e.id + "' exceeds the maximum horizon");
        for (std::size_t t = 0; t < e.frames.size(); ++t) {
            const auto& f = e.frames[t];
            if (f.index != t) throw DatasetError("episode '" + e.id + "': frame indices are not 0..T-1");
            if (f.features.empty()) throw DatasetError("episode '" + e.id + "': empty feature vector");
            if (f.features.size() != d.feature_dim)
                throw DatasetError("episode '" + e.id + "': feature dimension mismatch");
            for (double x : f.features)
                if (!std::isfinite(x)) throw DatasetError("episode '" + e.id + "': non-finite feature");
        }
        if (derive_outcome(e) != e.outcome)
            throw DatasetError("episode '" + e.id + "': label contradiction between outcome and goal flags");
    }
}

namespace detail {

inline Episode parse_episode_line(const std::string& line, std::size_t lineno) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
    }
    auto fail = [lineno](const std::string& msg) { return ParseError(lineno, msg); };
    if (!j.is_object()) throw fail("episode must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "id" && key != "outcome" && key != "frames") throw fail("unknown key '" + key + "'");
    if (!j.contains("id") || !j["id"].is_string()) throw fail("missing string field 'id'");
    if (!j.contains("frames") || !j["frames"].is_array()) throw fail("missing array field 'frames'");

    Episode ep;
    ep.id = j["id"].get<std::string>();
    std::size_t expected_t = 0;
    for (const auto& jf : j["frames"]) {
        if (!jf.is_object()) throw fail("frame must be a JSON object");
        for (const auto& [key, _] : jf.items())
            if (key != "t" && key != "features" && key != "goal" && key != "state_key")
                throw fail("unknown frame key '" + key + "'");
        if (!jf.contains("t") || !jf["t"].is_number_integer()) throw fail("frame missing integer 't'");
        if (jf["t"].get<long long>() != static_cast<long long>(expected_t))
            throw fail("frames must have consecutive ascending t starting at 0");
        if (!jf.contains("features") || !jf["features"].is_array()) throw fail("frame missing 'features'");
        Frame f;
        f.index = expected_t++;
        for (const auto& x : jf["features"]) {
            if (!x.is_number()) throw fail("feature values must be numbers");
            f.features.push_back(x.get<double>());
        }
        if (f.features.empty()) throw fail("empty feature vector");
        for (double x : f.features)
            if (!std::isfinite(x)) throw fail("non-finite feature value");
        if (!jf.contains("goal") || !jf["goal"].is_boolean()) throw fail("frame missing boolean 'goal'");
        f.goal = jf["goal"].get<bool>();
        if (jf.contains("state_key")) {
            if (!jf["state_key"].is_string()) throw fail("'state_key' must be a string");
            f.state_key = jf["state_key"].get<std::string>();
        }
        ep.frames.push_back(std::move(f));
    }
    if (ep.frames.empty()) throw fail("episode has no frames");

    const Outcome derived = derive_outcome(ep);
    if (j.contains("outcome")) {
        const auto& o = j["outcome"];
        if (!o.is_string()) throw fail("'outcome' must be a string");
        const auto s = o.get<std::string>();
        Outcome declared;
        if (s == "success")
            declared = Outcome::success;
        else if (s == "timeout")
            declared = Outcome::timed_out;
        else
            throw fail("unknown outcome '" + s + "'");
        if (declared != derived) throw fail("label contradiction: outcome '" + s + "' disagrees with goal flags");
    }
    ep.outcome = derived;
    return ep;
}

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace detail

/// Reads a JSON-Lines episode stream. `max_horizon` of zero means unbounded.
inline Dataset read_dataset(std::istream& in, std::size_t max_horizon = 0) {
    Dataset d;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Episode ep = detail::parse_episode_line(line, lineno);
        const std::size_t dim = ep.frames.front().features.size();
        for (const auto& f : ep.frames)
            if (f.features.size() != dim) throw ParseError(lineno, "feature dimension mismatch within episode");
        if (d.feature_dim == 0)
            d.feature_dim = dim;
        else if (dim != d.feature_dim)
            throw ParseError(lineno, "feature dimension mismatch: expected " + std::to_string(d.feature_dim) +
                                         ", got " + std::to_string(dim));
        if (max_horizon != 0 && ep.frames.size() > max_horizon)
            throw ParseError(lineno, "episode longer than the maximum horizon");
        if (!ids.insert(ep.id).second) throw ParseError(lineno, "duplicate episode id '" + ep.id + "'");
        d.episodes.push_back(std::move(ep));
    }
    if (d.episodes.empty()) throw DatasetError("empty dataset file");
    return d;
}

inline Dataset parse_dataset(const std::string& path, std::size_t max_horizon = 0) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset file '" + path + "'");
    return read_dataset(in, max_horizon);
}

/// Writes one JSON object per line; features use 17 significant digits.
inline void write_dataset(std::ostream& out, const Dataset& d) {
    for (const auto& e : d.episodes) {
        out << "{\"id\":" << nlohmann::json(e.id).dump() << ",\"outcome\":\"" << to_string(e.outcome)
            << "\",\"frames\":[";
        for (std::size_t t = 0; t < e.frames.size(); ++t) {
            const auto& f = e.frames[t];
            if (t) out << ',';
            out << "{\"t\":" << f.index << ",\"features\":[";
            for (std::size_t k = 0; k < f.features.size(); ++k) {
                if (k) out << ',';
                out << detail::format_double(f.features[k]);
            }
            out << "],\"goal\":" << (f.goal ? "true" : "false");
            if (f.state_key) out << ",\"state_key\":" << nlohmann::json(*f.state_key).dump();
            out << '}';
        }
        out << "]}\n";
    }
}

inline void save_dataset(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write dataset file '" + path + "'");
    write_dataset(out, d);
}

/// Episodes that reached a goal, in their original order.
inline Dataset success_subset(const Dataset& d) {
    Dataset out;
    out.feature_dim = d.feature_dim;
    for (const auto& e : d.episodes)
        if (e.succeeded()) out.episodes.push_back(e);
    return out;
}

inline Dataset timeout_subset(const Dataset& d) {
    Dataset out;
    out.feature_dim = d.feature_dim;
    for (const auto& e : d.episodes)
        if (!e.succeeded()) out.episodes.push_back(e);
    return out;
}

/// Stratified train/test split. Each stratum (success, timed out) is shuffled
/// with the seeded engine and round(fraction * size) of it goes to the first
/// half. Both halves keep the input order.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1)");
    std::vector<std::size_t> strata[2];
    for (std::size_t i = 0; i < d.episodes.size(); ++i)
        strata[d.episodes[i].succeeded() ? 0 : 1].push_back(i);
    if (strata[0].empty()) throw DatasetError("empty stratum: no success episodes to split");
    if (strata[1].empty()) throw DatasetError("empty stratum: no timed-out episodes to split");

    std::mt19937_64 rng(seed);
    std::vector<char> to_train(d.episodes.size(), 0);
    for (auto& s : strata) {
        std::shuffle(s.begin(), s.end(), rng);
        const auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(s.size())));
        for (std::size_t j = 0; j < k && j < s.size(); ++j) to_train[s[j]] = 1;
    }
    std::pair<Dataset, Dataset> out;
    out.first.feature_dim = out.second.feature_dim = d.feature_dim;
    for (std::size_t i = 0; i < d.episodes.size(); ++i)
        (to_train[i] ? out.first : out.second).episodes.push_back(d.episodes[i]);
    return out;
}

} // namespace livope

#endif
