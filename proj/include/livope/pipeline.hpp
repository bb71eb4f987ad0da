#ifndef LIVOPE_PIPELINE_HPP
#define LIVOPE_PIPELINE_HPP

// Experiment plumbing: configuration, per-seed generate/fit/eval, checkpoints,
// summary tables, significance tests and a content-hashed manifest.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "livope/baselines.hpp"
#include "livope/bootstrap.hpp"
#include "livope/dataset.hpp"
#include "livope/error.hpp"
#include "livope/liveness.hpp"
#include "livope/metrics.hpp"
#include "livope/nn/mlp.hpp"
#include "livope/oracle.hpp"
#include "livope/replay.hpp"
#include "livope/stats.hpp"
#include "livope/synthetic_env.hpp"
#include "livope/training.hpp"
#include "livope/value_learning.hpp"

namespace livope {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Method { ours, ours_nb, td0, mc, mcd };

inline const char* to_string(Method m) {
    switch (m) {
    case Method::ours: return "ours";
    case Method::ours_nb: return "ours-nb";
    case Method::td0: return "td0";
    case Method::mc: return "mc";
    case Method::mcd: return "mcd";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (Method m : {Method::ours, Method::ours_nb, Method::td0, Method::mc, Method::mcd})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown method '" + s + "' (expected ours, ours-nb, td0, mc or mcd)");
}

inline bool is_liveness(Method m) { return m == Method::ours || m == Method::ours_nb; }

struct GenerateConfig {
    SlipGridConfig grid;
    std::size_t train_successes = 100;
    std::size_t train_timeouts = 100;
    std::size_t test_successes = 50;
    std::size_t test_timeouts = 50;
};

struct OracleSettings {
    std::vector<double> contraction_gammas{0.5, 0.9, 0.993};
    std::size_t contraction_pairs = 1000;
    std::size_t bound_mdps = 20;
    std::size_t bound_horizon = 6;
    oracle::ConsistencyConfig consistency;
    std::optional<std::string> anchors_path; // anchor table to audit
    std::optional<std::string> dataset_path; // tabular dataset to derive anchors from
};

struct RunConfig {
    static constexpr int schema_version = 1;

    std::vector<Method> methods{Method::ours, Method::ours_nb, Method::td0, Method::mc, Method::mcd};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::string out = "runs";
    std::optional<std::string> train_path;
    std::optional<std::string> test_path;
    GenerateConfig generate;
    Discount gamma{0.95};
    nn::NetworkSpec network;
    ReplayConfig replay;
    TrainConfig train;
    std::size_t standard_horizon = 10;
    CumulativeRewardScheme scheme;
    std::size_t mcd_bins = 201;
    OracleSettings oracle;
    std::size_t threads = 0; // 0: hardware concurrency

    /// Desk-scale experiment: a 3x3 slip grid with exact one-hot features.
    static RunConfig desk() {
        RunConfig c;
        c.generate.grid = {3, 0.3, 20, 0, 0.0};
        c.gamma = Discount(0.95);
        c.network.hidden_layers = 2;
        c.network.hidden_units = 64;
        c.train.learning_rate = 1e-3;
        c.train.batch_size = 128;
        c.train.epochs = 100;
        c.train.optimizer = nn::OptimizerKind::adam;
        c.standard_horizon = 10;
        c.scheme = {40.0, 80.0, Discount(0.95)};
        return c;
    }

    /// Full-scale hyperparameters: long timeout, 5x512 network, SGD.
    static RunConfig full() {
        RunConfig c;
        c.generate.grid = {4, 0.2, 250, 0, 0.05};
        c.gamma = Discount(0.993);
        c.network.hidden_layers = 5;
        c.network.hidden_units = 512;
        c.train.learning_rate = 1e-5;
        c.train.batch_size = 512;
        c.train.epochs = 100;
        c.train.optimizer = nn::OptimizerKind::sgd;
        c.standard_horizon = 200;
        c.scheme = {500.0, 500.0, Discount(0.993)};
        return c;
    }

    void validate() const {
        if (methods.empty()) throw ConfigError("no methods configured");
        if (seeds.empty()) throw ConfigError("no seeds configured");
        if (train_path.has_value() != test_path.has_value())
            throw ConfigError("train and test dataset paths must be given together");
        for (const auto* p : {&train_path, &test_path})
            if (*p && !fs::exists(**p)) throw ConfigError("dataset path does not exist: " + **p);
        if (oracle.anchors_path && !fs::exists(*oracle.anchors_path))
            throw ConfigError("anchor table path does not exist: " + *oracle.anchors_path);
        if (oracle.dataset_path && !fs::exists(*oracle.dataset_path))
            throw ConfigError("oracle dataset path does not exist: " + *oracle.dataset_path);
        if (!train_path) generate.grid.validate();
        if (standard_horizon < 1) throw ConfigError("standard_horizon must be at least 1");
        if (mcd_bins < 3) throw ConfigError("mcd_bins must be at least 3");
        replay.validate();
        train.validate();
        scheme.validate();
    }
};

// ---------------------------------------------------------------------------
// Config JSON. Every object is read through a reader that rejects keys it did
// not consume.

namespace detail {

class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw ConfigError(where_ + " must be a JSON object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    const json& sub(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown key '" + k + "' in " + where_);
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline Discount read_gamma(ObjectReader& r, const char* key, Discount current) {
    double g = current.gamma();
    r.get(key, g);
    return Discount(g);
}

} // namespace detail

inline RunConfig config_from_json(const json& j) {
    detail::ObjectReader top(j, "config");
    int version = RunConfig::schema_version;
    top.get("schema_version", version);
    if (version != RunConfig::schema_version)
        throw ConfigError("unsupported schema_version " + std::to_string(version));
    std::string preset = "desk";
    top.get("preset", preset);
    RunConfig c;
    if (preset == "desk")
        c = RunConfig::desk();
    else if (preset == "full")
        c = RunConfig::full();
    else
        throw ConfigError("unknown preset '" + preset + "' (expected desk or full)");

    if (top.has("methods") || top.has("method")) {
        std::vector<std::string> names;
        top.get("methods", names);
        std::string one;
        top.get("method", one);
        if (!one.empty()) names = {one};
        c.methods.clear();
        for (const auto& n : names) c.methods.push_back(parse_method(n));
    }
    top.get("seeds", c.seeds);
    top.get("out", c.out);
    if (top.has("train")) c.train_path = top.sub("train").get<std::string>();
    if (top.has("test")) c.test_path = top.sub("test").get<std::string>();
    c.gamma = detail::read_gamma(top, "gamma", c.gamma);
    top.get("standard_horizon", c.standard_horizon);
    top.get("mcd_bins", c.mcd_bins);
    top.get("threads", c.threads);

    if (top.has("generate")) {
        detail::ObjectReader r(top.sub("generate"), "generate");
        auto& g = c.generate;
        r.get("grid_side", g.grid.grid_side);
        r.get("slip_prob", g.grid.slip_prob);
        r.get("timeout", g.grid.timeout);
        r.get("feature_noise", g.grid.feature_noise);
        r.get("train_successes", g.train_successes);
        r.get("train_timeouts", g.train_timeouts);
        r.get("test_successes", g.test_successes);
        r.get("test_timeouts", g.test_timeouts);
        r.finish();
    }
    if (top.has("network")) {
        detail::ObjectReader r(top.sub("network"), "network");
        r.get("hidden_layers", c.network.hidden_layers);
        r.get("hidden_units", c.network.hidden_units);
        r.finish();
    }
    if (top.has("replay")) {
        detail::ObjectReader r(top.sub("replay"), "replay");
        r.get("capacity", c.replay.capacity);
        r.get("alpha", c.replay.alpha);
        r.get("beta_start", c.replay.beta_start);
        r.get("beta_end", c.replay.beta_end);
        r.get("grad_steps_per_batch", c.replay.grad_steps_per_batch);
        r.finish();
    }
    if (top.has("training")) {
        detail::ObjectReader r(top.sub("training"), "training");
        r.get("learning_rate", c.train.learning_rate);
        r.get("batch_size", c.train.batch_size);
        r.get("epochs", c.train.epochs);
        r.get("target_sync_interval", c.train.target_sync_interval);
        std::string opt = c.train.optimizer == nn::OptimizerKind::adam ? "adam" : "sgd";
        r.get("optimizer", opt);
        if (opt == "adam")
            c.train.optimizer = nn::OptimizerKind::adam;
        else if (opt == "sgd")
            c.train.optimizer = nn::OptimizerKind::sgd;
        else
            throw ConfigError("unknown optimizer '" + opt + "' (expected sgd or adam)");
        r.finish();
    }
    if (top.has("scheme")) {
        detail::ObjectReader r(top.sub("scheme"), "scheme");
        r.get("c_fail", c.scheme.c_fail);
        r.get("normalization", c.scheme.normalization);
        c.scheme.gamma = detail::read_gamma(r, "gamma", c.scheme.gamma);
        r.finish();
    } else if (j.contains("gamma")) {
        c.scheme.gamma = c.gamma;
    }
    if (top.has("oracle")) {
        detail::ObjectReader r(top.sub("oracle"), "oracle");
        auto& o = c.oracle;
        r.get("contraction_gammas", o.contraction_gammas);
        for (double g : o.contraction_gammas) Discount{g};
        r.get("contraction_pairs", o.contraction_pairs);
        r.get("bound_mdps", o.bound_mdps);
        r.get("bound_horizon", o.bound_horizon);
        r.get("consistency_sizes", o.consistency.sizes);
        r.get("consistency_seeds", o.consistency.seeds);
        r.get("consistency_gamma", o.consistency.gamma);
        Discount{o.consistency.gamma};
        r.get("consistency_timeout", o.consistency.grid.timeout);
        if (r.has("anchors")) o.anchors_path = r.sub("anchors").get<std::string>();
        if (r.has("dataset")) o.dataset_path = r.sub("dataset").get<std::string>();
        r.finish();
    }
    top.finish();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return config_from_json(j);
}

inline json config_to_json(const RunConfig& c) {
    std::vector<std::string> methods;
    for (auto m : c.methods) methods.push_back(to_string(m));
    json j = {{"schema_version", RunConfig::schema_version},
              {"methods", methods},
              {"seeds", c.seeds},
              {"out", c.out},
              {"gamma", c.gamma.gamma()},
              {"standard_horizon", c.standard_horizon},
              {"mcd_bins", c.mcd_bins},
              {"threads", c.threads},
              {"generate",
               {{"grid_side", c.generate.grid.grid_side},
                {"slip_prob", c.generate.grid.slip_prob},
                {"timeout", c.generate.grid.timeout},
                {"feature_noise", c.generate.grid.feature_noise},
                {"train_successes", c.generate.train_successes},
                {"train_timeouts", c.generate.train_timeouts},
                {"test_successes", c.generate.test_successes},
                {"test_timeouts", c.generate.test_timeouts}}},
              {"network", {{"hidden_layers", c.network.hidden_layers}, {"hidden_units", c.network.hidden_units}}},
              {"replay",
               {{"capacity", c.replay.capacity},
                {"alpha", c.replay.alpha},
                {"beta_start", c.replay.beta_start},
                {"beta_end", c.replay.beta_end},
                {"grad_steps_per_batch", c.replay.grad_steps_per_batch}}},
              {"training",
               {{"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"target_sync_interval", c.train.target_sync_interval},
                {"optimizer", c.train.optimizer == nn::OptimizerKind::adam ? "adam" : "sgd"}}},
              {"scheme",
               {{"c_fail", c.scheme.c_fail},
                {"normalization", c.scheme.normalization},
                {"gamma", c.scheme.gamma.gamma()}}}};
    if (c.train_path) j["train"] = *c.train_path;
    if (c.test_path) j["test"] = *c.test_path;
    return j;
}

// ---------------------------------------------------------------------------
// Checkpoints.

struct Checkpoint {
    Method method = Method::ours;
    Discount gamma{0.95};
    StepsModel steps = LivenessSteps{};
    std::size_t standard_horizon = 10;
    nn::Mlp network{nn::NetworkSpec{1}};
    std::optional<nn::Mlp> anchor;
    std::optional<ReturnDistributionSpec> distribution;

    /// Per-frame values for every episode of `d`.
    std::map<std::string, ValueTrace> values(const Dataset& d) const {
        const FrameTable t = build_frame_table(d);
        std::vector<double> v;
        if (distribution) {
            BaselineFit fit{network, distribution, {}};
            v = baseline_values(fit, t.features);
        } else {
            v = predict_all(network, t.features);
        }
        std::map<std::string, ValueTrace> out;
        std::size_t row = 0;
        for (const auto& e : d.episodes) {
            auto& tr = out[e.id];
            for (std::size_t i = 0; i < e.frames.size(); ++i) tr.push_back(v[row++]);
        }
        return out;
    }

    MetricConfig metric_config(std::optional<std::size_t> horizon = std::nullopt) const {
        return {horizon.value_or(standard_horizon), gamma, steps};
    }
};

inline json checkpoint_to_json(const Checkpoint& c) {
    json steps = std::holds_alternative<LivenessSteps>(c.steps)
                     ? json{{"kind", "liveness"}}
                     : json{{"kind", "cumulative"}, {"norm", std::get<CumulativeSteps>(c.steps).norm}};
    json j = {{"format", "livope-checkpoint"},
              {"version", 1},
              {"method", to_string(c.method)},
              {"gamma", c.gamma.gamma()},
              {"steps_model", steps},
              {"standard_horizon", c.standard_horizon},
              {"network", c.network.to_json()}};
    if (c.anchor) j["anchor_network"] = c.anchor->to_json();
    if (c.distribution)
        j["distribution"] = {{"num_bins", c.distribution->num_bins},
                             {"lo", c.distribution->lo},
                             {"hi", c.distribution->hi}};
    return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
    Checkpoint c;
    try {
        if (j.at("format").get<std::string>() != "livope-checkpoint" || j.at("version").get<int>() != 1)
            throw ConfigError("unsupported checkpoint format");
        c.method = parse_method(j.at("method").get<std::string>());
        c.gamma = Discount(j.at("gamma").get<double>());
        const auto& s = j.at("steps_model");
        if (s.at("kind").get<std::string>() == "liveness")
            c.steps = LivenessSteps{};
        else
            c.steps = CumulativeSteps{s.at("norm").get<double>()};
        c.standard_horizon = j.at("standard_horizon").get<std::size_t>();
        c.network = nn::Mlp::from_json(j.at("network"));
        if (j.contains("anchor_network")) c.anchor = nn::Mlp::from_json(j.at("anchor_network"));
        if (j.contains("distribution")) {
            const auto& d = j.at("distribution");
            c.distribution = ReturnDistributionSpec{d.at("num_bins").get<std::size_t>(), d.at("lo").get<double>(),
                                                    d.at("hi").get<double>()};
            c.distribution->validate();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Files and hashes.

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
    if (!out) throw Error("write failed for " + p.string());
}

inline std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Lists every regular file under `root` (except the manifest itself) with
/// its size and FNV-1a 64-bit hash, in path order.
inline json build_manifest(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    json list = json::array();
    for (const auto& f : files) {
        const std::string bytes = read_file(f);
        list.push_back({{"path", fs::relative(f, root).generic_string()},
                        {"bytes", bytes.size()},
                        {"fnv1a64", hex64(fnv1a64(bytes))}});
    }
    return {{"hash", "fnv1a64"}, {"files", list}};
}

inline void write_manifest(const fs::path& root) { write_file(root / "manifest.json", build_manifest(root).dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Stages.

struct SeedData {
    Dataset train;
    Dataset test;
};

inline fs::path seed_dir(const RunConfig& c, std::uint64_t seed) { return fs::path(c.out) / ("seed-" + std::to_string(seed)); }

/// Balanced train and test sets from disjoint episode streams of one seed.
inline SeedData generate_data(const RunConfig& c, std::uint64_t seed, const fs::path& dir) {
    const auto& g = c.generate;
    const auto [mdp, pol] = build_slipgrid(g.grid);
    SeedData d{rollout_balanced(mdp, pol, g.train_successes, g.train_timeouts, g.grid.timeout, 2 * seed,
                                g.grid.feature_noise),
               rollout_balanced(mdp, pol, g.test_successes, g.test_timeouts, g.grid.timeout, 2 * seed + 1,
                                g.grid.feature_noise)};
    save_dataset((dir / "train.jsonl").string(), d.train);
    save_dataset((dir / "test.jsonl").string(), d.test);
    write_file(dir / "mdp.json", mdp_to_json(mdp, pol).dump() + "\n");
    return d;
}

inline SeedData load_or_generate(const RunConfig& c, std::uint64_t seed, const fs::path& dir) {
    if (c.train_path) return {parse_dataset(*c.train_path), parse_dataset(*c.test_path)};
    return generate_data(c, seed, dir);
}

struct FitOutput {
    Checkpoint checkpoint;
    std::vector<CurvePoint> curve;
};

inline FitOutput fit_method(const RunConfig& c, Method m, const Dataset& train, std::uint64_t seed) {
    TrainConfig tc = c.train;
    tc.seed = seed;
    tc.gamma = is_liveness(m) ? c.gamma : c.scheme.gamma;
    FitOutput out;
    out.checkpoint.method = m;
    out.checkpoint.standard_horizon = c.standard_horizon;
    if (is_liveness(m)) {
        auto fit = fit_liveness_value(train, c.network, c.replay, tc, m == Method::ours);
        out.checkpoint.gamma = c.gamma;
        out.checkpoint.steps = LivenessSteps{};
        out.checkpoint.network = std::move(fit.value);
        out.checkpoint.anchor = std::move(fit.anchor);
        out.curve = std::move(fit.curve);
        return out;
    }
    BaselineFit fit = m == Method::td0  ? fit_td0(train, c.network, c.replay, tc, c.scheme)
                      : m == Method::mc ? fit_mc(train, c.network, c.replay, tc, c.scheme)
                                        : fit_mcd(train, c.network, c.replay, tc, c.scheme, c.mcd_bins);
    out.checkpoint.gamma = c.scheme.gamma;
    out.checkpoint.steps = c.scheme.steps_model();
    out.checkpoint.network = std::move(fit.network);
    out.checkpoint.distribution = fit.distribution;
    out.curve = std::move(fit.curve);
    return out;
}

inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream ss;
    write_training_curve_csv(ss, curve);
    return ss.str();
}

struct EvalOutput {
    MetricReport report;
    std::string steps_csv;
};

inline EvalOutput evaluate_checkpoint(const Checkpoint& ck, const Dataset& test,
                                      std::optional<std::size_t> horizon = std::nullopt) {
    const auto values = ck.values(test);
    EvalOutput out;
    out.report = evaluate_metrics(test, values, ck.metric_config(horizon));
    std::vector<NamedTrace> traces;
    for (const auto& e : test.episodes) traces.push_back({e.id, values.at(e.id)});
    std::ostringstream ss;
    write_value_traces_csv(ss, traces, ck.gamma, ck.steps);
    out.steps_csv = ss.str();
    return out;
}

/// fit + eval of one method into dir/<method>/.
inline MetricReport run_method(const RunConfig& c, Method m, const SeedData& data, std::uint64_t seed,
                               const fs::path& dir) {
    const fs::path mdir = dir / to_string(m);
    fs::create_directories(mdir);
    const FitOutput fit = fit_method(c, m, data.train, seed);
    write_file(mdir / "checkpoint.json", checkpoint_to_json(fit.checkpoint).dump() + "\n");
    write_file(mdir / "curve.csv", curve_csv(fit.curve));
    const EvalOutput ev = evaluate_checkpoint(fit.checkpoint, data.test);
    write_file(mdir / "report.json", report_to_json(ev.report).dump(2) + "\n");
    write_file(mdir / "steps.csv", ev.steps_csv);
    return ev.report;
}

// ---------------------------------------------------------------------------
// Summaries.

/// reports[method][seed index]
using ReportGrid = std::map<std::string, std::vector<MetricReport>>;

inline double sample_std(const std::vector<double>& x) {
    return x.size() < 2 ? 0.0 : std::sqrt(stats::variance(x));
}

inline std::string mean_pm_std(const std::vector<double>& x) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << stats::mean(x) << "±" << sample_std(x);
    return ss.str();
}

inline std::vector<double> metric_column(const std::vector<MetricReport>& rs, const std::string& metric) {
    std::vector<double> x;
    for (const auto& r : rs) x.push_back(metric == "success" ? r.success : metric == "failure" ? r.failure : r.composite);
    return x;
}

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"success", "failure", "composite"};
    return names;
}

inline std::string summary_csv(const ReportGrid& g, const std::vector<std::string>& order) {
    std::ostringstream ss;
    ss << "method,success,failure,composite\n";
    for (const auto& m : order) {
        ss << m;
        for (const auto& k : metric_names()) ss << ',' << mean_pm_std(metric_column(g.at(m), k));
        ss << '\n';
    }
    return ss.str();
}

inline std::string summary_text(const ReportGrid& g, const std::vector<std::string>& order) {
    std::ostringstream ss;
    ss << std::left << std::setw(10) << "method";
    for (const auto& k : metric_names()) ss << std::setw(18) << k;
    ss << '\n';
    for (const auto& m : order) {
        ss << std::setw(10) << m;
        // setw counts bytes; the plus-minus sign is two bytes in UTF-8.
        for (const auto& k : metric_names()) ss << std::setw(19) << mean_pm_std(metric_column(g.at(m), k));
        ss << '\n';
    }
    return ss.str();
}

/// Alexander-Govern omnibus per metric plus BH-corrected pairwise Welch tests.
inline json significance_tests(const ReportGrid& g, const std::vector<std::string>& order, double alpha = 0.05) {
    json out = json::object();
    for (const auto& k : metric_names()) {
        json entry;
        std::vector<std::vector<double>> groups;
        for (const auto& m : order) groups.push_back(metric_column(g.at(m), k));
        try {
            if (groups.size() >= 2) {
                const auto ag = stats::alexander_govern(groups);
                entry["alexander_govern"] = {{"statistic", ag.statistic}, {"p", ag.p}};
            }
        } catch (const DomainError& e) {
            entry["alexander_govern"] = {{"error", e.what()}};
        }
        std::vector<double> ps;
        json pairs = json::array();
        for (std::size_t a = 0; a < order.size(); ++a)
            for (std::size_t b = a + 1; b < order.size(); ++b) {
                try {
                    const auto w = stats::welch_t(groups[a], groups[b]);
                    pairs.push_back({{"a", order[a]}, {"b", order[b]}, {"t", w.t}, {"dof", w.dof}, {"p", w.p}});
                    ps.push_back(w.p);
                } catch (const DomainError& e) {
                    pairs.push_back({{"a", order[a]}, {"b", order[b]}, {"error", e.what()}});
                }
            }
        const auto rejected = stats::benjamini_hochberg(ps, alpha);
        std::size_t pi = 0;
        for (auto& p : pairs)
            if (p.contains("p")) {
                p["significant"] = std::find(rejected.begin(), rejected.end(), pi) != rejected.end();
                ++pi;
            }
        entry["pairwise_welch"] = pairs;
        entry["alpha"] = alpha;
        out[k] = entry;
    }
    return out;
}

inline std::string significance_text(const json& s) {
    std::ostringstream ss;
    for (const auto& k : metric_names()) {
        const auto& e = s.at(k);
        ss << k << ": ";
        if (e.contains("alexander_govern") && e["alexander_govern"].contains("p"))
            ss << "Alexander-Govern A=" << e["alexander_govern"]["statistic"].get<double>()
               << " p=" << e["alexander_govern"]["p"].get<double>();
        ss << '\n';
        for (const auto& p : e.at("pairwise_welch")) {
            ss << "  " << p["a"].get<std::string>() << " vs " << p["b"].get<std::string>() << ": ";
            if (p.contains("p"))
                ss << "t=" << p["t"].get<double>() << " p=" << p["p"].get<double>()
                   << (p["significant"].get<bool>() ? " *" : "");
            else
                ss << p["error"].get<std::string>();
            ss << '\n';
        }
    }
    return ss.str();
}

/// Collects seed-*/<method>/report.json under `root`.
inline ReportGrid collect_reports(const fs::path& root, std::vector<std::string>& order) {
    ReportGrid g;
    std::vector<fs::path> seeds;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && e.path().filename().string().rfind("seed-", 0) == 0) seeds.push_back(e.path());
    std::sort(seeds.begin(), seeds.end());
    for (const auto& s : seeds)
        for (Method m : {Method::ours, Method::ours_nb, Method::td0, Method::mc, Method::mcd}) {
            const fs::path rp = s / to_string(m) / "report.json";
            if (!fs::exists(rp)) continue;
            g[to_string(m)].push_back(report_from_json(json::parse(read_file(rp))));
        }
    order.clear();
    for (Method m : {Method::ours, Method::ours_nb, Method::td0, Method::mc, Method::mcd})
        if (g.count(to_string(m))) order.push_back(to_string(m));
    if (g.empty()) throw DatasetError("no seed-*/<method>/report.json files under " + root.string());
    return g;
}

inline void write_summary(const fs::path& root, const ReportGrid& g, const std::vector<std::string>& order) {
    write_file(root / "summary.csv", summary_csv(g, order));
    write_file(root / "summary.txt", summary_text(g, order));
}

inline void write_stats(const fs::path& root, const ReportGrid& g, const std::vector<std::string>& order) {
    const json s = significance_tests(g, order);
    write_file(root / "stats.json", s.dump(2) + "\n");
    write_file(root / "stats.txt", significance_text(s));
}

/// generate -> fit -> eval for every seed and method, then summary, stats and
/// manifest. A failing seed leaves a .failed marker in its directory.
inline ReportGrid run_pipeline(const RunConfig& c) {
    c.validate();
    const fs::path root(c.out);
    fs::create_directories(root);
    write_file(root / "config.json", config_to_json(c).dump(2) + "\n");

    std::vector<std::map<std::string, MetricReport>> per_seed(c.seeds.size());
    std::vector<std::string> errors(c.seeds.size());
    auto work = [&](std::size_t i) {
        const fs::path dir = seed_dir(c, c.seeds[i]);
        try {
            fs::create_directories(dir);
            fs::remove(dir / ".failed");
            const SeedData data = load_or_generate(c, c.seeds[i], dir);
            for (Method m : c.methods) per_seed[i][to_string(m)] = run_method(c, m, data, c.seeds[i], dir);
        } catch (const std::exception& e) {
            errors[i] = e.what();
            std::ofstream(dir / ".failed") << e.what() << '\n';
        }
    };
    std::size_t threads = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, c.seeds.size());
    std::vector<std::thread> pool;
    std::mutex mu;
    std::size_t next = 0;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= c.seeds.size()) return;
                    i = next++;
                }
                work(i);
            }
        });
    for (auto& th : pool) th.join();
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) {
            std::ofstream(root / ".failed") << "seed " << c.seeds[i] << ": " << errors[i] << '\n';
            throw Error("seed " + std::to_string(c.seeds[i]) + " failed: " + errors[i]);
        }

    ReportGrid g;
    std::vector<std::string> order;
    for (Method m : c.methods) order.push_back(to_string(m));
    for (const auto& s : per_seed)
        for (const auto& m : order) g[m].push_back(s.at(m));
    write_summary(root, g, order);
    write_stats(root, g, order);
    write_manifest(root);
    return g;
}

// ---------------------------------------------------------------------------
// Oracle suite.

inline std::vector<oracle::CheckResult> run_oracle_suite(const RunConfig& c) {
    const auto& o = c.oracle;
    std::vector<oracle::CheckResult> r;
    r.push_back(oracle::check_closed_form(Discount(0.993)));
    r.push_back(oracle::check_contraction(o.contraction_gammas, o.contraction_pairs));
    r.push_back(oracle::check_one_step_bound(o.bound_mdps, o.bound_horizon));
    r.push_back(oracle::check_three_episode());
    r.push_back(oracle::check_consistency(o.consistency));
    AnchorTable anchors;
    if (o.anchors_path) {
        anchors = anchors_from_json(json::parse(read_file(*o.anchors_path)));
    } else if (o.dataset_path) {
        anchors = compute_anchors(success_subset(parse_dataset(*o.dataset_path)), c.gamma);
    } else {
        anchors = two_stage_evaluate(oracle::three_episode_fixture(), Discount(0.5)).anchors;
    }
    r.push_back(oracle::check_anchor_codomain(anchors));
    return r;
}

inline json oracle_report_json(const std::vector<oracle::CheckResult>& checks) {
    json list = json::array();
    bool all = true;
    for (const auto& ch : checks) {
        list.push_back({{"name", ch.name}, {"passed", ch.passed}, {"margin", ch.margin}, {"detail", ch.detail}});
        all = all && ch.passed;
    }
    return {{"all_passed", all}, {"checks", list}};
}

} // namespace livope

#endif
