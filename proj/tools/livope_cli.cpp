// livope command-line front end.
//
// Exit status: 0 on success, 1 when a stage or an oracle check fails, 2 on
// invalid configuration or usage.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "livope/pipeline.hpp"

using namespace livope;

namespace {

struct Flags {
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::string out;
    std::string method;
    std::string train;
    std::string test;
    std::string checkpoint;
    std::string anchors;
    std::string dataset;
    std::optional<std::size_t> horizon;
};

// File values first, then flags.
RunConfig resolve(const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig::desk() : load_config(f.config);
    if (!f.seeds.empty()) c.seeds = f.seeds;
    if (!f.out.empty()) c.out = f.out;
    if (!f.method.empty()) c.methods = {parse_method(f.method)};
    if (!f.train.empty()) c.train_path = f.train;
    if (!f.test.empty()) c.test_path = f.test;
    if (!f.anchors.empty()) c.oracle.anchors_path = f.anchors;
    if (!f.dataset.empty()) c.oracle.dataset_path = f.dataset;
    if (f.horizon) c.standard_horizon = *f.horizon;
    return c;
}

void require_existing(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string(what) + " path is required");
    if (!fs::exists(path)) throw ConfigError(std::string(what) + " path does not exist: " + path);
}

int cmd_generate(const Flags& f) {
    RunConfig c = resolve(f);
    c.generate.grid.validate();
    for (auto seed : c.seeds) {
        const fs::path dir = seed_dir(c, seed);
        fs::create_directories(dir);
        const SeedData d = generate_data(c, seed, dir);
        std::cout << dir.string() << ": " << d.train.episodes.size() << " train, " << d.test.episodes.size()
                  << " test episodes\n";
    }
    write_manifest(c.out);
    return 0;
}

int cmd_fit(const Flags& f) {
    RunConfig c = resolve(f);
    require_existing(f.train, "--train");
    if (c.methods.size() != 1) throw ConfigError("fit needs exactly one --method");
    c.train.validate();
    c.replay.validate();
    c.scheme.validate();
    const Dataset train = parse_dataset(f.train);
    const fs::path out(c.out);
    fs::create_directories(out);
    const auto fit = fit_method(c, c.methods.front(), train, c.seeds.front());
    write_file(out / "checkpoint.json", checkpoint_to_json(fit.checkpoint).dump() + "\n");
    write_file(out / "curve.csv", curve_csv(fit.curve));
    write_manifest(out);
    std::cout << "wrote " << (out / "checkpoint.json").string() << "\n";
    return 0;
}

int cmd_eval(const Flags& f) {
    require_existing(f.checkpoint, "--checkpoint");
    require_existing(f.test, "--test");
    const Checkpoint ck = checkpoint_from_json(json::parse(read_file(f.checkpoint)));
    const Dataset test = parse_dataset(f.test);
    const fs::path out(f.out.empty() ? "." : f.out);
    const EvalOutput ev = evaluate_checkpoint(ck, test, f.horizon);
    write_file(out / "report.json", report_to_json(ev.report).dump(2) + "\n");
    write_file(out / "steps.csv", ev.steps_csv);
    write_manifest(out);
    std::cout << "success " << ev.report.success << "  failure " << ev.report.failure << "  composite "
              << ev.report.composite << "\n";
    return 0;
}

int cmd_report(const Flags& f) {
    const fs::path root(f.out.empty() ? "runs" : f.out);
    std::vector<std::string> order;
    const ReportGrid g = collect_reports(root, order);
    write_summary(root, g, order);
    write_manifest(root);
    std::cout << summary_text(g, order);
    return 0;
}

int cmd_stats(const Flags& f) {
    const fs::path root(f.out.empty() ? "runs" : f.out);
    std::vector<std::string> order;
    const ReportGrid g = collect_reports(root, order);
    write_stats(root, g, order);
    write_manifest(root);
    std::cout << read_file(root / "stats.txt");
    return 0;
}

int cmd_oracle(const Flags& f) {
    RunConfig c = resolve(f);
    const auto checks = run_oracle_suite(c);
    const json report = oracle_report_json(checks);
    for (const auto& ch : checks)
        std::cout << (ch.passed ? "PASS " : "FAIL ") << ch.name << "  margin=" << ch.margin << "  " << ch.detail
                  << "\n";
    if (!f.out.empty()) {
        write_file(fs::path(f.out) / "oracle.json", report.dump(2) + "\n");
        write_manifest(f.out);
    }
    return report["all_passed"].get<bool>() ? 0 : 1;
}

int cmd_run(const Flags& f) {
    const RunConfig c = resolve(f);
    std::vector<std::string> order;
    for (auto m : c.methods) order.push_back(to_string(m));
    const ReportGrid g = run_pipeline(c);
    std::cout << summary_text(g, order);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Liveness-based offline policy evaluation"};
    app.require_subcommand(1);
    Flags f;

    auto common = [&](CLI::App* s) {
        s->add_option("--config", f.config, "JSON run configuration");
        s->add_option("--seed", f.seeds, "seed (repeatable)");
        s->add_option("--out", f.out, "output directory");
        s->add_option("--method", f.method, "ours | ours-nb | td0 | mc | mcd");
    };
    auto* gen = app.add_subcommand("generate", "roll out slip-grid train/test datasets per seed");
    common(gen);
    auto* fit = app.add_subcommand("fit", "train one method on a dataset and write a checkpoint");
    common(fit);
    fit->add_option("--train", f.train, "training dataset (JSON Lines)");
    auto* ev = app.add_subcommand("eval", "score a checkpoint on a test dataset");
    common(ev);
    ev->add_option("--checkpoint", f.checkpoint, "checkpoint.json");
    ev->add_option("--test", f.test, "test dataset (JSON Lines)");
    ev->add_option("--horizon", f.horizon, "standard horizon override");
    auto* rep = app.add_subcommand("report", "mean±std summary over seed-*/<method>/report.json");
    common(rep);
    auto* st = app.add_subcommand("stats", "Alexander-Govern and BH-corrected Welch tests over seed reports");
    common(st);
    auto* orc = app.add_subcommand("oracle", "run the exact verification checks");
    common(orc);
    orc->add_option("--anchors", f.anchors, "anchor table JSON to audit");
    orc->add_option("--dataset", f.dataset, "tabular dataset to derive anchors from");
    auto* run = app.add_subcommand("run", "generate, fit, eval, report and stats for every seed and method");
    common(run);
    run->add_option("--train", f.train, "training dataset instead of generated data");
    run->add_option("--test", f.test, "test dataset instead of generated data");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        // Validate the method name before any work so a typo fails fast.
        if (!f.method.empty()) parse_method(f.method);
        if (gen->parsed()) return cmd_generate(f);
        if (fit->parsed()) return cmd_fit(f);
        if (ev->parsed()) return cmd_eval(f);
        if (rep->parsed()) return cmd_report(f);
        if (st->parsed()) return cmd_stats(f);
        if (orc->parsed()) return cmd_oracle(f);
        if (run->parsed()) return cmd_run(f);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
