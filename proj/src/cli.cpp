#include "gridwatch/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gridwatch/config.hpp"

namespace gridwatch::cfg {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitSimError = 3;
constexpr int kExitDegenerate = 4;

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("GRIDWATCH_SEED");
    if (!v || !*v) return std::nullopt;
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw netsim::IoError("cannot open " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

int fail(std::ostream& err, int code, const std::string& message) {
    err << "error: " << code << ": " << message << "\n";
    return code;
}

int run_deploy(const std::string& out_path, int stations, double duration,
               std::optional<std::uint64_t> seed_flag, bool normal_ops, std::ostream& out,
               std::ostream& err) {
    try {
        ScenarioConfig config = default_config();
        config.grid.n_stations = stations;
        config.simulation.duration_s = duration;
        std::optional<std::uint64_t> seed = seed_flag;
        if (!seed) seed = env_seed();
        if (seed) {
            config.grid.seed = *seed;
            config.simulation.seed = *seed;
            config.evaluation.seed = *seed;
        }
        if (normal_ops) apply_normal_ops(config);
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw netsim::IoError("cannot open " + out_path);
        f << config_to_json(config);
        if (!f) throw netsim::IoError("write failed for " + out_path);
        out << "wrote " << out_path << " (stations " << config.grid.n_stations << ", duration "
            << config.simulation.duration_s << " s, attack "
            << (config.attack.preset.empty() ? "custom" : config.attack.preset) << ")\n";
        return kExitOk;
    } catch (const std::exception& e) {
        return fail(err, kExitBadInput, e.what());
    }
}

int run_execute(const std::string& config_path, const std::string& out_dir, std::ostream& out,
                std::ostream& err) {
    ScenarioConfig config;
    try {
        config = config_from_json(read_file(config_path));
        if (const auto seed = env_seed()) {
            config.grid.seed = *seed;
            config.simulation.seed = *seed;
            config.evaluation.seed = *seed;
        }
    } catch (const std::exception& e) {
        return fail(err, kExitBadInput, e.what());
    }
    try {
        const auto summary = execute_scenario(config, out_dir);
        out << "scenario " << summary.scenario_hash << ": " << summary.frame_count
            << " frames captured\n";
        for (const auto& [cls, n] : summary.class_counts) out << "  " << cls << ": " << n << "\n";
        out << "artifacts: " << out_dir << "/capture.pcap, " << out_dir << "/events.jsonl\n";
        return kExitOk;
    } catch (const std::exception& e) {
        return fail(err, kExitSimError, e.what());
    }
}

int run_evaluate(const std::string& events_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_flag, const std::string& masks_csv,
                 const std::vector<std::string>& explain_classes,
                 const std::string& config_path, std::ostream& out, std::ostream& err) {
    EvaluateOptions options;
    try {
        if (!config_path.empty()) {
            const auto config = config_from_json(read_file(config_path));
            options.split = config.evaluation.split;
            options.bootstrap_resamples = config.evaluation.bootstrap_resamples;
            options.seed = config.evaluation.seed;
            options.masks = config.evaluation.masks;
            options.window = config.ids.window;
            options.hyper = config.ids.hyper;
        }
        if (const auto seed = env_seed()) options.seed = *seed;
        if (seed_flag) options.seed = *seed_flag;
        if (!masks_csv.empty()) options.masks = split_csv(masks_csv);
        for (const auto& m : options.masks) events::parse_mask(m);
        options.explain_classes = explain_classes;
    } catch (const std::exception& e) {
        return fail(err, kExitBadInput, e.what());
    }
    try {
        evaluate_events(events_path, out_dir, options);
    } catch (const DegenerateDataset& e) {
        return fail(err, kExitDegenerate, e.what());
    } catch (const events::EmptyClass& e) {
        return fail(err, kExitDegenerate, e.what());
    } catch (const std::exception& e) {
        return fail(err, kExitBadInput, e.what());
    }
    out << "reports written to " << out_dir << "/reports";
    if (!explain_classes.empty()) out << ", attributions to " << out_dir << "/shap";
    out << "\n";
    return kExitOk;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"deterministic smart-grid cyber range and process-aware IDS evaluation"};
    app.name("gridwatch");
    app.require_subcommand(1);

    auto* deploy = app.add_subcommand("deploy", "write a scenario configuration");
    std::string deploy_out = "scenario.json";
    int stations = 26;
    double duration = 1000.0;
    std::optional<std::uint64_t> seed_flag;
    bool normal_ops = false;
    deploy->add_option("--out", deploy_out, "output config path");
    deploy->add_option("--stations", stations, "number of stations/RTUs")->check(CLI::Range(1, 200));
    deploy->add_option("--duration", duration, "simulated seconds")
        ->check(CLI::PositiveNumber);
    deploy->add_option("--seed", seed_flag, "seed for grid, simulation and evaluation");
    deploy->add_flag("--normal-ops", normal_ops,
                     "no attack, two seeded link failures instead");

    auto* execute = app.add_subcommand("execute", "run the scenario and write artifacts");
    std::string config_path = "scenario.json";
    std::string exec_out_dir = "out";
    execute->add_option("--config", config_path, "scenario config path");
    execute->add_option("--out-dir", exec_out_dir, "artifact directory");

    auto* evaluate = app.add_subcommand("evaluate", "train and score the mask comparison");
    std::string events_path;
    std::string eval_out_dir = "out";
    std::optional<std::uint64_t> eval_seed;
    std::string masks_csv;
    std::vector<std::string> explain_classes;
    std::string eval_config;
    evaluate->add_option("--events", events_path, "events.jsonl path")->required();
    evaluate->add_option("--out-dir", eval_out_dir, "report directory");
    evaluate->add_option("--seed", eval_seed, "evaluation seed");
    evaluate->add_option("--masks", masks_csv, "comma-separated mask subset, e.g. IT,IT+OT+ET");
    evaluate->add_option("--explain", explain_classes, "classes to export attributions for");
    evaluate->add_option("--config", eval_config,
                         "optional scenario config supplying ids/evaluation settings");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        return fail(err, kExitBadInput, e.what());
    }

    if (deploy->parsed())
        return run_deploy(deploy_out, stations, duration, seed_flag, normal_ops, out, err);
    if (execute->parsed()) return run_execute(config_path, exec_out_dir, out, err);
    return run_evaluate(events_path, eval_out_dir, eval_seed, masks_csv, explain_classes,
                        eval_config, out, err);
}

}  // namespace gridwatch::cfg
