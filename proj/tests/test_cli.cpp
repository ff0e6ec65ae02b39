#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridwatch/cli.hpp"
#include "gridwatch/config.hpp"

using namespace gridwatch;
using namespace gridwatch::cfg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli_run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("gridwatch_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("config round trip and strict validation") {
    auto config = default_config();
    const auto text = config_to_json(config);
    const auto back = config_from_json(text);
    CHECK(back.grid.n_stations == 26);
    CHECK(back.simulation.duration_s == 1000.0);
    CHECK(back.attack.preset == "paper-scenario");
    CHECK(config_to_json(back) == text);

    CHECK_THROWS_AS(config_from_json("{\"schema\": 2}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"schema\": 1, \"grid\": {\"bogus\": 1}}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"schema\": 1, \"surprise\": {}}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("not json at all"), ConfigError);
    CHECK_THROWS_AS(
        config_from_json("{\"schema\": 1, \"attack\": {\"preset\": \"mystery\"}}"),
        ConfigError);
}

TEST_CASE("explicit attack stages survive a config round trip") {
    auto config = default_config();
    config.attack.stages = attack::paper_scenario_script(26);
    config.attack.preset.clear();
    const auto text = config_to_json(config);
    const auto back = config_from_json(text);
    REQUIRE(back.attack.stages.has_value());
    CHECK(back.attack.stages->stages.size() == config.attack.stages->stages.size());
    CHECK(config_to_json(back) == text);
}

TEST_CASE("deploy writes deterministic configs and normal-ops swaps the attack") {
    const auto dir = fresh_dir("deploy");
    const auto p1 = (dir / "a.json").string();
    const auto p2 = (dir / "b.json").string();

    auto r1 = run({"deploy", "--out", p1, "--seed", "9"});
    CHECK(r1.code == 0);
    auto r2 = run({"deploy", "--out", p2, "--seed", "9"});
    CHECK(r2.code == 0);
    CHECK(slurp(p1) == slurp(p2));

    const auto config = config_from_json(slurp(p1));
    CHECK(config.grid.n_stations == 26);
    CHECK(config.attack.preset == "paper-scenario");
    CHECK(config.grid.seed == 9);
    CHECK(config.simulation.seed == 9);

    const auto p3 = (dir / "normal.json").string();
    auto r3 = run({"deploy", "--out", p3, "--seed", "9", "--normal-ops"});
    CHECK(r3.code == 0);
    const auto normal = config_from_json(slurp(p3));
    CHECK(normal.attack.preset == "none");
    CHECK(normal.link_failures.size() == 2);
    CHECK(normal.link_failures[0].link != normal.link_failures[1].link);
}

TEST_CASE("cli error paths use the documented exit codes") {
    auto bad = run({"execute", "--config", "/nonexistent/nope.json"});
    CHECK(bad.code == 2);
    CHECK(bad.err.rfind("error: 2: ", 0) == 0);

    auto badsub = run({"frobnicate"});
    CHECK(badsub.code == 2);

    auto missing = run({"evaluate", "--out-dir", "/tmp"});
    CHECK(missing.code == 2);  // --events is required

    const auto dir = fresh_dir("cli_err");
    const auto events = dir / "events.jsonl";
    std::ofstream(events) << "";  // empty file
    auto empty = run({"evaluate", "--events", events.string(), "--out-dir", dir.string()});
    CHECK(empty.code == 2);
}

TEST_CASE("execute then evaluate on a small scenario end to end") {
    const auto dir = fresh_dir("e2e");
    const auto config_path = (dir / "scenario.json").string();

    auto config = default_config();
    config.grid.n_stations = 6;
    config.simulation.duration_s = 120.0;
    config.grid.seed = 5;
    config.simulation.seed = 5;
    config.evaluation.seed = 5;
    config.evaluation.bootstrap_resamples = 100;
    config.ids.hyper.iterations = 150;
    {
        std::ofstream f(config_path);
        f << config_to_json(config);
    }

    auto exec = run({"execute", "--config", config_path, "--out-dir", (dir / "out").string()});
    CHECK(exec.code == 0);
    CHECK(fs::exists(dir / "out" / "capture.pcap"));
    CHECK(fs::exists(dir / "out" / "events.jsonl"));
    CHECK(exec.out.find("frames captured") != std::string::npos);
    CHECK(exec.out.find("Normal:") != std::string::npos);

    // determinism across runs: byte-identical events
    auto exec2 = run({"execute", "--config", config_path, "--out-dir", (dir / "out2").string()});
    CHECK(exec2.code == 0);
    CHECK(slurp(dir / "out" / "events.jsonl") == slurp(dir / "out2" / "events.jsonl"));
    CHECK(slurp(dir / "out" / "capture.pcap") == slurp(dir / "out2" / "capture.pcap"));

    auto eval = run({"evaluate", "--events", (dir / "out" / "events.jsonl").string(),
                     "--out-dir", (dir / "out").string(), "--seed", "3", "--config", config_path,
                     "--masks", "IT,IT+OT+ET", "--explain", "ValueManipulation"});
    CHECK(eval.code == 0);
    CHECK(fs::exists(dir / "out" / "reports" / "comparison.csv"));
    CHECK(fs::exists(dir / "out" / "reports" / "confusion_IT.csv"));
    CHECK(fs::exists(dir / "out" / "reports" / "confusion_IT_OT_ET.csv"));
    CHECK(fs::exists(dir / "out" / "reports" / "report.json"));
    CHECK(fs::exists(dir / "out" / "shap" / "importance_ValueManipulation.csv"));
    CHECK(fs::exists(dir / "out" / "shap" / "attributions_ValueManipulation.csv"));

    const auto comparison = slurp(dir / "out" / "reports" / "comparison.csv");
    CHECK(comparison.find("IT,Normal") != std::string::npos);
    CHECK(comparison.find("IT+OT+ET,ValueManipulation") != std::string::npos);

    // masks subset: only requested masks appear
    CHECK(comparison.find("\nOT,") == std::string::npos);
}

TEST_CASE("evaluate on normal-ops data reports the missing class with exit 4") {
    const auto dir = fresh_dir("normalops");
    const auto config_path = (dir / "scenario.json").string();
    auto config = default_config();
    config.grid.n_stations = 4;
    config.simulation.duration_s = 60.0;
    apply_normal_ops(config);
    {
        std::ofstream f(config_path);
        f << config_to_json(config);
    }
    auto exec = run({"execute", "--config", config_path, "--out-dir", (dir / "out").string()});
    REQUIRE(exec.code == 0);

    auto eval = run({"evaluate", "--events", (dir / "out" / "events.jsonl").string(),
                     "--out-dir", (dir / "out").string()});
    CHECK(eval.code == 4);
    CHECK(eval.err.rfind("error: 4: ", 0) == 0);
    CHECK(eval.err.find("missing class") != std::string::npos);
}

TEST_CASE("normal-ops events are all labeled Normal") {
    const auto dir = fresh_dir("normlabels");
    auto config = default_config();
    config.grid.n_stations = 3;
    config.simulation.duration_s = 60.0;
    apply_normal_ops(config);
    const auto summary = execute_scenario(config, (dir / "out").string());
    for (const auto& [cls, n] : summary.class_counts) {
        if (cls == "Normal") CHECK(n > 0);
        else CHECK(n == 0);
    }
}

TEST_CASE("paper scenario: DoS importance ranks an IT feature in its top 3") {
    const auto dir = fresh_dir("dos_importance");
    auto config = default_config();
    config.grid.seed = 1;
    config.simulation.seed = 1;
    execute_scenario(config, (dir / "out").string());
    EvaluateOptions options;
    options.seed = 1;
    options.masks = {"IT+OT+ET"};
    options.explain_classes = {"DoS"};
    options.bootstrap_resamples = 100;
    options.shap_instances = 40;
    evaluate_events((dir / "out" / "events.jsonl").string(), (dir / "out").string(), options);

    std::ifstream f(dir / "out" / "shap" / "importance_DoS.csv");
    REQUIRE(f.good());
    std::string line;
    std::getline(f, line);  // header
    bool it_in_top3 = false;
    for (int rank = 0; rank < 3 && std::getline(f, line); ++rank) {
        auto feature = line.substr(0, line.find(','));
        const auto suffix = feature.rfind("__present");
        if (suffix != std::string::npos) feature = feature.substr(0, suffix);
        if (events::field_category(feature) == events::Category::IT) it_in_top3 = true;
    }
    CHECK(it_in_top3);
}

TEST_CASE("scenario hash is stable and seed-sensitive") {
    auto a = default_config();
    auto b = default_config();
    CHECK(scenario_hash(a) == scenario_hash(b));
    b.simulation.seed = 777;
    CHECK(scenario_hash(a) != scenario_hash(b));
}
