#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridwatch/attack.hpp"
#include "gridwatch/events.hpp"
#include "gridwatch/ids.hpp"
#include "gridwatch/report.hpp"

// Scenario configuration (schema 1) and the deploy/execute/evaluate drivers
// behind the command line.
namespace gridwatch::cfg {

struct GridSection {
    int n_stations = 26;
    std::uint64_t seed = 7;
    double load_scale = 1.0;
    double noise_frac = 0.02;
};

struct NetworkSection {
    double latency_ms = 2.0;
    double jitter_ms = 0.5;
};

struct SimulationSection {
    double duration_s = 1000.0;
    double cyclic_period_s = 1.0;
    std::uint64_t seed = 42;
};

struct LinkFailure {
    std::string link;
    double start_frac = 0.0;
    double end_frac = 0.0;
};

struct AttackSection {
    std::string preset = "paper-scenario";  // or "none"; ignored when stages set
    std::optional<attack::AttackScript> stages;
};

struct IdsSection {
    ids::WindowConfig window;
    ids::Hyper hyper;
};

struct EvaluationSection {
    double split = 0.7;
    std::vector<std::string> masks;  // empty = all seven
    int bootstrap_resamples = 500;
    std::uint64_t seed = 1;
};

struct ScenarioConfig {
    GridSection grid;
    NetworkSection network;
    SimulationSection simulation;
    AttackSection attack;
    std::vector<LinkFailure> link_failures;
    IdsSection ids;
    EvaluationSection evaluation;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

ScenarioConfig default_config();
// swaps the attack for "none" and injects two seeded link failures
void apply_normal_ops(ScenarioConfig& config);

std::string config_to_json(const ScenarioConfig& config);
// strict: unknown keys anywhere are rejected
ScenarioConfig config_from_json(const std::string& text);

std::string scenario_hash(const ScenarioConfig& config);
std::uint64_t fnv1a(const std::string& data);

struct ExecuteSummary {
    std::size_t frame_count = 0;
    std::vector<std::pair<std::string, std::size_t>> class_counts;
    std::string scenario_hash;
};

// runs process + network simulation + attack script and writes capture.pcap
// and events.jsonl into out_dir
ExecuteSummary execute_scenario(const ScenarioConfig& config, const std::string& out_dir);

struct EvaluateOptions {
    std::uint64_t seed = 1;
    std::vector<std::string> masks;          // empty = all seven
    std::vector<std::string> explain_classes;
    double split = 0.7;
    int bootstrap_resamples = 500;
    ids::WindowConfig window;
    ids::Hyper hyper;
    int shap_permutations = 200;
    int shap_instances = 100;
};

class DegenerateDataset : public std::runtime_error {
public:
    explicit DegenerateDataset(const std::string& cls)
        : std::runtime_error("dataset is missing class " + cls), missing_class(cls) {}
    std::string missing_class;
};

// evaluation driver: mask comparison, window scan + sequence detection on the
// widest requested mask, optional shapley exports; writes the reports/ and
// shap/ trees under out_dir
void evaluate_events(const std::string& events_path, const std::string& out_dir,
                     const EvaluateOptions& options);

}  // namespace gridwatch::cfg
