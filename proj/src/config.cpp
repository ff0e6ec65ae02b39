#include "gridwatch/config.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gridwatch/explain.hpp"
#include "gridwatch/rng.hpp"
#include "gridwatch/sim.hpp"

namespace gridwatch::cfg {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items())
        if (allowed.count(key) == 0)
            throw ConfigError(where + ": unknown key '" + key + "'");
}

ordered_json stage_to_json(const attack::AttackStage& st) {
    ordered_json j;
    j["phase"] = netsim::to_string(st.phase);
    j["ttp"] = st.ttp;
    j["window"] = {st.start_frac, st.end_frac};
    ordered_json t;
    if (const auto* p = std::get_if<attack::ArpSpoofParams>(&st.technique)) {
        t["type"] = "arp_spoof";
        t["victims"] = ordered_json::array();
        for (const auto& [a, b] : p->victims) t["victims"].push_back({a, b});
        t["interval_s"] = p->interval_s;
    } else if (const auto* p = std::get_if<attack::MitmMutateParams>(&st.technique)) {
        t["type"] = "mitm_mutate";
        t["rules"] = ordered_json::array();
        for (const auto& rule : p->rules) {
            ordered_json r;
            r["direction"] = rule.selector.direction == attack::FlowDirection::RtuToMtu
                                 ? "rtu_to_mtu"
                                 : rule.selector.direction == attack::FlowDirection::MtuToRtu
                                       ? "mtu_to_rtu"
                                       : "any";
            if (rule.selector.coa) r["coa"] = *rule.selector.coa;
            if (rule.selector.ioa) r["ioa"] = *rule.selector.ioa;
            if (const auto* sc = std::get_if<attack::SetCot>(&rule.action)) {
                r["action"] = "set_cot";
                r["cot"] = static_cast<int>(sc->new_cot);
            } else {
                r["action"] = "static_value";
                r["value"] = std::get<attack::StaticValue>(rule.action).value;
            }
            t["rules"].push_back(r);
        }
    } else if (const auto* p = std::get_if<attack::SynFloodParams>(&st.technique)) {
        t["type"] = "syn_flood";
        t["target"] = p->target;
        t["rate_per_s"] = p->rate_per_s;
    } else if (const auto* p = std::get_if<attack::RstInjectionParams>(&st.technique)) {
        t["type"] = "rst_injection";
        t["flows"] = ordered_json::array();
        for (const auto& [a, b] : p->flows) t["flows"].push_back({a, b});
    } else if (const auto* p = std::get_if<attack::ReplayParams>(&st.technique)) {
        t["type"] = "replay";
        t["flow"] = {p->flow_from, p->flow_to};
        t["record_window"] = {p->record_start_frac, p->record_end_frac};
    } else if (const auto* p = std::get_if<attack::EnumerateParams>(&st.technique)) {
        t["type"] = "enumerate";
        t["subnet_prefix"] = p->subnet_prefix;
        t["ports"] = p->ports;
        t["passes"] = p->passes;
    } else if (const auto* p = std::get_if<attack::SshBruteforceParams>(&st.technique)) {
        t["type"] = "ssh_bruteforce";
        t["target"] = p->target;
        t["attempts"] = p->attempts;
        t["rate_per_s"] = p->rate_per_s;
    }
    j["technique"] = t;
    return j;
}

std::vector<std::pair<std::string, std::string>> pairs_from_json(const json& j,
                                                                 const std::string& where) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2)
            throw ConfigError(where + ": expected [from, to] pairs");
        out.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    return out;
}

attack::AttackStage stage_from_json(const json& j) {
    require_keys(j, {"phase", "ttp", "window", "technique"}, "attack stage");
    attack::AttackStage st;
    const auto phase = netsim::phase_from_string(j.at("phase").get<std::string>());
    if (!phase) throw ConfigError("unknown phase " + j.at("phase").get<std::string>());
    st.phase = *phase;
    st.ttp = j.at("ttp").get<std::string>();
    st.start_frac = j.at("window").at(0).get<double>();
    st.end_frac = j.at("window").at(1).get<double>();
    const auto& t = j.at("technique");
    const auto type = t.at("type").get<std::string>();
    if (type == "arp_spoof") {
        require_keys(t, {"type", "victims", "interval_s"}, "arp_spoof");
        attack::ArpSpoofParams p;
        p.victims = pairs_from_json(t.at("victims"), "arp_spoof victims");
        p.interval_s = t.at("interval_s").get<double>();
        st.technique = p;
    } else if (type == "mitm_mutate") {
        require_keys(t, {"type", "rules"}, "mitm_mutate");
        attack::MitmMutateParams p;
        for (const auto& r : t.at("rules")) {
            require_keys(r, {"direction", "coa", "ioa", "action", "cot", "value"}, "mutation rule");
            attack::MutationRule rule;
            const auto dir = r.at("direction").get<std::string>();
            rule.selector.direction = dir == "rtu_to_mtu" ? attack::FlowDirection::RtuToMtu
                                      : dir == "mtu_to_rtu" ? attack::FlowDirection::MtuToRtu
                                                            : attack::FlowDirection::Any;
            if (r.contains("coa")) rule.selector.coa = r.at("coa").get<std::uint16_t>();
            if (r.contains("ioa")) rule.selector.ioa = r.at("ioa").get<std::uint32_t>();
            const auto action = r.at("action").get<std::string>();
            if (action == "set_cot")
                rule.action = attack::SetCot{static_cast<iec104::Cot>(r.at("cot").get<int>())};
            else if (action == "static_value")
                rule.action = attack::StaticValue{r.at("value").get<float>()};
            else
                throw ConfigError("unknown mutation action " + action);
            p.rules.push_back(std::move(rule));
        }
        st.technique = p;
    } else if (type == "syn_flood") {
        require_keys(t, {"type", "target", "rate_per_s"}, "syn_flood");
        attack::SynFloodParams p;
        p.target = t.at("target").get<std::string>();
        p.rate_per_s = t.at("rate_per_s").get<double>();
        st.technique = p;
    } else if (type == "rst_injection") {
        require_keys(t, {"type", "flows"}, "rst_injection");
        attack::RstInjectionParams p;
        p.flows = pairs_from_json(t.at("flows"), "rst flows");
        st.technique = p;
    } else if (type == "replay") {
        require_keys(t, {"type", "flow", "record_window"}, "replay");
        attack::ReplayParams p;
        p.flow_from = t.at("flow").at(0).get<std::string>();
        p.flow_to = t.at("flow").at(1).get<std::string>();
        p.record_start_frac = t.at("record_window").at(0).get<double>();
        p.record_end_frac = t.at("record_window").at(1).get<double>();
        st.technique = p;
    } else if (type == "enumerate") {
        require_keys(t, {"type", "subnet_prefix", "ports", "passes"}, "enumerate");
        attack::EnumerateParams p;
        p.subnet_prefix = t.at("subnet_prefix").get<int>();
        p.ports = t.at("ports").get<std::vector<std::uint16_t>>();
        p.passes = t.at("passes").get<int>();
        st.technique = p;
    } else if (type == "ssh_bruteforce") {
        require_keys(t, {"type", "target", "attempts", "rate_per_s"}, "ssh_bruteforce");
        attack::SshBruteforceParams p;
        p.target = t.at("target").get<std::string>();
        p.attempts = t.at("attempts").get<int>();
        p.rate_per_s = t.at("rate_per_s").get<double>();
        st.technique = p;
    } else {
        throw ConfigError("unknown technique type " + type);
    }
    return st;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw netsim::IoError("cannot open " + path);
    f << content;
    if (!f) throw netsim::IoError("write failed for " + path);
}

}  // namespace

ScenarioConfig default_config() {
    ScenarioConfig c;
    c.evaluation.masks = {};
    return c;
}

void apply_normal_ops(ScenarioConfig& config) {
    config.attack.preset = "none";
    config.attack.stages.reset();
    config.link_failures.clear();
    Rng rng(config.simulation.seed ^ 0xfa11);
    // two failures on distinct RTU links
    const int a = static_cast<int>(rng.uniform_int(1, config.grid.n_stations));
    int b = static_cast<int>(rng.uniform_int(1, config.grid.n_stations));
    if (b == a) b = a % config.grid.n_stations + 1;
    const double s1 = rng.uniform(0.15, 0.35);
    const double s2 = rng.uniform(0.55, 0.75);
    config.link_failures.push_back({"rtu" + std::to_string(a), s1, s1 + 0.02});
    config.link_failures.push_back({"rtu" + std::to_string(b), s2, s2 + 0.03});
}

std::string config_to_json(const ScenarioConfig& c) {
    ordered_json j;
    j["schema"] = 1;
    j["grid"] = {{"n_stations", c.grid.n_stations},
                 {"seed", c.grid.seed},
                 {"profiles", {{"load_scale", c.grid.load_scale}, {"noise_frac", c.grid.noise_frac}}}};
    j["network"] = {{"latency_ms", c.network.latency_ms}, {"jitter_ms", c.network.jitter_ms}};
    j["simulation"] = {{"duration_s", c.simulation.duration_s},
                       {"cyclic_period_s", c.simulation.cyclic_period_s},
                       {"seed", c.simulation.seed}};
    if (c.attack.stages) {
        ordered_json stages = ordered_json::array();
        for (const auto& st : c.attack.stages->stages) stages.push_back(stage_to_json(st));
        j["attack"] = {{"stages", stages}};
    } else {
        j["attack"] = {{"preset", c.attack.preset}};
    }
    j["link_failures"] = ordered_json::array();
    for (const auto& lf : c.link_failures)
        j["link_failures"].push_back(
            {{"link", lf.link}, {"start_frac", lf.start_frac}, {"end_frac", lf.end_frac}});
    j["ids"] = {{"window",
                 {{"length_s", c.ids.window.length_s},
                  {"stride_s", c.ids.window.stride_s},
                  {"min_events", c.ids.window.min_events}}},
                {"hyper",
                 {{"learning_rate", c.ids.hyper.learning_rate},
                  {"iterations", c.ids.hyper.iterations},
                  {"l2_lambda", c.ids.hyper.l2_lambda}}}};
    ordered_json masks = ordered_json::array();
    for (const auto& m : c.evaluation.masks) masks.push_back(m);
    j["evaluation"] = {{"split", c.evaluation.split},
                       {"masks", masks},
                       {"bootstrap_resamples", c.evaluation.bootstrap_resamples},
                       {"seed", c.evaluation.seed}};
    return j.dump(2) + "\n";
}

ScenarioConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    require_keys(j, {"schema", "grid", "network", "simulation", "attack", "link_failures", "ids",
                     "evaluation"},
                 "config");
    if (!j.contains("schema") || j.at("schema").get<int>() != 1)
        throw ConfigError("config: schema must be 1");
    ScenarioConfig c;
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        require_keys(g, {"n_stations", "seed", "profiles"}, "grid");
        if (g.contains("n_stations")) c.grid.n_stations = g.at("n_stations").get<int>();
        if (g.contains("seed")) c.grid.seed = g.at("seed").get<std::uint64_t>();
        if (g.contains("profiles")) {
            require_keys(g.at("profiles"), {"load_scale", "noise_frac"}, "grid.profiles");
            if (g.at("profiles").contains("load_scale"))
                c.grid.load_scale = g.at("profiles").at("load_scale").get<double>();
            if (g.at("profiles").contains("noise_frac"))
                c.grid.noise_frac = g.at("profiles").at("noise_frac").get<double>();
        }
        if (c.grid.n_stations < 1) throw ConfigError("grid.n_stations must be >= 1");
    }
    if (j.contains("network")) {
        const auto& n = j.at("network");
        require_keys(n, {"latency_ms", "jitter_ms"}, "network");
        if (n.contains("latency_ms")) c.network.latency_ms = n.at("latency_ms").get<double>();
        if (n.contains("jitter_ms")) c.network.jitter_ms = n.at("jitter_ms").get<double>();
    }
    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        require_keys(s, {"duration_s", "cyclic_period_s", "seed"}, "simulation");
        if (s.contains("duration_s")) c.simulation.duration_s = s.at("duration_s").get<double>();
        if (s.contains("cyclic_period_s"))
            c.simulation.cyclic_period_s = s.at("cyclic_period_s").get<double>();
        if (s.contains("seed")) c.simulation.seed = s.at("seed").get<std::uint64_t>();
        if (c.simulation.duration_s <= 0) throw ConfigError("simulation.duration_s must be > 0");
    }
    if (j.contains("attack")) {
        const auto& a = j.at("attack");
        require_keys(a, {"preset", "stages"}, "attack");
        if (a.contains("stages")) {
            attack::AttackScript script;
            for (const auto& st : a.at("stages")) script.stages.push_back(stage_from_json(st));
            c.attack.stages = std::move(script);
            c.attack.preset.clear();
        } else if (a.contains("preset")) {
            c.attack.preset = a.at("preset").get<std::string>();
            if (c.attack.preset != "paper-scenario" && c.attack.preset != "none")
                throw ConfigError("unknown attack preset " + c.attack.preset);
        }
    }
    if (j.contains("link_failures")) {
        for (const auto& lf : j.at("link_failures")) {
            require_keys(lf, {"link", "start_frac", "end_frac"}, "link_failures");
            LinkFailure f;
            f.link = lf.at("link").get<std::string>();
            f.start_frac = lf.at("start_frac").get<double>();
            f.end_frac = lf.at("end_frac").get<double>();
            if (f.start_frac < 0 || f.end_frac > 1 || f.start_frac > f.end_frac)
                throw ConfigError("link failure window out of range");
            c.link_failures.push_back(std::move(f));
        }
    }
    if (j.contains("ids")) {
        const auto& i = j.at("ids");
        require_keys(i, {"window", "hyper"}, "ids");
        if (i.contains("window")) {
            require_keys(i.at("window"), {"length_s", "stride_s", "min_events"}, "ids.window");
            const auto& w = i.at("window");
            if (w.contains("length_s")) c.ids.window.length_s = w.at("length_s").get<double>();
            if (w.contains("stride_s")) c.ids.window.stride_s = w.at("stride_s").get<double>();
            if (w.contains("min_events")) c.ids.window.min_events = w.at("min_events").get<int>();
            if (c.ids.window.stride_s <= 0 || c.ids.window.stride_s > c.ids.window.length_s)
                throw ConfigError("ids.window: need 0 < stride <= length");
        }
        if (i.contains("hyper")) {
            require_keys(i.at("hyper"), {"learning_rate", "iterations", "l2_lambda"}, "ids.hyper");
            const auto& h = i.at("hyper");
            if (h.contains("learning_rate"))
                c.ids.hyper.learning_rate = h.at("learning_rate").get<double>();
            if (h.contains("iterations")) c.ids.hyper.iterations = h.at("iterations").get<int>();
            if (h.contains("l2_lambda")) c.ids.hyper.l2_lambda = h.at("l2_lambda").get<double>();
        }
    }
    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        require_keys(e, {"split", "masks", "bootstrap_resamples", "seed"}, "evaluation");
        if (e.contains("split")) c.evaluation.split = e.at("split").get<double>();
        if (e.contains("masks"))
            c.evaluation.masks = e.at("masks").get<std::vector<std::string>>();
        if (e.contains("bootstrap_resamples"))
            c.evaluation.bootstrap_resamples = e.at("bootstrap_resamples").get<int>();
        if (e.contains("seed")) c.evaluation.seed = e.at("seed").get<std::uint64_t>();
        if (c.evaluation.split <= 0.0 || c.evaluation.split >= 1.0)
            throw ConfigError("evaluation.split must be in (0,1)");
        for (const auto& m : c.evaluation.masks) events::parse_mask(m);
    }
    return c;
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char ch : data) {
        hash ^= ch;
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string scenario_hash(const ScenarioConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(config_to_json(config))));
    return buf;
}

ExecuteSummary execute_scenario(const ScenarioConfig& config, const std::string& out_dir) {
    auto topo = netsim::build_topology(config.grid.n_stations, config.network.latency_ms,
                                       config.network.jitter_ms);
    auto grid = process::build_feeder(config.grid.n_stations, config.grid.seed);
    for (auto& st : grid.stations) {
        st.load.base_mw *= config.grid.load_scale;
        st.load.noise_sigma = config.grid.noise_frac * st.load.base_mw;
    }

    netsim::SimOptions opts;
    opts.duration_s = config.simulation.duration_s;
    opts.cyclic_period_s = config.simulation.cyclic_period_s;
    opts.seed = config.simulation.seed;

    attack::AttackScript script;
    if (config.attack.stages)
        script = *config.attack.stages;
    else if (config.attack.preset == "paper-scenario")
        script = attack::paper_scenario_script(config.grid.n_stations);

    attack::validate_script(script, topo);
    attack::Engine engine(script, opts.seed ^ 0xa77ac4e5ULL);
    netsim::Simulator sim(std::move(topo), std::move(grid), opts, &engine);
    for (const auto& lf : config.link_failures)
        sim.inject_link_failure(lf.link, lf.start_frac * config.simulation.duration_s,
                                lf.end_frac * config.simulation.duration_s);
    auto result = sim.run();

    fs::create_directories(out_dir);
    netsim::export_pcap_file(result.capture, (fs::path(out_dir) / "capture.pcap").string());

    auto evs = events::dissect(result.capture);
    events::derive_features(evs);
    write_file((fs::path(out_dir) / "events.jsonl").string(), events::events_to_jsonl(evs));

    ExecuteSummary summary;
    summary.frame_count = result.capture.records.size();
    summary.scenario_hash = scenario_hash(config);
    std::map<std::string, std::size_t> counts;
    for (const auto& ev : evs) counts[events::class_of_ttp(ev.ttp)]++;
    for (const auto& cls : events::class_vocabulary())
        summary.class_counts.emplace_back(cls, counts.count(cls) ? counts[cls] : 0);
    return summary;
}

void evaluate_events(const std::string& events_path, const std::string& out_dir,
                     const EvaluateOptions& options) {
    std::ifstream f(events_path, std::ios::binary);
    if (!f) throw netsim::IoError("cannot open " + events_path);
    std::stringstream buffer;
    buffer << f.rdbuf();
    const std::string text = buffer.str();
    auto evs = events::events_from_jsonl(text);
    if (evs.empty()) throw ConfigError("events file is empty");

    // all classes must be represented
    std::map<std::string, std::size_t> counts;
    for (const auto& ev : evs) counts[events::class_of_ttp(ev.ttp)]++;
    for (const auto& cls : events::class_vocabulary())
        if (counts[cls] == 0) throw DegenerateDataset(cls);

    std::vector<events::CategoryMask> masks;
    if (options.masks.empty()) {
        masks = events::all_masks();
    } else {
        for (const auto& m : options.masks) masks.push_back(events::parse_mask(m));
    }

    report::EvalOptions eval;
    eval.split = options.split;
    eval.bootstrap_resamples = options.bootstrap_resamples;
    eval.seed = options.seed;
    eval.hyper = options.hyper;

    // widest mask drives the window scan, sequence detection and attributions
    std::size_t widest = 0;
    for (std::size_t i = 1; i < masks.size(); ++i) {
        auto breadth = [](const events::CategoryMask& m) {
            return (m.it ? 1 : 0) + (m.ot ? 1 : 0) + (m.et ? 1 : 0);
        };
        if (breadth(masks[i]) > breadth(masks[widest])) widest = i;
    }

    report::ComparisonReport comparison;
    comparison.seed = eval.seed;
    comparison.split = eval.split;
    std::optional<report::MaskEvaluation> widest_eval;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        auto me = report::evaluate_mask(evs, masks[i], eval);
        comparison.reports.push_back(me.metrics);
        if (i == widest) widest_eval = std::move(me);
    }

    fs::create_directories(fs::path(out_dir) / "reports");
    write_file((fs::path(out_dir) / "reports" / "comparison.csv").string(),
               report::comparison_csv(comparison));
    for (const auto& rep : comparison.reports) {
        auto name = rep.mask_name;
        for (auto& ch : name)
            if (ch == '+') ch = '_';
        write_file((fs::path(out_dir) / "reports" / ("confusion_" + name + ".csv")).string(),
                   report::confusion_csv(rep));
    }

    // window scan over the full event stream with the widest-mask ensemble
    const auto full_ds = events::apply_mask(evs, masks[widest]);
    std::vector<double> times;
    times.reserve(evs.size());
    for (const auto& ev : evs) times.push_back(ev.timestamp);
    const auto decisions =
        ids::window_scan(times, full_ds.rows, widest_eval->ensemble, options.window);
    const auto alarms = ids::detect_sequence(decisions, full_ds.class_names);

    // report.json
    nlohmann::ordered_json rj;
    rj["schema"] = 1;
    rj["seed"] = options.seed;
    char hash_buf[17];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(text)));
    rj["events_hash"] = hash_buf;
    rj["event_count"] = evs.size();
    nlohmann::ordered_json cc;
    for (const auto& cls : events::class_vocabulary()) cc[cls] = counts[cls];
    rj["class_counts"] = cc;
    rj["split"] = eval.split;
    rj["bootstrap_resamples"] = eval.bootstrap_resamples;
    rj["comparison"] = {{"it_only", comparison.it_only_mask},
                        {"process_aware", comparison.process_aware_mask}};
    rj["masks"] = nlohmann::ordered_json::array();
    for (const auto& rep : comparison.reports) {
        nlohmann::ordered_json mj;
        mj["mask"] = rep.mask_name;
        mj["accuracy"] = rep.accuracy;
        mj["test_size"] = rep.test_size;
        mj["per_class"] = nlohmann::ordered_json::array();
        for (const auto& m : rep.per_class) {
            mj["per_class"].push_back({{"class", m.class_name},
                                       {"precision", m.precision},
                                       {"recall", m.recall},
                                       {"f1", m.f1},
                                       {"f1_ci_low", m.f1_ci_low},
                                       {"f1_ci_high", m.f1_ci_high},
                                       {"support", m.support},
                                       {"no_support", m.no_support}});
        }
        rj["masks"].push_back(mj);
    }
    int anomalous_windows = 0;
    std::map<std::string, int> window_classes;
    for (const auto& d : decisions) {
        if (!d.anomalous) continue;
        ++anomalous_windows;
        window_classes[full_ds.class_names[static_cast<std::size_t>(d.class_index)]]++;
    }
    rj["window_scan"] = {{"mask", masks[widest].name()},
                         {"windows", decisions.size()},
                         {"anomalous_windows", anomalous_windows}};
    nlohmann::ordered_json wc;
    for (const auto& [cls, n] : window_classes) wc[cls] = n;
    rj["window_scan"]["anomalous_class_counts"] = wc;
    rj["alarms"] = nlohmann::ordered_json::array();
    for (const auto& alarm : alarms) {
        nlohmann::ordered_json aj;
        aj["ordered"] = alarm.ordered;
        aj["first_ts"] = alarm.first_ts;
        aj["last_ts"] = alarm.last_ts;
        aj["phases"] = nlohmann::ordered_json::array();
        for (auto p : alarm.phases) aj["phases"].push_back(netsim::to_string(p));
        rj["alarms"].push_back(aj);
    }
    write_file((fs::path(out_dir) / "reports" / "report.json").string(), rj.dump(2) + "\n");

    // shapley exports
    if (!options.explain_classes.empty()) {
        fs::create_directories(fs::path(out_dir) / "shap");
        const auto& me = *widest_eval;
        std::vector<std::vector<double>> train_rows;
        for (std::size_t i = 0; i < me.balanced.rows.size(); ++i) {
            const bool in_test = std::binary_search(me.test_rows.begin(), me.test_rows.end(), i);
            if (!in_test) train_rows.push_back(me.balanced.rows[i]);
        }
        const auto background =
            explain::background_from_rows(train_rows, 100, options.seed ^ 0xb06);
        for (const auto& cls : options.explain_classes) {
            const auto cit = std::find(me.balanced.class_names.begin(),
                                       me.balanced.class_names.end(), cls);
            if (cit == me.balanced.class_names.end())
                throw ConfigError("unknown class for --explain: " + cls);
            const auto cix = static_cast<std::size_t>(cit - me.balanced.class_names.begin());
            const auto fn = explain::raw_score_fn(me.ensemble.classifiers[cix]);

            std::vector<explain::AttributionVector> attributions;
            std::ostringstream attr_csv;
            attr_csv << "row,feature,phi\n";
            attr_csv.precision(10);
            int taken = 0;
            for (auto row_ix : me.test_rows) {
                if (me.balanced.labels[row_ix] != static_cast<int>(cix)) continue;
                if (taken >= options.shap_instances) break;
                auto a = explain::shapley_sampled(fn, me.balanced.rows[row_ix], background,
                                                  options.shap_permutations,
                                                  options.seed + static_cast<std::uint64_t>(taken));
                for (std::size_t j = 0; j < a.phi.size(); ++j)
                    attr_csv << row_ix << ',' << me.balanced.feature_names[j] << ',' << a.phi[j]
                             << '\n';
                attributions.push_back(std::move(a));
                ++taken;
            }
            if (attributions.empty()) throw DegenerateDataset(cls);
            const auto importance =
                explain::class_importance(attributions, me.balanced.feature_names);
            std::ostringstream imp_csv;
            imp_csv << "feature,mean_abs_phi\n";
            imp_csv.precision(10);
            for (const auto& fi : importance) imp_csv << fi.feature << ',' << fi.importance << '\n';
            write_file((fs::path(out_dir) / "shap" / ("attributions_" + cls + ".csv")).string(),
                       attr_csv.str());
            write_file((fs::path(out_dir) / "shap" / ("importance_" + cls + ".csv")).string(),
                       imp_csv.str());
        }
    }
}

}  // namespace gridwatch::cfg
