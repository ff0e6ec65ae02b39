#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gridwatch/iec104.hpp"
#include "gridwatch/rng.hpp"
#include "gridwatch/sim.hpp"

// Single-agent multi-stage attack orchestration: ARP poisoning, MITM frame
// rewriting, SYN flooding, RST injection, replay, enumeration and an SSH
// brute force, all stamped with ground-truth phase/TTP labels.
namespace gridwatch::attack {

enum class FlowDirection { RtuToMtu, MtuToRtu, Any };

struct MutationSelector {
    FlowDirection direction = FlowDirection::RtuToMtu;
    std::optional<std::uint16_t> coa;
    std::optional<std::uint32_t> ioa;
};

struct SetCot {
    iec104::Cot new_cot = iec104::Cot::Spontaneous;
};
struct StaticValue {
    float value = 0.0f;
};

struct MutationRule {
    MutationSelector selector;
    std::variant<SetCot, StaticValue> action;
};

struct ArpSpoofParams {
    std::vector<std::pair<std::string, std::string>> victims;  // node-id pairs
    double interval_s = 5.0;
};
struct MitmMutateParams {
    std::vector<MutationRule> rules;
};
struct SynFloodParams {
    std::string target = "mtu";
    double rate_per_s = 150.0;
};
struct RstInjectionParams {
    std::vector<std::pair<std::string, std::string>> flows;  // (from, to)
};
struct ReplayParams {
    std::string flow_from = "rtu1";
    std::string flow_to = "mtu";
    double record_start_frac = 0.1;
    double record_end_frac = 0.2;
};
struct EnumerateParams {
    int subnet_prefix = 26;  // 10.0.0.0/prefix
    std::vector<std::uint16_t> ports = {22, 2404};
    int passes = 12;
};
struct SshBruteforceParams {
    std::string target = "rtu26";
    int attempts = 20;
    double rate_per_s = 2.0;
};

using Technique = std::variant<ArpSpoofParams, MitmMutateParams, SynFloodParams,
                               RstInjectionParams, ReplayParams, EnumerateParams,
                               SshBruteforceParams>;

struct AttackStage {
    netsim::MitrePhase phase = netsim::MitrePhase::Impact;
    std::string ttp;
    double start_frac = 0.0;
    double end_frac = 0.0;
    Technique technique;
};

struct AttackScript {
    std::string attacker_node = "attacker";
    std::vector<AttackStage> stages;
};

class NotOnSegment : public std::runtime_error {
public:
    explicit NotOnSegment(const std::string& id)
        : std::runtime_error("victim not on attacker segment: " + id) {}
};
class TargetIsSpoofed : public std::runtime_error {
public:
    explicit TargetIsSpoofed(const std::string& id)
        : std::runtime_error("ssh target is an ARP-spoof victim: " + id) {}
};
class MitmNotActive : public std::runtime_error {
public:
    explicit MitmNotActive(const std::string& what)
        : std::runtime_error("mitm not active: " + what) {}
};
class NothingRecorded : public std::runtime_error {
public:
    NothingRecorded() : std::runtime_error("replay: record window is empty") {}
};

// The multi-stage script used throughout the study: enumeration, spoofing of
// rtu1/rtu2 against the MTU, RST injection in the first tenth, a SYN flood,
// COT then static-value manipulation between 20% and 80%, replay of recorded
// traffic, and a limited SSH brute force over the final fifth.
AttackScript paper_scenario_script(int n_rtus = 26);

// Window sanity, victim/segment checks, MITM preconditions and the
// single-agent rule (stages contending for the MITM channel may not overlap).
void validate_script(const AttackScript& script, const netsim::Topology& topo);

class Engine : public netsim::AttackerController {
public:
    Engine(AttackScript script, std::uint64_t seed);

    void on_start(netsim::Simulator& sim) override;
    void on_mitm_frame(netsim::Simulator& sim, const std::vector<std::uint8_t>& bytes) override;
    bool on_attacker_frame(netsim::Simulator& sim,
                           const std::vector<std::uint8_t>& bytes) override;

    const AttackScript& script() const { return script_; }
    int recorded_count() const { return static_cast<int>(recordings_.size()); }
    int replayed_count() const { return replayed_; }

private:
    struct StageRt {
        const AttackStage* stage = nullptr;
        std::int64_t t0_us = 0, t1_us = 0;
    };
    struct FlowState {
        std::uint32_t cursor = 0;  // next seq the far side expects on from->to
        bool cursor_valid = false;
        std::uint32_t last_ack = 0;
        std::uint16_t to_port = 0;    // current destination port (ephemeral side)
        std::uint16_t from_port = 0;  // source port
        std::uint16_t window = 2048;
        bool ports_valid = false;
        std::int64_t seq_delta = 0;  // payload-length drift introduced by mutations
    };
    struct Recording {
        std::int64_t rel_us = 0;
        std::vector<std::uint8_t> payload;
        std::uint16_t window = 2048;
    };

    bool stage_active(const StageRt& st) const;
    bool pair_spoofed(wire::Ipv4 a, wire::Ipv4 b) const;
    void schedule_spoof(const StageRt& st, const ArpSpoofParams& p);
    void schedule_flood(const StageRt& st, const SynFloodParams& p);
    void schedule_enumeration(const StageRt& st, const EnumerateParams& p);
    void schedule_bruteforce(const StageRt& st, const SshBruteforceParams& p);
    void schedule_replay_emissions(const StageRt& st, const ReplayParams& p);
    void emit_poison(wire::Ipv4 victim_ip, wire::Ipv4 claimed_ip,
                     const netsim::GroundTruth& label);

    std::vector<std::uint8_t> mutate_payload(const std::vector<std::uint8_t>& payload,
                                             const std::vector<MutationRule>& rules,
                                             FlowDirection dir, bool& changed);

    AttackScript script_;
    Rng rng_;
    netsim::Simulator* sim_ = nullptr;
    int attacker_ix_ = -1;
    std::vector<StageRt> stages_;
    std::vector<Recording> recordings_;
    int replayed_ = 0;
    std::map<std::pair<wire::Ipv4, wire::Ipv4>, FlowState> flows_;
    std::uint16_t ident_ = 1;
    std::uint16_t flood_port_ = 20000;
    std::uint64_t scan_port_seq_ = 0;
};

// Convenience driver: validates the script, wires the engine into a simulator
// and runs the full scenario.
netsim::RunResult run_scenario(netsim::Topology topology, process::GridModel grid,
                               netsim::SimOptions options, const AttackScript& script);

}  // namespace gridwatch::attack
