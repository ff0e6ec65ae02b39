#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridwatch/wire.hpp"

namespace gridwatch::netsim {

enum class MitrePhase {
    InitialAccess,
    Execution,
    Persistence,
    PrivilegeEscalation,
    DefenseEvasion,
    CredentialAccess,
    Discovery,
    LateralMovement,
    Collection,
    CommandAndControl,
    Exfiltration,
    Impact,
};

const char* to_string(MitrePhase phase);
std::optional<MitrePhase> phase_from_string(const std::string& name);

// Canonical kill-chain ordering used by the sequence detector.
const std::vector<MitrePhase>& canonical_phase_order();

struct GroundTruth {
    MitrePhase phase = MitrePhase::Impact;
    std::string ttp;
    bool operator==(const GroundTruth&) const = default;
};

struct CaptureRecord {
    std::int64_t ts_us = 0;  // simulation clock, microseconds
    std::vector<std::uint8_t> bytes;
    std::optional<GroundTruth> ground_truth;

    double ts_seconds() const { return static_cast<double>(ts_us) / 1e6; }
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error("io: " + what) {}
};

struct Capture {
    std::vector<CaptureRecord> records;
};

// Classic pcap, linktype 1 (Ethernet), snaplen 65535. The four magic octets
// are written as a1 b2 c3 d4 with every other field little-endian.
std::vector<std::uint8_t> export_pcap(const Capture& capture);
void export_pcap_file(const Capture& capture, const std::string& path);

// Debug/round-trip form: one JSON object per record.
std::string capture_to_jsonl(const Capture& capture);
Capture capture_from_jsonl(const std::string& text);

}  // namespace gridwatch::netsim
