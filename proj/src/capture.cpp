#include "gridwatch/capture.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridwatch::netsim {

namespace {

void put_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

const struct {
    MitrePhase phase;
    const char* name;
} kPhaseNames[] = {
    {MitrePhase::InitialAccess, "InitialAccess"},
    {MitrePhase::Execution, "Execution"},
    {MitrePhase::Persistence, "Persistence"},
    {MitrePhase::PrivilegeEscalation, "PrivilegeEscalation"},
    {MitrePhase::DefenseEvasion, "DefenseEvasion"},
    {MitrePhase::CredentialAccess, "CredentialAccess"},
    {MitrePhase::Discovery, "Discovery"},
    {MitrePhase::LateralMovement, "LateralMovement"},
    {MitrePhase::Collection, "Collection"},
    {MitrePhase::CommandAndControl, "CommandAndControl"},
    {MitrePhase::Exfiltration, "Exfiltration"},
    {MitrePhase::Impact, "Impact"},
};

}  // namespace

const char* to_string(MitrePhase phase) {
    for (const auto& e : kPhaseNames)
        if (e.phase == phase) return e.name;
    return "Unknown";
}

std::optional<MitrePhase> phase_from_string(const std::string& name) {
    for (const auto& e : kPhaseNames)
        if (name == e.name) return e.phase;
    return std::nullopt;
}

const std::vector<MitrePhase>& canonical_phase_order() {
    static const std::vector<MitrePhase> order = {
        MitrePhase::InitialAccess,    MitrePhase::Execution,
        MitrePhase::Persistence,      MitrePhase::PrivilegeEscalation,
        MitrePhase::DefenseEvasion,   MitrePhase::CredentialAccess,
        MitrePhase::Discovery,        MitrePhase::LateralMovement,
        MitrePhase::Collection,       MitrePhase::CommandAndControl,
        MitrePhase::Exfiltration,     MitrePhase::Impact,
    };
    return order;
}

std::vector<std::uint8_t> export_pcap(const Capture& capture) {
    std::vector<std::uint8_t> out;
    out.reserve(24 + capture.records.size() * 80);
    out.push_back(0xa1);
    out.push_back(0xb2);
    out.push_back(0xc3);
    out.push_back(0xd4);
    put_u16le(out, 2);       // version major
    put_u16le(out, 4);       // version minor
    put_u32le(out, 0);       // thiszone
    put_u32le(out, 0);       // sigfigs
    put_u32le(out, 65535);   // snaplen
    put_u32le(out, 1);       // linktype ethernet
    for (const auto& rec : capture.records) {
        put_u32le(out, static_cast<std::uint32_t>(rec.ts_us / 1000000));
        put_u32le(out, static_cast<std::uint32_t>(rec.ts_us % 1000000));
        put_u32le(out, static_cast<std::uint32_t>(rec.bytes.size()));
        put_u32le(out, static_cast<std::uint32_t>(rec.bytes.size()));
        out.insert(out.end(), rec.bytes.begin(), rec.bytes.end());
    }
    return out;
}

void export_pcap_file(const Capture& capture, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    const auto bytes = export_pcap(capture);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for " + path);
}

std::string capture_to_jsonl(const Capture& capture) {
    std::ostringstream out;
    for (const auto& rec : capture.records) {
        nlohmann::ordered_json j;
        j["ts_us"] = rec.ts_us;
        std::string hex;
        hex.reserve(rec.bytes.size() * 2);
        static const char* digits = "0123456789abcdef";
        for (std::uint8_t b : rec.bytes) {
            hex.push_back(digits[b >> 4]);
            hex.push_back(digits[b & 0x0F]);
        }
        j["bytes"] = hex;
        if (rec.ground_truth) {
            j["phase"] = to_string(rec.ground_truth->phase);
            j["ttp"] = rec.ground_truth->ttp;
        } else {
            j["phase"] = nullptr;
            j["ttp"] = nullptr;
        }
        out << j.dump() << '\n';
    }
    return out.str();
}

Capture capture_from_jsonl(const std::string& text) {
    Capture capture;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        CaptureRecord rec;
        rec.ts_us = j.at("ts_us").get<std::int64_t>();
        const std::string hex = j.at("bytes").get<std::string>();
        if (hex.size() % 2 != 0) throw IoError("odd hex payload");
        rec.bytes.reserve(hex.size() / 2);
        auto nibble = [](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            throw IoError("bad hex digit");
        };
        for (std::size_t i = 0; i < hex.size(); i += 2)
            rec.bytes.push_back(static_cast<std::uint8_t>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
        if (!j.at("phase").is_null()) {
            GroundTruth gt;
            const auto phase = phase_from_string(j.at("phase").get<std::string>());
            if (!phase) throw IoError("unknown phase in capture");
            gt.phase = *phase;
            gt.ttp = j.at("ttp").get<std::string>();
            rec.ground_truth = gt;
        }
        capture.records.push_back(std::move(rec));
    }
    return capture;
}

}  // namespace gridwatch::netsim
