#include "gridwatch/events.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gridwatch/iec104.hpp"
#include "gridwatch/rng.hpp"
#include "gridwatch/wire.hpp"

namespace gridwatch::events {

namespace {

using nlohmann::ordered_json;

struct FieldInfo {
    const char* name;
    Category category;
};

const FieldInfo kFields[] = {
    {"timestamp", Category::Global},
    {"categorization", Category::Global},
    {"priority", Category::Global},
    {"phase", Category::Global},
    {"ttp", Category::Global},
    {"id", Category::Global},
    {"src_mac", Category::IT},
    {"dst_mac", Category::IT},
    {"src_ip", Category::IT},
    {"dst_ip", Category::IT},
    {"packet_length", Category::IT},
    {"protocol", Category::IT},
    {"sport", Category::IT},
    {"dport", Category::IT},
    {"window_size", Category::IT},
    {"payload_size", Category::IT},
    {"diff_seq", Category::IT},
    {"diff_ack", Category::IT},
    {"flag", Category::IT},
    {"rtt", Category::IT},
    {"frequency_general", Category::IT},
    {"frequency_proto", Category::IT},
    {"throughput", Category::IT},
    {"iec104_frame", Category::OT},
    {"diff_tx", Category::OT},
    {"diff_rx", Category::OT},
    {"iec104_type_id", Category::OT},
    {"iec104_oa", Category::OT},
    {"iec104_numix", Category::OT},
    {"iec104_coa", Category::OT},
    {"iec104_ioa", Category::OT},
    {"iec104_cot", Category::OT},
    {"iec104_value_sigma", Category::OT},
    {"iec104_io_value", Category::ET},
    {"iec104_control", Category::ET},
    {"iec104_status", Category::ET},
};

struct TtpClass {
    const char* prefix;
    const char* cls;
};
const TtpClass kTtpClasses[] = {
    {"T1557", "ArpSpoofing"},  {"T1499", "DoS"},           {"T0814", "DoS"},
    {"T0832", "ValueManipulation"}, {"T0856", "Replay"},   {"T0822", "SshBruteforce"},
    {"T1110", "SshBruteforce"},     {"T0846", "Discovery"},
};

std::optional<iec104::Apdu> first_apdu(const std::vector<std::uint8_t>& payload) {
    auto res = iec104::decode_apdu(payload.data(), payload.size());
    if (!res.ok()) return std::nullopt;
    return *res.apdu;
}

double object_value(const iec104::IoValue& v) {
    if (const auto* f = std::get_if<iec104::ShortFloat>(&v)) return f->value;
    if (const auto* s = std::get_if<iec104::ScaledValue>(&v)) return s->value;
    if (const auto* p = std::get_if<iec104::SinglePoint>(&v)) return p->on ? 1.0 : 0.0;
    const auto& c = std::get<iec104::SingleCommand>(v);
    return c.on ? 1.0 : 0.0;
}

}  // namespace

const std::vector<std::string>& field_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& f : kFields) v.emplace_back(f.name);
        return v;
    }();
    return names;
}

Category field_category(const std::string& field) {
    for (const auto& f : kFields)
        if (field == f.name) return f.category;
    throw std::invalid_argument("unknown event field: " + field);
}

const std::vector<std::string>& class_vocabulary() {
    static const std::vector<std::string> classes = {
        "Normal",  "ArpSpoofing", "DoS",       "ValueManipulation",
        "Replay",  "SshBruteforce", "Discovery",
    };
    return classes;
}

std::string class_of_ttp(const std::optional<std::string>& ttp) {
    if (!ttp) return "Normal";
    for (const auto& m : kTtpClasses)
        if (ttp->rfind(m.prefix, 0) == 0) return m.cls;
    throw std::runtime_error("unknown ttp label: " + *ttp);
}

netsim::MitrePhase phase_of_class(const std::string& cls) {
    if (cls == "DoS" || cls == "ValueManipulation") return netsim::MitrePhase::Impact;
    if (cls == "Replay") return netsim::MitrePhase::DefenseEvasion;
    if (cls == "SshBruteforce") return netsim::MitrePhase::CredentialAccess;
    if (cls == "Discovery") return netsim::MitrePhase::Discovery;
    if (cls == "ArpSpoofing") return netsim::MitrePhase::LateralMovement;
    throw std::invalid_argument("no phase mapping for class " + cls);
}

int priority_for_phase(const std::optional<std::string>& phase) {
    if (!phase) return 4;
    if (*phase == "Impact" || *phase == "CommandAndControl") return 1;
    if (*phase == "CredentialAccess" || *phase == "LateralMovement" ||
        *phase == "PrivilegeEscalation")
        return 2;
    return 3;
}

std::vector<Event> dissect(const netsim::Capture& capture) {
    std::vector<Event> out;
    out.reserve(capture.records.size());
    for (std::size_t i = 0; i < capture.records.size(); ++i) {
        const auto& rec = capture.records[i];
        Event ev;
        ev.timestamp = rec.ts_seconds();
        ev.id = static_cast<std::int64_t>(i);
        if (rec.ground_truth) {
            ev.phase = netsim::to_string(rec.ground_truth->phase);
            ev.ttp = rec.ground_truth->ttp;
        }
        ev.priority = priority_for_phase(ev.phase);
        ev.packet_length = static_cast<std::int64_t>(rec.bytes.size());

        auto parsed = wire::parse_frame(rec.bytes);
        if (!parsed.ok) {
            ev.categorization = "eth.unknown";
            ev.protocol = "OTHER";
            out.push_back(std::move(ev));
            continue;
        }
        ev.src_mac = wire::mac_to_string(parsed.frame.src);
        ev.dst_mac = wire::mac_to_string(parsed.frame.dst);

        if (parsed.frame.arp) {
            const auto& arp = *parsed.frame.arp;
            ev.protocol = "ARP";
            ev.categorization = arp.oper == 1 ? "arp.request" : "arp.reply";
            ev.src_ip = wire::ipv4_to_string(arp.sender_ip);
            ev.dst_ip = wire::ipv4_to_string(arp.target_ip);
            out.push_back(std::move(ev));
            continue;
        }

        const auto& ip = *parsed.frame.ip;
        const auto& tcp = ip.tcp;
        ev.src_ip = wire::ipv4_to_string(ip.src);
        ev.dst_ip = wire::ipv4_to_string(ip.dst);
        ev.sport = tcp.sport;
        ev.dport = tcp.dport;
        ev.window_size = tcp.window;
        ev.payload_size = static_cast<int>(tcp.payload.size());
        ev.flag = tcp.flags;
        ev.raw_seq = tcp.seq;
        ev.raw_ack = tcp.ack;

        const bool iec_port = tcp.sport == 2404 || tcp.dport == 2404;
        const bool ssh_port = tcp.sport == 22 || tcp.dport == 22;
        if (iec_port && !tcp.payload.empty()) {
            ev.protocol = "IEC104";
            auto apdu = first_apdu(tcp.payload);
            if (!apdu) {
                ev.categorization = "iec104.malformed";
                ev.iec104_frame = "malformed";
            } else if (const auto* u = std::get_if<iec104::UFrame>(&apdu->control)) {
                (void)u;
                ev.categorization = "iec104.u-frame";
                ev.iec104_frame = "u";
            } else if (std::holds_alternative<iec104::SFrame>(apdu->control)) {
                ev.categorization = "iec104.s-frame";
                ev.iec104_frame = "s";
            } else {
                ev.iec104_frame = "i";
                const auto& ifr = std::get<iec104::IFrame>(apdu->control);
                ev.raw_iec_tx = ifr.tx_seq;
                ev.raw_iec_rx = ifr.rx_seq;
                const auto& asdu = *apdu->asdu;
                const bool command = asdu.type_id == iec104::TypeId::C_SC_NA_1 ||
                                     asdu.type_id == iec104::TypeId::C_SE_NC_1;
                ev.categorization = command ? "iec104.command" : "iec104.i-frame";
                ev.iec104_type_id = static_cast<int>(asdu.type_id);
                ev.iec104_cot = static_cast<int>(asdu.cot);
                ev.iec104_oa = asdu.origin_address;
                ev.iec104_coa = asdu.common_address;
                ev.iec104_numix = static_cast<int>(asdu.objects.size());
                if (!asdu.objects.empty()) {
                    const auto& obj = asdu.objects.front();
                    ev.iec104_ioa = obj.ioa;
                    const double value = object_value(obj.value);
                    if (command)
                        ev.iec104_control = value;
                    else
                        ev.iec104_io_value = value;
                    if (asdu.type_id == iec104::TypeId::M_SP_NA_1) ev.iec104_status = value;
                }
            }
        } else if (ssh_port && !tcp.payload.empty()) {
            ev.protocol = "SSH";
            ev.categorization = "ssh.data";
        } else {
            ev.protocol = "TCP";
            const auto f = tcp.flags;
            if (f & wire::tcpflag::kRst)
                ev.categorization = "tcp.rst";
            else if ((f & wire::tcpflag::kSyn) && (f & wire::tcpflag::kAck))
                ev.categorization = "tcp.synack";
            else if (f & wire::tcpflag::kSyn)
                ev.categorization = "tcp.syn";
            else if (f & wire::tcpflag::kFin)
                ev.categorization = "tcp.fin";
            else if (!tcp.payload.empty())
                ev.categorization = "tcp.data";
            else
                ev.categorization = "tcp.ack";
        }
        out.push_back(std::move(ev));
    }
    return out;
}

void derive_features(std::vector<Event>& events) {
    struct FlowLast {
        std::uint32_t seq = 0, ack = 0;
    };
    struct PendingRtt {
        std::uint32_t expected_ack = 0;
        double t = 0.0;
    };
    struct IecLast {
        int tx = 0, rx = 0;
    };

    std::map<std::string, FlowLast> flow_last;
    std::map<std::string, PendingRtt> pending_rtt;
    std::map<std::string, IecLast> iec_last;
    std::map<std::string, std::deque<double>> sigma_window;

    std::deque<double> general_times;
    std::map<std::string, std::deque<double>> proto_times;
    std::deque<std::pair<double, double>> bytes_window;
    double bytes_sum = 0.0;

    for (auto& ev : events) {
        const double t = ev.timestamp;

        general_times.push_back(t);
        while (!general_times.empty() && general_times.front() <= t - 1.0)
            general_times.pop_front();
        ev.frequency_general = static_cast<double>(general_times.size());

        auto& pt = proto_times[ev.protocol];
        pt.push_back(t);
        while (!pt.empty() && pt.front() <= t - 1.0) pt.pop_front();
        ev.frequency_proto = static_cast<double>(pt.size());

        bytes_window.emplace_back(t, static_cast<double>(ev.packet_length));
        bytes_sum += static_cast<double>(ev.packet_length);
        while (!bytes_window.empty() && bytes_window.front().first <= t - 1.0) {
            bytes_sum -= bytes_window.front().second;
            bytes_window.pop_front();
        }
        ev.throughput = bytes_sum;

        if (!ev.sport || !ev.raw_seq) continue;  // the rest needs TCP headers

        const std::string fwd = ev.src_ip + ":" + std::to_string(*ev.sport) + ">" + ev.dst_ip +
                                ":" + std::to_string(*ev.dport);
        const std::string rev = ev.dst_ip + ":" + std::to_string(*ev.dport) + ">" + ev.src_ip +
                                ":" + std::to_string(*ev.sport);

        auto lit = flow_last.find(fwd);
        if (lit != flow_last.end()) {
            ev.diff_seq = static_cast<std::int64_t>(*ev.raw_seq) -
                          static_cast<std::int64_t>(lit->second.seq);
            ev.diff_ack = static_cast<std::int64_t>(*ev.raw_ack) -
                          static_cast<std::int64_t>(lit->second.ack);
        }
        flow_last[fwd] = FlowLast{*ev.raw_seq, *ev.raw_ack};

        // rtt: this segment may acknowledge the peer's last SYN or data
        const bool has_ack = ev.flag && (*ev.flag & wire::tcpflag::kAck);
        auto pit = pending_rtt.find(rev);
        if (has_ack && pit != pending_rtt.end() && *ev.raw_ack == pit->second.expected_ack) {
            ev.rtt = t - pit->second.t;
            pending_rtt.erase(pit);
        }
        const bool is_syn = ev.flag && (*ev.flag & wire::tcpflag::kSyn);
        const int payload = ev.payload_size.value_or(0);
        if (is_syn)
            pending_rtt[fwd] = PendingRtt{*ev.raw_seq + 1, t};
        else if (payload > 0)
            pending_rtt[fwd] = PendingRtt{*ev.raw_seq + static_cast<std::uint32_t>(payload), t};

        if (ev.raw_iec_tx) {
            auto iit = iec_last.find(fwd);
            if (iit != iec_last.end()) {
                ev.diff_tx = *ev.raw_iec_tx - iit->second.tx;
                ev.diff_rx = *ev.raw_iec_rx - iit->second.rx;
            }
            iec_last[fwd] = IecLast{*ev.raw_iec_tx, *ev.raw_iec_rx};
        }

        if (ev.iec104_io_value && ev.iec104_coa && ev.iec104_ioa) {
            const std::string key =
                std::to_string(*ev.iec104_coa) + "/" + std::to_string(*ev.iec104_ioa);
            auto& win = sigma_window[key];
            win.push_back(*ev.iec104_io_value);
            if (win.size() > 10) win.pop_front();
            double mean = 0.0;
            for (double v : win) mean += v;
            mean /= static_cast<double>(win.size());
            double var = 0.0;
            for (double v : win) var += (v - mean) * (v - mean);
            var /= static_cast<double>(win.size());
            ev.iec104_value_sigma = std::sqrt(var);
        }
    }
}

std::string CategoryMask::name() const {
    std::string out;
    if (it) out += "IT";
    if (ot) out += out.empty() ? "OT" : "+OT";
    if (et) out += out.empty() ? "ET" : "+ET";
    return out;
}

bool CategoryMask::includes(Category c) const {
    switch (c) {
        case Category::Global: return true;
        case Category::IT: return it;
        case Category::OT: return ot;
        case Category::ET: return et;
    }
    return false;
}

CategoryMask parse_mask(const std::string& name) {
    CategoryMask mask;
    std::stringstream ss(name);
    std::string part;
    while (std::getline(ss, part, '+')) {
        if (part == "IT") mask.it = true;
        else if (part == "OT") mask.ot = true;
        else if (part == "ET") mask.et = true;
        else throw std::invalid_argument("unknown mask component: " + part);
    }
    if (!mask.it && !mask.ot && !mask.et)
        throw std::invalid_argument("mask must include at least one category");
    return mask;
}

const std::vector<CategoryMask>& all_masks() {
    static const std::vector<CategoryMask> masks = {
        {true, false, false}, {false, true, false}, {false, false, true},
        {true, true, false},  {true, false, true},  {false, true, true},
        {true, true, true},
    };
    return masks;
}

namespace {

bool is_feature_excluded(const std::string& f) {
    // identifiers and ground-truth-derived fields never feed the models;
    // neither does the wall-clock position of an event, which would encode
    // the scripted stage windows instead of traffic structure
    return f == "phase" || f == "ttp" || f == "id" || f == "priority" || f == "timestamp";
}

bool is_categorical(const std::string& f) {
    return f == "categorization" || f == "src_mac" || f == "dst_mac" || f == "src_ip" ||
           f == "dst_ip" || f == "protocol" || f == "iec104_frame";
}

bool is_nullable(const std::string& f) {
    static const std::set<std::string> non_null = {
        "timestamp",        "categorization", "src_mac",    "dst_mac",
        "src_ip",           "dst_ip",         "packet_length", "protocol",
        "frequency_general", "frequency_proto", "throughput",
    };
    return non_null.count(f) == 0;
}

std::optional<std::string> string_value(const Event& ev, const std::string& f) {
    if (f == "categorization") return ev.categorization;
    if (f == "src_mac") return ev.src_mac;
    if (f == "dst_mac") return ev.dst_mac;
    if (f == "src_ip") return ev.src_ip;
    if (f == "dst_ip") return ev.dst_ip;
    if (f == "protocol") return ev.protocol;
    if (f == "iec104_frame") return ev.iec104_frame;
    throw std::invalid_argument("not a categorical field: " + f);
}

template <typename T>
std::optional<double> as_num(const std::optional<T>& v) {
    if (!v) return std::nullopt;
    return static_cast<double>(*v);
}

std::optional<double> numeric_value(const Event& ev, const std::string& f) {
    if (f == "timestamp") return ev.timestamp;
    if (f == "packet_length") return static_cast<double>(ev.packet_length);
    if (f == "sport") return as_num(ev.sport);
    if (f == "dport") return as_num(ev.dport);
    if (f == "window_size") return as_num(ev.window_size);
    if (f == "payload_size") return as_num(ev.payload_size);
    if (f == "diff_seq") return as_num(ev.diff_seq);
    if (f == "diff_ack") return as_num(ev.diff_ack);
    if (f == "flag") return as_num(ev.flag);
    if (f == "rtt") return ev.rtt;
    if (f == "frequency_general") return ev.frequency_general;
    if (f == "frequency_proto") return ev.frequency_proto;
    if (f == "throughput") return ev.throughput;
    if (f == "diff_tx") return as_num(ev.diff_tx);
    if (f == "diff_rx") return as_num(ev.diff_rx);
    if (f == "iec104_type_id") return as_num(ev.iec104_type_id);
    if (f == "iec104_oa") return as_num(ev.iec104_oa);
    if (f == "iec104_numix") return as_num(ev.iec104_numix);
    if (f == "iec104_coa") return as_num(ev.iec104_coa);
    if (f == "iec104_ioa") return as_num(ev.iec104_ioa);
    if (f == "iec104_cot") return as_num(ev.iec104_cot);
    if (f == "iec104_value_sigma") return ev.iec104_value_sigma;
    if (f == "iec104_io_value") return ev.iec104_io_value;
    if (f == "iec104_control") return ev.iec104_control;
    if (f == "iec104_status") return ev.iec104_status;
    throw std::invalid_argument("not a numeric field: " + f);
}

}  // namespace

LabeledDataset apply_mask(const std::vector<Event>& events, const CategoryMask& mask) {
    LabeledDataset ds;
    ds.mask_name = mask.name();
    ds.class_names = class_vocabulary();

    std::vector<std::string> cols;
    for (const auto& f : field_names()) {
        if (is_feature_excluded(f)) continue;
        if (!mask.includes(field_category(f))) continue;
        cols.push_back(f);
    }

    for (const auto& c : cols) {
        if (!is_categorical(c)) continue;
        std::set<std::string> values;
        for (const auto& ev : events) {
            auto v = string_value(ev, c);
            if (v) values.insert(*v);
        }
        ds.vocabularies[c] = std::vector<std::string>(values.begin(), values.end());
    }

    for (const auto& c : cols) {
        ds.feature_names.push_back(c);
        if (is_nullable(c)) ds.feature_names.push_back(c + "__present");
    }

    auto encode = [&](const std::string& col, const std::optional<std::string>& v) -> double {
        if (!v) return -1.0;
        const auto& vocab = ds.vocabularies.at(col);
        const auto it = std::lower_bound(vocab.begin(), vocab.end(), *v);
        return static_cast<double>(it - vocab.begin());
    };

    ds.rows.reserve(events.size());
    ds.labels.reserve(events.size());
    for (const auto& ev : events) {
        std::vector<double> row;
        row.reserve(ds.feature_names.size());
        for (const auto& c : cols) {
            if (is_categorical(c)) {
                const auto v = string_value(ev, c);
                row.push_back(encode(c, v));
                if (is_nullable(c)) row.push_back(v ? 1.0 : 0.0);
            } else {
                const auto v = numeric_value(ev, c);
                row.push_back(v.value_or(-1.0));
                if (is_nullable(c)) row.push_back(v ? 1.0 : 0.0);
            }
        }
        ds.rows.push_back(std::move(row));
        const auto cls = class_of_ttp(ev.ttp);
        const auto it = std::find(ds.class_names.begin(), ds.class_names.end(), cls);
        ds.labels.push_back(static_cast<int>(it - ds.class_names.begin()));
    }
    return ds;
}

LabeledDataset balance_sample(const LabeledDataset& ds, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> per_class(ds.class_names.size());
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
        per_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    std::size_t m = SIZE_MAX;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        if (per_class[c].empty()) throw EmptyClass(ds.class_names[c]);
        m = std::min(m, per_class[c].size());
    }
    Rng rng(seed);
    std::vector<std::size_t> keep;
    for (auto& ixs : per_class) {
        rng.shuffle(ixs);
        keep.insert(keep.end(), ixs.begin(), ixs.begin() + static_cast<std::ptrdiff_t>(m));
    }
    std::sort(keep.begin(), keep.end());
    LabeledDataset out;
    out.feature_names = ds.feature_names;
    out.class_names = ds.class_names;
    out.vocabularies = ds.vocabularies;
    out.mask_name = ds.mask_name;
    for (auto ix : keep) {
        out.rows.push_back(ds.rows[ix]);
        out.labels.push_back(ds.labels[ix]);
    }
    return out;
}

std::vector<std::vector<int>> binarize_labels(const LabeledDataset& ds) {
    std::vector<std::vector<int>> out(ds.class_names.size(),
                                      std::vector<int>(ds.labels.size(), 0));
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
        out[static_cast<std::size_t>(ds.labels[i])][i] = 1;
    return out;
}

namespace {

template <typename T>
ordered_json opt_json(const std::optional<T>& v) {
    if (!v) return nullptr;
    return *v;
}

}  // namespace

std::string events_to_jsonl(const std::vector<Event>& events) {
    std::ostringstream out;
    for (const auto& ev : events) {
        ordered_json j;
        j["timestamp"] = ev.timestamp;
        j["categorization"] = ev.categorization;
        j["priority"] = ev.priority;
        j["phase"] = opt_json(ev.phase);
        j["ttp"] = opt_json(ev.ttp);
        j["id"] = ev.id;
        j["src_mac"] = ev.src_mac;
        j["dst_mac"] = ev.dst_mac;
        j["src_ip"] = ev.src_ip;
        j["dst_ip"] = ev.dst_ip;
        j["packet_length"] = ev.packet_length;
        j["protocol"] = ev.protocol;
        j["sport"] = opt_json(ev.sport);
        j["dport"] = opt_json(ev.dport);
        j["window_size"] = opt_json(ev.window_size);
        j["payload_size"] = opt_json(ev.payload_size);
        j["diff_seq"] = opt_json(ev.diff_seq);
        j["diff_ack"] = opt_json(ev.diff_ack);
        j["flag"] = opt_json(ev.flag);
        j["rtt"] = opt_json(ev.rtt);
        j["frequency_general"] = ev.frequency_general;
        j["frequency_proto"] = ev.frequency_proto;
        j["throughput"] = ev.throughput;
        j["iec104_frame"] = opt_json(ev.iec104_frame);
        j["diff_tx"] = opt_json(ev.diff_tx);
        j["diff_rx"] = opt_json(ev.diff_rx);
        j["iec104_type_id"] = opt_json(ev.iec104_type_id);
        j["iec104_oa"] = opt_json(ev.iec104_oa);
        j["iec104_numix"] = opt_json(ev.iec104_numix);
        j["iec104_coa"] = opt_json(ev.iec104_coa);
        j["iec104_ioa"] = opt_json(ev.iec104_ioa);
        j["iec104_cot"] = opt_json(ev.iec104_cot);
        j["iec104_value_sigma"] = opt_json(ev.iec104_value_sigma);
        j["iec104_io_value"] = opt_json(ev.iec104_io_value);
        j["iec104_control"] = opt_json(ev.iec104_control);
        j["iec104_status"] = opt_json(ev.iec104_status);
        out << j.dump() << '\n';
    }
    return out.str();
}

namespace {

template <typename T>
std::optional<T> opt_from(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<T>();
}

}  // namespace

std::vector<Event> events_from_jsonl(const std::string& text) {
    std::vector<Event> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        // schema fidelity: exactly the table's field names
        if (j.size() != field_names().size())
            throw std::runtime_error("event line " + std::to_string(line_no) +
                                     ": wrong field count");
        for (const auto& f : field_names())
            if (!j.contains(f))
                throw std::runtime_error("event line " + std::to_string(line_no) +
                                         ": missing field " + f);
        Event ev;
        ev.timestamp = j.at("timestamp").get<double>();
        ev.categorization = j.at("categorization").get<std::string>();
        ev.priority = j.at("priority").get<int>();
        ev.phase = opt_from<std::string>(j, "phase");
        ev.ttp = opt_from<std::string>(j, "ttp");
        ev.id = j.at("id").get<std::int64_t>();
        ev.src_mac = j.at("src_mac").get<std::string>();
        ev.dst_mac = j.at("dst_mac").get<std::string>();
        ev.src_ip = j.at("src_ip").get<std::string>();
        ev.dst_ip = j.at("dst_ip").get<std::string>();
        ev.packet_length = j.at("packet_length").get<std::int64_t>();
        ev.protocol = j.at("protocol").get<std::string>();
        ev.sport = opt_from<int>(j, "sport");
        ev.dport = opt_from<int>(j, "dport");
        ev.window_size = opt_from<int>(j, "window_size");
        ev.payload_size = opt_from<int>(j, "payload_size");
        ev.diff_seq = opt_from<std::int64_t>(j, "diff_seq");
        ev.diff_ack = opt_from<std::int64_t>(j, "diff_ack");
        ev.flag = opt_from<int>(j, "flag");
        ev.rtt = opt_from<double>(j, "rtt");
        ev.frequency_general = j.at("frequency_general").get<double>();
        ev.frequency_proto = j.at("frequency_proto").get<double>();
        ev.throughput = j.at("throughput").get<double>();
        ev.iec104_frame = opt_from<std::string>(j, "iec104_frame");
        ev.diff_tx = opt_from<int>(j, "diff_tx");
        ev.diff_rx = opt_from<int>(j, "diff_rx");
        ev.iec104_type_id = opt_from<int>(j, "iec104_type_id");
        ev.iec104_oa = opt_from<int>(j, "iec104_oa");
        ev.iec104_numix = opt_from<int>(j, "iec104_numix");
        ev.iec104_coa = opt_from<int>(j, "iec104_coa");
        ev.iec104_ioa = opt_from<std::int64_t>(j, "iec104_ioa");
        ev.iec104_cot = opt_from<int>(j, "iec104_cot");
        ev.iec104_value_sigma = opt_from<double>(j, "iec104_value_sigma");
        ev.iec104_io_value = opt_from<double>(j, "iec104_io_value");
        ev.iec104_control = opt_from<double>(j, "iec104_control");
        ev.iec104_status = opt_from<double>(j, "iec104_status");
        out.push_back(std::move(ev));
    }
    return out;
}

std::string dataset_to_csv(const LabeledDataset& ds) {
    std::ostringstream out;
    for (std::size_t i = 0; i < ds.feature_names.size(); ++i)
        out << ds.feature_names[i] << ',';
    out << "label\n";
    out.precision(17);
    for (std::size_t r = 0; r < ds.rows.size(); ++r) {
        for (double v : ds.rows[r]) out << v << ',';
        out << ds.class_names[static_cast<std::size_t>(ds.labels[r])] << '\n';
    }
    return out.str();
}

}  // namespace gridwatch::events
