#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <json.hpp>

#include "gridwatch/attack.hpp"
#include "gridwatch/events.hpp"

using namespace gridwatch;
using namespace gridwatch::events;
using netsim::Capture;
using netsim::CaptureRecord;

namespace {

std::vector<std::uint8_t> tcp_frame(const char* src_ip, std::uint16_t sport, const char* dst_ip,
                                    std::uint16_t dport, std::uint32_t seq, std::uint32_t ack,
                                    std::uint8_t flags, std::vector<std::uint8_t> payload) {
    wire::EthernetFrame f;
    f.src = {0x02, 0, 0, 0, 0, 1};
    f.dst = {0x02, 0, 0, 0, 0, 2};
    f.ethertype = wire::kEtherTypeIpv4;
    wire::Ipv4Packet ip;
    auto parse_ip = [](const char* s) {
        unsigned a, b, c, d;
        std::sscanf(s, "%u.%u.%u.%u", &a, &b, &c, &d);
        return wire::ipv4_from_octets(a, b, c, d);
    };
    ip.src = parse_ip(src_ip);
    ip.dst = parse_ip(dst_ip);
    ip.tcp.sport = sport;
    ip.tcp.dport = dport;
    ip.tcp.seq = seq;
    ip.tcp.ack = ack;
    ip.tcp.flags = flags;
    ip.tcp.window = 2048;
    ip.tcp.payload = std::move(payload);
    f.ip = ip;
    return wire::build_frame(f);
}

std::vector<std::uint8_t> measurement_apdu(float value, std::uint16_t coa, std::uint32_t ioa,
                                           iec104::Cot cot) {
    iec104::Apdu apdu;
    apdu.control = iec104::IFrame{0, 0};
    iec104::Asdu asdu;
    asdu.type_id = iec104::TypeId::M_ME_NF_1;
    asdu.cot = cot;
    asdu.common_address = coa;
    asdu.objects.push_back(iec104::InformationObject{ioa, iec104::ShortFloat{value, 0}});
    apdu.asdu = asdu;
    return iec104::encode_apdu(apdu);
}

std::vector<std::uint8_t> arp_frame(bool request) {
    wire::EthernetFrame f;
    f.src = {0x02, 0, 0, 0, 0, 1};
    f.dst = {0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF};
    f.ethertype = wire::kEtherTypeArp;
    wire::ArpPacket arp;
    arp.oper = request ? 1 : 2;
    arp.sender_mac = f.src;
    arp.sender_ip = wire::ipv4_from_octets(10, 0, 0, 1);
    arp.target_ip = wire::ipv4_from_octets(10, 0, 0, 10);
    f.arp = arp;
    return wire::build_frame(f);
}

}  // namespace

TEST_CASE("dissect: arp frame leaves OT/ET fields null") {
    Capture c;
    c.records.push_back(CaptureRecord{1000, arp_frame(true), std::nullopt});
    auto evs = dissect(c);
    REQUIRE(evs.size() == 1);
    const auto& ev = evs[0];
    CHECK(ev.protocol == "ARP");
    CHECK(ev.categorization == "arp.request");
    CHECK(!ev.iec104_frame.has_value());
    CHECK(!ev.iec104_io_value.has_value());
    CHECK(!ev.sport.has_value());
    CHECK(ev.src_ip == "10.0.0.1");
    CHECK(ev.dst_ip == "10.0.0.10");
    CHECK(ev.priority == 4);
}

TEST_CASE("dissect: measurement I-frame populates the iec104 fields") {
    Capture c;
    c.records.push_back(CaptureRecord{
        2500000, tcp_frame("10.0.0.10", 2404, "10.0.0.1", 50000, 100, 200,
                           wire::tcpflag::kPsh | wire::tcpflag::kAck,
                           measurement_apdu(3.5f, 1, 100, iec104::Cot::Spontaneous)),
        std::nullopt});
    auto evs = dissect(c);
    REQUIRE(evs.size() == 1);
    const auto& ev = evs[0];
    CHECK(ev.protocol == "IEC104");
    CHECK(ev.categorization == "iec104.i-frame");
    CHECK(ev.iec104_frame == "i");
    CHECK(ev.iec104_io_value == doctest::Approx(3.5));
    CHECK(ev.iec104_coa == 1);
    CHECK(ev.iec104_ioa == 100);
    CHECK(ev.iec104_cot == 3);
    CHECK(ev.iec104_type_id == 13);
    CHECK(ev.iec104_numix == 1);
    CHECK(!ev.iec104_control.has_value());
    CHECK(ev.timestamp == doctest::Approx(2.5));
}

TEST_CASE("dissect: event count equals record count and ids are unique") {
    const auto script = attack::paper_scenario_script(3);
    auto topo = netsim::build_topology(3);
    auto grid = process::build_feeder(3, 7);
    netsim::SimOptions opts;
    opts.duration_s = 50.0;
    opts.seed = 77;
    const auto result = attack::run_scenario(std::move(topo), std::move(grid), opts, script);
    auto evs = dissect(result.capture);
    CHECK(evs.size() == result.capture.records.size());
    std::set<std::int64_t> ids;
    for (const auto& ev : evs) ids.insert(ev.id);
    CHECK(ids.size() == evs.size());
    double last = 0.0;
    for (const auto& ev : evs) {
        CHECK(ev.timestamp >= last);
        last = ev.timestamp;
    }
}

TEST_CASE("derive: first segment of a flow has null diff_seq") {
    Capture c;
    c.records.push_back(CaptureRecord{
        0, tcp_frame("10.0.0.1", 5000, "10.0.0.2", 80, 1000, 0, wire::tcpflag::kSyn, {}),
        std::nullopt});
    c.records.push_back(CaptureRecord{
        1000000,
        tcp_frame("10.0.0.1", 5000, "10.0.0.2", 80, 1001, 55, wire::tcpflag::kAck, {0x01}),
        std::nullopt});
    auto evs = dissect(c);
    derive_features(evs);
    CHECK(!evs[0].diff_seq.has_value());
    REQUIRE(evs[1].diff_seq.has_value());
    CHECK(*evs[1].diff_seq == 1);
    CHECK(*evs[1].diff_ack == 55);
}

TEST_CASE("derive: consecutive I-frames give diff_tx = 1") {
    Capture c;
    auto mk = [&](std::uint16_t tx, std::int64_t ts) {
        iec104::Apdu apdu;
        apdu.control = iec104::IFrame{tx, 0};
        iec104::Asdu asdu;
        asdu.type_id = iec104::TypeId::M_ME_NF_1;
        asdu.cot = iec104::Cot::Cyclic;
        asdu.common_address = 1;
        asdu.objects.push_back(iec104::InformationObject{100, iec104::ShortFloat{1.0f, 0}});
        apdu.asdu = asdu;
        c.records.push_back(CaptureRecord{
            ts, tcp_frame("10.0.0.10", 2404, "10.0.0.1", 50000, 100 + tx * 24u, 0,
                          wire::tcpflag::kPsh | wire::tcpflag::kAck, iec104::encode_apdu(apdu)),
            std::nullopt});
    };
    mk(0, 0);
    mk(1, 1000000);
    auto evs = dissect(c);
    derive_features(evs);
    CHECK(!evs[0].diff_tx.has_value());
    REQUIRE(evs[1].diff_tx.has_value());
    CHECK(*evs[1].diff_tx == 1);
    CHECK(*evs[1].diff_rx == 0);
}

TEST_CASE("derive: ten identical values give sigma 0") {
    Capture c;
    for (int i = 0; i < 12; ++i) {
        c.records.push_back(CaptureRecord{
            i * 1000000, tcp_frame("10.0.0.10", 2404, "10.0.0.1", 50000, 100 + 24u * i, 0,
                                   wire::tcpflag::kPsh | wire::tcpflag::kAck,
                                   measurement_apdu(2.25f, 1, 100, iec104::Cot::Cyclic)),
            std::nullopt});
    }
    auto evs = dissect(c);
    derive_features(evs);
    REQUIRE(evs.back().iec104_value_sigma.has_value());
    CHECK(*evs.back().iec104_value_sigma == doctest::Approx(0.0));

    // and varying values give a positive sigma
    Capture v;
    for (int i = 0; i < 12; ++i) {
        v.records.push_back(CaptureRecord{
            i * 1000000, tcp_frame("10.0.0.10", 2404, "10.0.0.1", 50000, 100 + 24u * i, 0,
                                   wire::tcpflag::kPsh | wire::tcpflag::kAck,
                                   measurement_apdu(1.0f + 0.5f * i, 1, 100, iec104::Cot::Cyclic)),
            std::nullopt});
    }
    auto evs2 = dissect(v);
    derive_features(evs2);
    CHECK(*evs2.back().iec104_value_sigma > 0.5);
}

TEST_CASE("derive: rtt measured from SYN to SYN-ACK") {
    Capture c;
    c.records.push_back(CaptureRecord{
        0, tcp_frame("10.0.0.1", 5000, "10.0.0.2", 2404, 1000, 0, wire::tcpflag::kSyn, {}),
        std::nullopt});
    c.records.push_back(CaptureRecord{
        12000, tcp_frame("10.0.0.2", 2404, "10.0.0.1", 5000, 7000, 1001,
                         wire::tcpflag::kSyn | wire::tcpflag::kAck, {}),
        std::nullopt});
    auto evs = dissect(c);
    derive_features(evs);
    CHECK(!evs[0].rtt.has_value());
    REQUIRE(evs[1].rtt.has_value());
    CHECK(*evs[1].rtt == doctest::Approx(0.012));
}

TEST_CASE("masks: field categories and the seven combinations") {
    CHECK(all_masks().size() == 7);
    std::set<std::string> names;
    for (const auto& m : all_masks()) names.insert(m.name());
    CHECK(names.size() == 7);
    CHECK(names.count("IT"));
    CHECK(names.count("IT+OT+ET"));

    CHECK(field_category("window_size") == Category::IT);
    CHECK(field_category("iec104_io_value") == Category::ET);
    CHECK(field_category("iec104_cot") == Category::OT);
    CHECK(field_category("timestamp") == Category::Global);

    const auto m = parse_mask("OT+ET");
    CHECK(!m.it);
    CHECK(m.ot);
    CHECK(m.et);
    CHECK_THROWS_AS(parse_mask("XX"), std::invalid_argument);
}

TEST_CASE("apply_mask: column sets follow the categories") {
    Capture c;
    c.records.push_back(CaptureRecord{
        0, tcp_frame("10.0.0.10", 2404, "10.0.0.1", 50000, 1, 1,
                     wire::tcpflag::kPsh | wire::tcpflag::kAck,
                     measurement_apdu(1.0f, 1, 100, iec104::Cot::Cyclic)),
        std::nullopt});
    c.records.push_back(CaptureRecord{1000, arp_frame(false),
                                      netsim::GroundTruth{netsim::MitrePhase::LateralMovement,
                                                          "T1557 arp-spoof"}});
    auto evs = dissect(c);
    derive_features(evs);

    auto has = [](const LabeledDataset& ds, const std::string& col) {
        return std::find(ds.feature_names.begin(), ds.feature_names.end(), col) !=
               ds.feature_names.end();
    };

    const auto it_only = apply_mask(evs, parse_mask("IT"));
    CHECK(has(it_only, "window_size"));
    CHECK(!has(it_only, "iec104_io_value"));
    for (const auto& f : it_only.feature_names) CHECK(f.rfind("iec104", 0) != 0);

    const auto otet = apply_mask(evs, parse_mask("OT+ET"));
    CHECK(!has(otet, "src_ip"));
    CHECK(has(otet, "iec104_io_value"));
    CHECK(has(otet, "iec104_cot"));

    const auto full = apply_mask(evs, parse_mask("IT+OT+ET"));
    CHECK(has(full, "window_size"));
    CHECK(has(full, "iec104_io_value"));
    CHECK(has(full, "categorization"));
    // ground-truth fields and the event's wall-clock position never become features
    CHECK(!has(full, "phase"));
    CHECK(!has(full, "ttp"));
    CHECK(!has(full, "id"));
    CHECK(!has(full, "priority"));
    CHECK(!has(full, "timestamp"));

    // masking monotonicity: IT columns are a subset of IT+OT+ET columns
    std::set<std::string> full_cols(full.feature_names.begin(), full.feature_names.end());
    for (const auto& f : it_only.feature_names) CHECK(full_cols.count(f) == 1);

    // labels carried through
    CHECK(full.labels[0] == 0);  // Normal
    CHECK(full.class_names[full.labels[1]] == "ArpSpoofing");

    // no missing values after encoding
    for (const auto& row : full.rows)
        for (double v : row) CHECK(std::isfinite(v));
}

TEST_CASE("balance_sample downsamples to the minority class") {
    LabeledDataset ds;
    ds.class_names = {"A", "B", "C"};
    ds.feature_names = {"x"};
    for (int i = 0; i < 1000; ++i) {
        ds.rows.push_back({static_cast<double>(i)});
        ds.labels.push_back(0);
    }
    for (int i = 0; i < 100; ++i) {
        ds.rows.push_back({static_cast<double>(1000 + i)});
        ds.labels.push_back(1);
    }
    for (int i = 0; i < 100; ++i) {
        ds.rows.push_back({static_cast<double>(2000 + i)});
        ds.labels.push_back(2);
    }
    const auto b = balance_sample(ds, 5);
    CHECK(b.rows.size() == 300);
    int counts[3] = {0, 0, 0};
    for (int l : b.labels) ++counts[l];
    CHECK(counts[0] == 100);
    CHECK(counts[1] == 100);
    CHECK(counts[2] == 100);

    const auto b2 = balance_sample(ds, 5);
    CHECK(b.rows == b2.rows);  // determinism
    const auto b3 = balance_sample(ds, 6);
    CHECK(b.rows != b3.rows);

    // already balanced: row set preserved in original order
    LabeledDataset even;
    even.class_names = {"A", "B"};
    even.feature_names = {"x"};
    for (int i = 0; i < 10; ++i) {
        even.rows.push_back({static_cast<double>(i)});
        even.labels.push_back(i % 2);
    }
    const auto eb = balance_sample(even, 9);
    CHECK(eb.rows == even.rows);
    CHECK(eb.labels == even.labels);

    LabeledDataset missing;
    missing.class_names = {"A", "B"};
    missing.feature_names = {"x"};
    missing.rows.push_back({1.0});
    missing.labels.push_back(0);
    CHECK_THROWS_AS(balance_sample(missing, 1), EmptyClass);
}

TEST_CASE("binarize_labels yields one-hot rows with matching column sums") {
    LabeledDataset ds;
    ds.class_names = {"A", "B", "C"};
    ds.labels = {0, 1, 2, 1, 1};
    ds.rows.assign(5, {0.0});
    const auto bin = binarize_labels(ds);
    REQUIRE(bin.size() == 3);
    for (std::size_t r = 0; r < ds.labels.size(); ++r) {
        int ones = 0;
        for (const auto& v : bin) ones += v[r];
        CHECK(ones == 1);
    }
    int sum_b = 0;
    for (int v : bin[1]) sum_b += v;
    CHECK(sum_b == 3);
}

TEST_CASE("schema fidelity and jsonl round trip") {
    CHECK(field_names().size() == 36);

    const auto script = attack::paper_scenario_script(3);
    auto topo = netsim::build_topology(3);
    auto grid = process::build_feeder(3, 7);
    netsim::SimOptions opts;
    opts.duration_s = 40.0;
    opts.seed = 13;
    const auto result = attack::run_scenario(std::move(topo), std::move(grid), opts, script);
    auto evs = dissect(result.capture);
    derive_features(evs);

    const auto text = events_to_jsonl(evs);
    // every line carries exactly the table's fields
    std::istringstream in(text);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        const auto j = nlohmann::json::parse(line);
        CHECK(j.size() == 36);
        for (const auto& f : field_names()) CHECK(j.contains(f));
    }
    CHECK(lines == static_cast<int>(evs.size()));

    const auto back = events_from_jsonl(text);
    REQUIRE(back.size() == evs.size());
    CHECK(events_to_jsonl(back) == text);

    // dissect+derive on an exported-then-reimported capture matches
    const auto cap_text = netsim::capture_to_jsonl(result.capture);
    const auto cap_back = netsim::capture_from_jsonl(cap_text);
    auto evs2 = dissect(cap_back);
    derive_features(evs2);
    CHECK(events_to_jsonl(evs2) == text);
}

TEST_CASE("dataset csv export has a header row and one line per row") {
    LabeledDataset ds;
    ds.class_names = {"Normal", "DoS"};
    ds.feature_names = {"a", "b"};
    ds.rows = {{1.0, 2.0}, {3.5, -1.0}};
    ds.labels = {0, 1};
    const auto csv = dataset_to_csv(ds);
    CHECK(csv.rfind("a,b,label\n", 0) == 0);
    CHECK(csv.find("1,2,Normal\n") != std::string::npos);
    CHECK(csv.find("3.5,-1,DoS\n") != std::string::npos);
}

TEST_CASE("class mapping covers the scenario ttps") {
    CHECK(class_of_ttp(std::nullopt) == "Normal");
    CHECK(class_of_ttp(std::string("T1557 arp-spoof")) == "ArpSpoofing");
    CHECK(class_of_ttp(std::string("T1499 DoS")) == "DoS");
    CHECK(class_of_ttp(std::string("T0814")) == "DoS");
    CHECK(class_of_ttp(std::string("T0832 value-manipulation")) == "ValueManipulation");
    CHECK(class_of_ttp(std::string("T0856 replay")) == "Replay");
    CHECK(class_of_ttp(std::string("T0822/T1110")) == "SshBruteforce");
    CHECK(class_of_ttp(std::string("T0846")) == "Discovery");
    CHECK_THROWS(class_of_ttp(std::string("T9999 wat")));
    CHECK(class_vocabulary().size() == 7);
}
