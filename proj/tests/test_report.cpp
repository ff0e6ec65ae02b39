#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridwatch/report.hpp"
#include "gridwatch/rng.hpp"

using namespace gridwatch;
using namespace gridwatch::report;

TEST_CASE("perfect predictions score 1.0 everywhere") {
    const std::vector<int> truth = {0, 1, 2, 1, 0};
    const auto rep = score(truth, truth, {"A", "B", "C"});
    for (const auto& m : rep.per_class) {
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
    CHECK(rep.accuracy == 1.0);
}

TEST_CASE("hand-computed class metrics") {
    // class 0: TP=1 (i0), FP=1 (i2 predicted 0 but truth 1), FN=0
    const std::vector<int> truth = {0, 1, 1};
    const std::vector<int> pred = {0, 1, 0};
    const auto rep = score(pred, truth, {"A", "B"});
    CHECK(rep.per_class[0].precision == doctest::Approx(0.5));
    CHECK(rep.per_class[0].recall == doctest::Approx(1.0));
    CHECK(rep.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(rep.accuracy == doctest::Approx(2.0 / 3.0));
    // confusion row sums equal per-class truth counts
    CHECK(rep.confusion[0][0] + rep.confusion[0][1] == 1);
    CHECK(rep.confusion[1][0] + rep.confusion[1][1] == 2);
}

TEST_CASE("class absent from truth and predictions is flagged no-support") {
    const std::vector<int> truth = {0, 0, 1};
    const std::vector<int> pred = {0, 1, 1};
    const auto rep = score(pred, truth, {"A", "B", "C"});
    CHECK(rep.per_class[2].no_support);
    CHECK(rep.per_class[2].precision == 0.0);
    CHECK(rep.per_class[2].recall == 0.0);
    CHECK(rep.per_class[2].f1 == 0.0);
    CHECK(!rep.per_class[0].no_support);
}

TEST_CASE("length mismatch rejected") {
    CHECK_THROWS_AS(score({0, 1}, {0}, {"A", "B"}), LengthMismatch);
}

TEST_CASE("micro recall equals accuracy; confusion total equals test size") {
    Rng rng(8);
    std::vector<int> truth, pred;
    for (int i = 0; i < 500; ++i) {
        truth.push_back(static_cast<int>(rng.uniform_int(0, 3)));
        pred.push_back(static_cast<int>(rng.uniform_int(0, 3)));
    }
    const auto rep = score(pred, truth, {"A", "B", "C", "D"});
    int tp_total = 0, truth_total = 0, conf_total = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        tp_total += rep.confusion[c][c];
        for (int v : rep.confusion[c]) conf_total += v;
        truth_total += rep.per_class[c].support;
    }
    CHECK(conf_total == rep.test_size);
    CHECK(truth_total == rep.test_size);
    CHECK(static_cast<double>(tp_total) / truth_total == doctest::Approx(rep.accuracy));
}

TEST_CASE("bootstrap: all-correct outcomes give (1,1); determinism; bracketing") {
    std::vector<Outcome> perfect(25, Outcome{1, 1});
    const auto ci = bootstrap_ci(perfect, 200, 3);
    CHECK(ci.first == 1.0);
    CHECK(ci.second == 1.0);

    // 10-instance hand case: 6 TP, 2 FP, 1 FN, 1 TN -> P=.75 R=6/7 F1~0.8
    std::vector<Outcome> hand;
    for (int i = 0; i < 6; ++i) hand.push_back({1, 1});
    for (int i = 0; i < 2; ++i) hand.push_back({1, 0});
    hand.push_back({0, 1});
    hand.push_back({0, 0});
    const double p = 6.0 / 8.0, r = 6.0 / 7.0;
    const double f1 = 2 * p * r / (p + r);
    const auto ci2 = bootstrap_ci(hand, 500, 11);
    CHECK(ci2.first <= f1);
    CHECK(ci2.second >= f1);
    CHECK(ci2.first < ci2.second);

    const auto again = bootstrap_ci(hand, 500, 11);
    CHECK(again == ci2);

    CHECK_THROWS_AS(bootstrap_ci({}, 200, 1), EmptyInput);
    CHECK_THROWS_AS(bootstrap_ci(perfect, 50, 1), std::invalid_argument);
}

namespace {

// synthetic event set with all seven classes and mask-dependent separability
std::vector<events::Event> synthetic_events(int per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<events::Event> out;
    const char* ttps[] = {nullptr,         "T1557 arp-spoof", "T1499 DoS", "T0832 value-manipulation",
                          "T0856 replay",  "T0822/T1110",     "T0846"};
    std::int64_t id = 0;
    for (int c = 0; c < 7; ++c) {
        for (int i = 0; i < per_class; ++i) {
            events::Event ev;
            ev.id = id;
            ev.timestamp = static_cast<double>(id) * 0.01;
            ++id;
            if (ttps[c]) {
                ev.ttp = ttps[c];
                ev.phase = "Impact";
            }
            ev.categorization = "cat" + std::to_string(c % 3);
            ev.protocol = c == 2 ? "TCP" : "IEC104";
            ev.src_mac = "02:00:00:00:00:01";
            ev.dst_mac = "02:00:00:00:00:02";
            ev.src_ip = "10.0.0.1";
            ev.dst_ip = "10.0.0.2";
            ev.packet_length = 60 + c;
            ev.sport = 1000 + c;
            ev.dport = 2404;
            ev.window_size = c == 2 ? 512 : 2048;
            ev.payload_size = 20;
            ev.flag = 24;
            ev.frequency_general = 10.0 + rng.uniform(-1.0, 1.0);
            ev.frequency_proto = 5.0;
            ev.throughput = 500.0;
            // OT/ET separability: value sigma splits ValueManipulation
            ev.iec104_frame = "i";
            ev.iec104_io_value = c == 3 ? 0.0 : rng.uniform(1.0, 3.0);
            ev.iec104_value_sigma = c == 3 ? 0.0 : 1.0 + rng.uniform(0.0, 0.3);
            ev.iec104_coa = 1;
            ev.iec104_ioa = 100;
            ev.iec104_cot = c == 4 ? 3 : 1;
            ev.iec104_type_id = 13;
            ev.iec104_numix = 1;
            ev.iec104_oa = 0;
            out.push_back(std::move(ev));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("compare_masks produces one report per mask, deterministically") {
    const auto evs = synthetic_events(30, 5);
    EvalOptions opt;
    opt.seed = 2;
    opt.bootstrap_resamples = 100;
    opt.hyper.iterations = 120;  // keep the unit test quick
    const auto rep = compare_masks(evs, events::all_masks(), opt);
    CHECK(rep.reports.size() == 7);
    std::set<std::string> names;
    for (const auto& r : rep.reports) {
        names.insert(r.mask_name);
        CHECK(r.per_class.size() == 7);
        CHECK(r.test_size > 0);
    }
    CHECK(names.size() == 7);

    const auto rep2 = compare_masks(evs, events::all_masks(), opt);
    CHECK(comparison_csv(rep) == comparison_csv(rep2));

    const auto csv = comparison_csv(rep);
    CHECK(csv.find("mask,class,precision") == 0);
    CHECK(csv.find("IT+OT+ET,ValueManipulation") != std::string::npos);
}

TEST_CASE("confusion csv shape") {
    const std::vector<int> truth = {0, 1, 1};
    const std::vector<int> pred = {0, 1, 0};
    auto rep = score(pred, truth, {"A", "B"});
    rep.mask_name = "IT";
    const auto csv = confusion_csv(rep);
    CHECK(csv.find("truth\\predicted,A,B\n") == 0);
    CHECK(csv.find("A,1,0\n") != std::string::npos);
    CHECK(csv.find("B,1,1\n") != std::string::npos);
}
