#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gridwatch/process.hpp"

using namespace gridwatch;
using namespace gridwatch::process;

namespace {

// chain 0 - 1 - ... - (n-1) with fixed loads and no noise
GridModel chain_model(int n, std::vector<double> loads, double z = 0.002) {
    GridModel m;
    m.seed = 1;
    for (int i = 0; i < n; ++i) {
        Station st;
        st.id = i;
        if (i > 0) {
            st.parent = i - 1;
            st.line_impedance_factor = z;
        }
        st.load.base_mw = loads[i];
        st.load.daily_shape.fill(1.0);
        st.load.noise_sigma = 0.0;
        m.stations.push_back(st);
    }
    return m;
}

}  // namespace

TEST_CASE("build_feeder determinism and shape") {
    const auto a = build_feeder(26, 7);
    const auto b = build_feeder(26, 7);
    REQUIRE(a.stations.size() == 26);
    CHECK(a.line_count() == 25);
    for (std::size_t i = 0; i < a.stations.size(); ++i) {
        CHECK(a.stations[i].parent == b.stations[i].parent);
        CHECK(a.stations[i].load.base_mw == b.stations[i].load.base_mw);
    }
    const auto c = build_feeder(26, 8);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.stations.size(); ++i)
        if (a.stations[i].load.base_mw != c.stations[i].load.base_mw) any_diff = true;
    CHECK(any_diff);

    const auto single = build_feeder(1, 3);
    CHECK(single.stations.size() == 1);
    CHECK(single.line_count() == 0);
    CHECK(!single.stations[0].parent.has_value());
}

TEST_CASE("zero loads give zero flow and nominal voltage") {
    Feeder f(chain_model(4, {0, 0, 0, 0}));
    const auto& st = f.step(1.0);
    for (int i = 1; i < 4; ++i) {
        CHECK(st.line_flow_mw[i] == doctest::Approx(0.0));
        CHECK(st.bus_voltage_pu[i] == doctest::Approx(1.0));
    }
}

TEST_CASE("single leaf load flows along the whole root path") {
    Feeder f(chain_model(4, {0, 0, 0, 1.0}));
    const auto& st = f.step(1.0);
    for (int i = 1; i < 4; ++i) CHECK(st.line_flow_mw[i] == doctest::Approx(1.0));
}

TEST_CASE("chain voltage drop matches hand evaluation") {
    // 3 stations, z = 0.002 pu/MW per line, 5 MW at the leaf:
    // leaf voltage = 1.0 - 2 * (5 * 0.002) = 0.98
    Feeder f(chain_model(3, {0, 0, 5.0}));
    const auto& st = f.step(1.0);
    CHECK(st.bus_voltage_pu[2] == doctest::Approx(0.98).epsilon(1e-12));
}

TEST_CASE("switch commands isolate subtrees next step") {
    Feeder f(chain_model(3, {0, 1.0, 1.0}));
    f.step(1.0);
    f.apply_command(SwitchCommand{2, false});
    const auto& st = f.step(1.0);
    CHECK(st.line_flow_mw[2] == doctest::Approx(0.0));
    CHECK(st.station_measurements[2].isolated);
    CHECK(st.line_flow_mw[1] == doctest::Approx(1.0));  // station 1 still served

    // closing an already-closed switch leaves the trajectory unchanged
    Feeder g1(chain_model(3, {0, 1.0, 1.0}));
    Feeder g2(chain_model(3, {0, 1.0, 1.0}));
    g2.apply_command(SwitchCommand{1, true});
    const auto& s1 = g1.step(1.0);
    const auto& s2 = g2.step(1.0);
    for (int i = 0; i < 3; ++i) CHECK(s1.line_flow_mw[i] == s2.line_flow_mw[i]);
}

TEST_CASE("DER setpoint reduces upstream flow next step") {
    Feeder f(chain_model(3, {0, 0, 3.0}));
    const auto& before = f.step(1.0);
    CHECK(before.line_flow_mw[1] == doctest::Approx(3.0));
    f.apply_command(SetpointCommand{2, 2.0});
    const auto& after = f.step(1.0);
    CHECK(after.line_flow_mw[1] == doctest::Approx(1.0));
    CHECK(after.line_flow_mw[2] == doctest::Approx(1.0));
}

TEST_CASE("unknown station rejected") {
    Feeder f(chain_model(3, {0, 1, 1}));
    CHECK_THROWS_AS(f.apply_command(SwitchCommand{9, false}), UnknownStation);
}

TEST_CASE("conservation: root outflow equals connected net load") {
    const auto model = build_feeder(26, 7);
    Feeder f(model);
    for (int step = 0; step < 50; ++step) {
        const auto& st = f.step(1.0);
        double total = 0.0;
        for (std::size_t i = 1; i < model.stations.size(); ++i)
            if (!st.station_measurements[i].isolated) total += st.net_load_mw[i];
        CHECK(st.station_measurements[0].p_mw == doctest::Approx(total).epsilon(1e-9));
    }
}

TEST_CASE("determinism: identical seed and commands give identical trajectories") {
    const auto model = build_feeder(26, 11);
    Feeder a(model);
    Feeder b(model);
    for (int step = 0; step < 20; ++step) {
        if (step == 5) {
            a.apply_command(SwitchCommand{3, false});
            b.apply_command(SwitchCommand{3, false});
        }
        const auto& sa = a.step(1.0);
        const auto& sb = b.step(1.0);
        for (std::size_t i = 0; i < model.stations.size(); ++i) {
            CHECK(sa.line_flow_mw[i] == sb.line_flow_mw[i]);
            CHECK(sa.bus_voltage_pu[i] == sb.bus_voltage_pu[i]);
        }
    }
}

TEST_CASE("voltage monotonicity along closed root paths") {
    const auto model = build_feeder(26, 5);
    Feeder f(model);
    for (int step = 0; step < 20; ++step) {
        const auto& st = f.step(1.0);
        bool all_nonneg = true;
        for (std::size_t i = 1; i < model.stations.size(); ++i)
            if (st.net_load_mw[i] < 0.0) all_nonneg = false;
        if (!all_nonneg) continue;  // DER can push loads negative; rule applies otherwise
        for (std::size_t i = 1; i < model.stations.size(); ++i) {
            if (st.station_measurements[i].isolated) continue;
            CHECK(st.bus_voltage_pu[i] <= st.bus_voltage_pu[*model.stations[i].parent] + 1e-12);
        }
    }
}
