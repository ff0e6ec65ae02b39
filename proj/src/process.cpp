#include "gridwatch/process.hpp"

#include <algorithm>
#include <cmath>

namespace gridwatch::process {

namespace {

std::array<double, 24> residential_shape() {
    // low overnight, morning and evening peaks
    return {0.60, 0.55, 0.52, 0.50, 0.52, 0.60, 0.75, 0.90, 1.00, 0.95, 0.90, 0.92,
            0.95, 0.90, 0.88, 0.90, 1.00, 1.15, 1.25, 1.20, 1.10, 0.95, 0.80, 0.68};
}

std::array<double, 24> solar_shape() {
    return {0.0, 0.0, 0.0, 0.0, 0.0, 0.05, 0.15, 0.35, 0.55, 0.75, 0.90, 1.00,
            1.00, 0.95, 0.85, 0.70, 0.50, 0.30, 0.10, 0.02, 0.0, 0.0, 0.0, 0.0};
}

double shape_value(const std::array<double, 24>& shape, double time_s) {
    const double hours = std::fmod(time_s / 3600.0, 24.0);
    const int h0 = static_cast<int>(hours) % 24;
    const int h1 = (h0 + 1) % 24;
    const double frac = hours - std::floor(hours);
    return shape[h0] * (1.0 - frac) + shape[h1] * frac;
}

}  // namespace

GridModel build_feeder(int n_stations, std::uint64_t seed) {
    if (n_stations < 1) throw std::invalid_argument("build_feeder: n_stations must be >= 1");
    GridModel model;
    model.seed = seed;
    Rng rng(seed);
    for (int i = 0; i < n_stations; ++i) {
        Station st;
        st.id = i;
        if (i > 0) {
            // prefer recent stations as parents to get feeder-like depth
            const int lo = std::max(0, i - 4);
            st.parent = static_cast<int>(rng.uniform_int(lo, i - 1));
            st.line_impedance_factor = 0.002;
        }
        st.load.base_mw = (i == 0) ? 0.0 : rng.uniform(0.4, 2.0);
        st.load.daily_shape = residential_shape();
        st.load.noise_sigma = 0.02 * st.load.base_mw;
        if (i > 0 && i % 4 == 0) {
            DerProfile der;
            der.base_mw = rng.uniform(0.5, 1.5);
            der.daily_shape = solar_shape();
            st.der = der;
        }
        model.stations.push_back(st);
    }
    return model;
}

Feeder::Feeder(GridModel model) : model_(std::move(model)), rng_(model_.seed ^ 0x9e3779b97f4a7c15ULL) {
    const auto n = model_.stations.size();
    state_.switch_closed.assign(n, true);
    state_.line_flow_mw.assign(n, 0.0);
    state_.bus_voltage_pu.assign(n, 1.0);
    state_.net_load_mw.assign(n, 0.0);
    state_.station_measurements.assign(n, StationMeasurement{});
    setpoint_override_.assign(n, std::nullopt);
    children_.assign(n, {});
    for (const auto& st : model_.stations)
        if (st.parent) children_[*st.parent].push_back(st.id);
}

void Feeder::apply_command(const Command& cmd) {
    const int station = std::visit([](const auto& c) { return c.station; }, cmd);
    if (station < 0 || station >= static_cast<int>(model_.stations.size()))
        throw UnknownStation(station);
    pending_.push_back(cmd);
}

double Feeder::load_at(const Station& st, double time_s) {
    const double base = st.load.base_mw * shape_value(st.load.daily_shape, time_s);
    const double noisy = base + rng_.normal(0.0, st.load.noise_sigma);
    return std::max(0.0, noisy);
}

double Feeder::der_at(const Station& st, double time_s) const {
    if (setpoint_override_[st.id]) return *setpoint_override_[st.id];
    if (!st.der) return 0.0;
    return st.der->base_mw * shape_value(st.der->daily_shape, time_s);
}

const ProcessState& Feeder::step(double dt_s) {
    if (dt_s <= 0.0) throw std::invalid_argument("process: dt must be > 0");
    for (const auto& cmd : pending_) {
        if (const auto* sw = std::get_if<SwitchCommand>(&cmd)) {
            if (sw->station > 0) state_.switch_closed[sw->station] = sw->close;
        } else {
            const auto& sp = std::get<SetpointCommand>(cmd);
            setpoint_override_[sp.station] = sp.mw;
        }
    }
    pending_.clear();
    recompute(state_.time_s + dt_s);
    return state_;
}

void Feeder::recompute(double time_s) {
    state_.time_s = time_s;
    const auto n = model_.stations.size();

    for (std::size_t i = 0; i < n; ++i)
        state_.net_load_mw[i] = load_at(model_.stations[i], time_s) -
                                der_at(model_.stations[i], time_s);

    // connectivity: a station is connected when every switch on its root path is closed
    std::vector<bool> connected(n, false);
    connected[0] = true;
    for (std::size_t i = 1; i < n; ++i) {
        // stations are topologically ordered (parent id < child id)
        const auto& st = model_.stations[i];
        connected[i] = connected[*st.parent] && state_.switch_closed[i];
    }

    // line flow = summed net load of the connected subtree below the line
    std::vector<double> subtree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        subtree[i] = connected[i] ? state_.net_load_mw[i] : 0.0;
    for (std::size_t i = n; i-- > 1;) {
        if (connected[i]) subtree[*model_.stations[i].parent] += subtree[i];
    }
    for (std::size_t i = 1; i < n; ++i)
        state_.line_flow_mw[i] = connected[i] ? subtree[i] : 0.0;
    state_.line_flow_mw[0] = 0.0;

    state_.bus_voltage_pu[0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        if (!connected[i]) continue;
        const auto& st = model_.stations[i];
        const double drop = state_.line_flow_mw[i] * st.line_impedance_factor;
        state_.bus_voltage_pu[i] = std::max(0.0, state_.bus_voltage_pu[*st.parent] - drop);
    }

    double root_out = 0.0;
    for (int child : children_[0])
        if (connected[child]) root_out += state_.line_flow_mw[child];

    for (std::size_t i = 0; i < n; ++i) {
        auto& m = state_.station_measurements[i];
        if (i == 0) {
            m.p_mw = root_out;
            m.v_pu = 1.0;
            m.switch_closed = true;
            m.isolated = false;
            continue;
        }
        if (connected[i]) {
            m.p_mw = state_.line_flow_mw[i];
            m.v_pu = state_.bus_voltage_pu[i];
            m.isolated = false;
        } else {
            // isolated stations keep reporting the last value, flagged
            m.isolated = true;
        }
        m.switch_closed = state_.switch_closed[i];
    }
}

}  // namespace gridwatch::process
