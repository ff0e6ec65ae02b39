#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gridwatch/rng.hpp"

// Linearized radial-feeder process model. Flows follow a DC-style rule:
// a line carries the summed net load of everything downstream of it, and
// voltage drops linearly with upstream flow.
namespace gridwatch::process {

struct LoadProfile {
    double base_mw = 0.0;
    std::array<double, 24> daily_shape{};  // hourly multipliers
    double noise_sigma = 0.0;              // MW
};

struct DerProfile {
    double base_mw = 0.0;
    std::array<double, 24> daily_shape{};
};

struct Station {
    int id = 0;
    std::optional<int> parent;          // none for the root substation
    double line_impedance_factor = 0.0; // pu/MW on the line toward parent
    LoadProfile load;
    std::optional<DerProfile> der;
};

struct GridModel {
    std::vector<Station> stations;  // tree rooted at station 0
    std::uint64_t seed = 0;

    int line_count() const { return static_cast<int>(stations.size()) - 1; }
};

struct StationMeasurement {
    double p_mw = 0.0;        // flow on the station's upstream line (total feeder flow at root)
    double v_pu = 1.0;
    bool switch_closed = true;
    bool isolated = false;
};

struct ProcessState {
    double time_s = 0.0;
    std::vector<bool> switch_closed;     // per station, upstream line switch (root entry unused)
    std::vector<double> line_flow_mw;    // per station, flow on upstream line (root entry 0)
    std::vector<double> bus_voltage_pu;  // per station
    std::vector<double> net_load_mw;     // load - der, last sampled
    std::vector<StationMeasurement> station_measurements;
};

struct SwitchCommand {
    int station = 0;  // targets the station's upstream line switch
    bool close = true;
};
struct SetpointCommand {
    int station = 0;
    double mw = 0.0;  // DER injection override
};
using Command = std::variant<SwitchCommand, SetpointCommand>;

class UnknownStation : public std::runtime_error {
public:
    explicit UnknownStation(int id)
        : std::runtime_error("process: unknown station " + std::to_string(id)) {}
};

// Deterministic feeder for (n_stations, seed); station 0 is the substation.
GridModel build_feeder(int n_stations, std::uint64_t seed);

class Feeder {
public:
    explicit Feeder(GridModel model);

    const GridModel& model() const { return model_; }
    const ProcessState& state() const { return state_; }

    // Switch/setpoint commands take effect on the next step.
    void apply_command(const Command& cmd);

    const ProcessState& step(double dt_s);

private:
    void recompute(double time_s);
    double load_at(const Station& st, double time_s);
    double der_at(const Station& st, double time_s) const;

    GridModel model_;
    ProcessState state_;
    Rng rng_;
    std::vector<Command> pending_;
    std::vector<std::optional<double>> setpoint_override_;
    std::vector<std::vector<int>> children_;
};

}  // namespace gridwatch::process
