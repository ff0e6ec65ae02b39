#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "gridwatch/capture.hpp"
#include "gridwatch/process.hpp"
#include "gridwatch/rng.hpp"
#include "gridwatch/topology.hpp"
#include "gridwatch/wire.hpp"

// Seeded discrete-event simulator of the OT network. Frames are real octet
// sequences; the capture records each frame once, at the moment its
// originating endpoint puts it on the wire.
namespace gridwatch::netsim {

struct SimOptions {
    double duration_s = 1000.0;
    double cyclic_period_s = 1.0;
    std::uint64_t seed = 42;
    double setpoint_command_period_s = 30.0;
    double switch_command_period_s = 120.0;
    int mtu_backlog = 64;  // half-open limit before the MTU sheds load
    double supervision_timeout_s = 5.0;
    double reconnect_delay_s = 2.0;
};

// measurement/confirmation traffic as decoded by the MTU application
struct MtuReading {
    std::int64_t ts_us = 0;
    std::uint16_t coa = 0;
    std::uint32_t ioa = 0;
    double value = 0.0;
    std::uint8_t cot = 0;
    std::uint8_t type_id = 0;
    bool invalid_quality = false;
};

struct ProcessSample {
    double t_s = 0.0;
    int station = 0;
    double p_mw = 0.0;
    double v_pu = 1.0;
};

struct RunResult {
    Capture capture;
    std::vector<MtuReading> mtu_log;
    std::vector<ProcessSample> process_trace;
};

class Simulator;

// Attack-engine integration point: drives the attacker node and sees every
// frame delivered to the attacker's MAC that targets a foreign IP.
class AttackerController {
public:
    virtual ~AttackerController() = default;
    virtual void on_start(Simulator& sim) = 0;
    virtual void on_mitm_frame(Simulator& sim, const std::vector<std::uint8_t>& bytes) = 0;
    // first look at traffic addressed to the attacker itself; returning true
    // consumes the frame before the normal stack sees it
    virtual bool on_attacker_frame(Simulator&, const std::vector<std::uint8_t>&) { return false; }
};

struct TcpCallbacks {
    std::function<void(int conn_id)> on_established;
    std::function<void(int conn_id, const std::vector<std::uint8_t>&)> on_data;
    std::function<void(int conn_id)> on_closed;
};

class Simulator {
public:
    Simulator(Topology topology, process::GridModel grid, SimOptions options,
              AttackerController* attacker = nullptr);
    ~Simulator();

    void inject_link_failure(const std::string& link_id, double t0_s, double t1_s);

    RunResult run();

    // ---- services for node applications and the attack engine ----
    std::int64_t now_us() const { return now_us_; }
    std::int64_t duration_us() const { return duration_us_; }
    const Topology& topology() const { return topo_; }
    int attacker_index() const { return attacker_ix_; }
    std::optional<wire::Mac> mac_of_ip(wire::Ipv4 ip) const;

    void schedule(std::int64_t t_us, std::function<void()> fn);

    // Emits a raw ethernet frame from a node. False when the node's own link
    // is failed at emission time (dropped before capture).
    bool emit_raw(int node_ix, const std::vector<std::uint8_t>& bytes,
                  const std::optional<GroundTruth>& label);

    int tcp_connect(int node_ix, wire::Ipv4 dst_ip, std::uint16_t dst_port, TcpCallbacks cbs,
                    std::optional<GroundTruth> label = std::nullopt);
    bool tcp_send(int conn_id, const std::vector<std::uint8_t>& payload);
    void tcp_close(int conn_id);  // FIN
    void tcp_abort(int conn_id);  // RST, no callback to the aborting side

    Rng& rng() { return rng_; }

private:
    friend class MtuApp;
    friend class RtuApp;

    struct ArpEntry {
        wire::Mac mac{};
        std::int64_t expires_us = 0;
        bool poisoned = false;
        std::optional<GroundTruth> label;  // label of the poisoning frame
    };

    struct QueuedFrame {
        wire::EthernetFrame frame;
        std::optional<GroundTruth> label;
    };

    struct PendingSegment {
        std::uint32_t seq = 0;
        std::vector<std::uint8_t> payload;
        std::uint8_t flags = 0;
        int tries = 0;
        std::uint64_t gen = 0;
        std::int64_t first_tx_us = 0;
        std::optional<GroundTruth> label;
    };

    enum class TcpState { SynSent, SynRcvd, Established, Reset, ClosedFin };

    struct TcpConn {
        int id = 0;
        int node = -1;
        wire::Ipv4 local_ip = 0, remote_ip = 0;
        std::uint16_t local_port = 0, remote_port = 0;
        TcpState state = TcpState::SynSent;
        std::uint32_t snd_nxt = 0, snd_una = 0, rcv_nxt = 0;
        bool fin_sent = false;
        double srtt_s = 0.0;
        std::vector<PendingSegment> pending;
        std::uint64_t gen_counter = 0;
        TcpCallbacks cbs;
        std::optional<GroundTruth> label;
    };

    struct HalfOpen {
        wire::Ipv4 remote_ip = 0;
        std::uint16_t remote_port = 0, local_port = 0;
        std::uint32_t isn = 0;
        std::uint32_t peer_isn = 0;
        int tries = 0;
        std::uint64_t gen = 0;
        std::optional<GroundTruth> label;
    };

    struct NodeRt {
        std::map<wire::Ipv4, ArpEntry> arp;
        std::map<wire::Ipv4, std::vector<QueuedFrame>> arp_backlog;
        std::map<wire::Ipv4, std::int64_t> arp_pending;
        std::uint16_t next_ephemeral = 49152;
        std::uint16_t ip_ident = 1;
        std::vector<HalfOpen> half_open;
        std::uint64_t half_open_gen = 0;
        std::uint64_t inbound_counter = 0;
        int link = -1;  // endpoint uplink
    };

    struct Event {
        std::int64_t t_us;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct EventOrder {
        bool operator()(const Event& x, const Event& y) const {
            return x.t_us != y.t_us ? x.t_us > y.t_us : x.seq > y.seq;
        }
    };

    using Acceptor = std::function<TcpCallbacks(int conn_id)>;
    void listen(int node_ix, std::uint16_t port, Acceptor acceptor);

    bool link_failed_at(int link_ix, std::int64_t t_us) const;
    void send_on_link(int link_ix, int from_node, std::vector<std::uint8_t> bytes,
                      std::optional<GroundTruth> label);
    void deliver(int node_ix, int ingress_link, const std::vector<std::uint8_t>& bytes,
                 const std::optional<GroundTruth>& label);
    void endpoint_receive(int node_ix, const std::vector<std::uint8_t>& bytes,
                          const std::optional<GroundTruth>& label);
    void relay_host_receive(int node_ix, int ingress_link, const wire::EthernetFrame& frame,
                            const std::optional<GroundTruth>& label);

    void send_ip_frame(int node_ix, wire::EthernetFrame frame, std::optional<GroundTruth> label);
    void arp_request(int node_ix, wire::Ipv4 target);

    void handle_arp(int node_ix, const wire::EthernetFrame& frame);
    void handle_tcp(int node_ix, const wire::EthernetFrame& frame);
    void tcp_segment_out(TcpConn& conn, std::uint8_t flags, std::uint32_t seq,
                         std::vector<std::uint8_t> payload, bool retransmittable);
    void send_raw_tcp(int node_ix, wire::Ipv4 src_ip, wire::Ipv4 dst_ip, std::uint16_t sport,
                      std::uint16_t dport, std::uint32_t seq, std::uint32_t ack,
                      std::uint8_t flags, std::uint16_t window,
                      std::vector<std::uint8_t> payload, std::optional<GroundTruth> label);
    void schedule_retransmit(int conn_id, std::uint32_t seq, std::uint64_t gen);
    void schedule_synack_retransmit(int node_ix, std::uint64_t gen);
    std::uint16_t window_for(int node_ix) const;
    TcpConn* find_conn(int node_ix, std::uint16_t local_port, wire::Ipv4 remote_ip,
                       std::uint16_t remote_port);
    void erase_conn(int conn_id);

    // responses inherit the inbound label when they go back to the attacker or
    // are emitted by the attacker's own stack
    std::optional<GroundTruth> response_label(int emitter_ix, wire::Ipv4 dst_ip) const;

    Topology topo_;
    SimOptions opts_;
    AttackerController* attacker_ctrl_;
    process::Feeder feeder_;
    Rng rng_;

    std::int64_t now_us_ = 0;
    std::int64_t duration_us_ = 0;
    std::uint64_t event_seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;

    std::vector<NodeRt> rt_;
    std::map<std::string, int> switch_table_;  // mac string -> link
    int switch_ix_ = -1, firewall_ix_ = -1, mtu_ix_ = -1, attacker_ix_ = -1;
    std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> link_failures_;
    std::vector<std::array<std::int64_t, 2>> link_last_arrival_;  // per-direction FIFO clamp

    std::map<int, TcpConn> conns_;
    int next_conn_id_ = 1;
    std::map<std::uint64_t, Acceptor> listeners_;  // (node << 16 | port)

    std::optional<GroundTruth> current_inbound_label_;

    RunResult result_;

    std::unique_ptr<class MtuApp> mtu_app_;
    std::vector<std::unique_ptr<class RtuApp>> rtu_apps_;
};

}  // namespace gridwatch::netsim
