#include "gridwatch/sim.hpp"

#include <algorithm>

#include "gridwatch/iec104.hpp"

namespace gridwatch::netsim {

namespace {

constexpr std::int64_t kArpTtlUs = 60'000'000;
constexpr std::int64_t kRetransmitUs = 1'000'000;
constexpr int kMaxTries = 3;
constexpr std::int64_t kCongestionDelayPerEntryUs = 2'000;
constexpr std::uint64_t kSheddingModulo = 3;  // drop every 3rd inbound segment when saturated

bool is_broadcast(const wire::Mac& mac) {
    for (auto b : mac)
        if (b != 0xFF) return false;
    return true;
}

std::uint64_t listen_key(int node_ix, std::uint16_t port) {
    return (static_cast<std::uint64_t>(node_ix) << 16) | port;
}

}  // namespace

// ---------------------------------------------------------------------------
// node applications
// ---------------------------------------------------------------------------

// SCADA master: one IEC-104 session per RTU with STARTDT activation,
// silence supervision and periodic set-point/switch commands.
class MtuApp {
public:
    MtuApp(Simulator& sim, int node_ix, const process::GridModel& grid)
        : sim_(sim), node_(node_ix) {
        for (const auto& st : grid.stations) {
            if (st.der) der_stations_.push_back(st.id);
            if (st.parent) switch_stations_.push_back(st.id);
            der_base_.push_back(st.der ? st.der->base_mw : 0.0);
        }
    }

    void start() {
        sim_.listen(node_, 2404, [](int) { return TcpCallbacks{}; });
        const auto& topo = sim_.topology();
        for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
            const auto& n = topo.nodes[i];
            if (n.role != NodeRole::Rtu) continue;
            Session s;
            s.rtu_node = static_cast<int>(i);
            s.ip = n.ip;
            s.coa = static_cast<std::uint16_t>(n.station + 1);
            sessions_.push_back(s);
        }
        for (std::size_t k = 0; k < sessions_.size(); ++k) {
            const std::int64_t t = 50'000 + 30'000 * static_cast<std::int64_t>(k);
            sim_.schedule(t, [this, k] { connect_session(k); });
        }
        if (!sessions_.empty()) {
            sim_.schedule(1'000'000, [this] { supervision_tick(); });
            sim_.schedule(static_cast<std::int64_t>(sim_.opts_.setpoint_command_period_s * 1e6),
                          [this] { setpoint_tick(); });
            sim_.schedule(static_cast<std::int64_t>(sim_.opts_.switch_command_period_s * 1e6),
                          [this] { switch_tick(); });
        }
    }

private:
    struct Session {
        int rtu_node = -1;
        wire::Ipv4 ip = 0;
        std::uint16_t coa = 0;
        int conn = -1;
        bool started = false;
        std::int64_t last_rx_us = 0;
        std::uint16_t vs = 0, vr = 0;
        int unacked = 0;
        bool reconnect_scheduled = false;
        std::vector<std::uint8_t> stream;
    };

    void connect_session(std::size_t k) {
        auto& s = sessions_[k];
        s.reconnect_scheduled = false;
        s.started = false;
        s.vs = s.vr = 0;
        s.unacked = 0;
        s.stream.clear();
        TcpCallbacks cbs;
        cbs.on_established = [this, k](int conn) { on_established(k, conn); };
        cbs.on_data = [this, k](int conn, const std::vector<std::uint8_t>& d) {
            on_data(k, conn, d);
        };
        cbs.on_closed = [this, k](int) { schedule_reconnect(k); };
        s.conn = sim_.tcp_connect(node_, s.ip, 2404, std::move(cbs));
    }

    void schedule_reconnect(std::size_t k) {
        auto& s = sessions_[k];
        s.started = false;
        if (s.reconnect_scheduled) return;
        s.reconnect_scheduled = true;
        const auto delay = static_cast<std::int64_t>(sim_.opts_.reconnect_delay_s * 1e6);
        sim_.schedule(sim_.now_us() + delay, [this, k] { connect_session(k); });
    }

    void on_established(std::size_t k, int conn) {
        auto& s = sessions_[k];
        s.conn = conn;
        s.last_rx_us = sim_.now_us();
        iec104::Apdu apdu;
        apdu.control = iec104::UFrame{iec104::UFunction::StartDtAct};
        sim_.tcp_send(conn, iec104::encode_apdu(apdu));
    }

    void on_data(std::size_t k, int conn, const std::vector<std::uint8_t>& data) {
        auto& s = sessions_[k];
        if (conn != s.conn) return;
        s.last_rx_us = sim_.now_us();
        s.stream.insert(s.stream.end(), data.begin(), data.end());
        std::size_t off = 0;
        while (off < s.stream.size()) {
            auto res = iec104::decode_apdu(s.stream.data() + off, s.stream.size() - off);
            if (res.status == iec104::DecodeStatus::NeedMoreData) break;
            if (!res.ok()) {
                s.stream.clear();
                return;
            }
            off += res.consumed;
            handle_apdu(k, *res.apdu);
        }
        s.stream.erase(s.stream.begin(), s.stream.begin() + static_cast<std::ptrdiff_t>(off));
    }

    void handle_apdu(std::size_t k, const iec104::Apdu& apdu) {
        auto& s = sessions_[k];
        if (const auto* u = std::get_if<iec104::UFrame>(&apdu.control)) {
            if (u->function == iec104::UFunction::StartDtCon) s.started = true;
            return;
        }
        if (!std::holds_alternative<iec104::IFrame>(apdu.control) || !apdu.asdu) return;
        s.vr = static_cast<std::uint16_t>((s.vr + 1) & 0x7FFF);
        if (++s.unacked >= 8) {
            s.unacked = 0;
            iec104::Apdu ack;
            ack.control = iec104::SFrame{s.vr};
            sim_.tcp_send(s.conn, iec104::encode_apdu(ack));
        }
        const auto& asdu = *apdu.asdu;
        for (const auto& obj : asdu.objects) {
            MtuReading r;
            r.ts_us = sim_.now_us();
            r.coa = asdu.common_address;
            r.ioa = obj.ioa;
            r.cot = static_cast<std::uint8_t>(asdu.cot);
            r.type_id = static_cast<std::uint8_t>(asdu.type_id);
            if (const auto* f = std::get_if<iec104::ShortFloat>(&obj.value)) {
                r.value = f->value;
                r.invalid_quality = (f->quality & 0x80) != 0;
            } else if (const auto* sv = std::get_if<iec104::ScaledValue>(&obj.value)) {
                r.value = sv->value;
                r.invalid_quality = (sv->quality & 0x80) != 0;
            } else if (const auto* sp = std::get_if<iec104::SinglePoint>(&obj.value)) {
                r.value = sp->on ? 1.0 : 0.0;
                r.invalid_quality = (sp->quality & 0x80) != 0;
            } else if (const auto* sc = std::get_if<iec104::SingleCommand>(&obj.value)) {
                r.value = sc->on ? 1.0 : 0.0;
            }
            sim_.result_.mtu_log.push_back(r);
        }
    }

    void send_command(std::size_t k, const iec104::Asdu& asdu) {
        auto& s = sessions_[k];
        if (!s.started) return;
        iec104::Apdu apdu;
        apdu.control = iec104::IFrame{s.vs, s.vr};
        s.vs = static_cast<std::uint16_t>((s.vs + 1) & 0x7FFF);
        apdu.asdu = asdu;
        sim_.tcp_send(s.conn, iec104::encode_apdu(apdu));
    }

    void supervision_tick() {
        const auto timeout = static_cast<std::int64_t>(sim_.opts_.supervision_timeout_s * 1e6);
        for (std::size_t k = 0; k < sessions_.size(); ++k) {
            auto& s = sessions_[k];
            if (!s.started || s.reconnect_scheduled) continue;
            if (sim_.now_us() - s.last_rx_us > timeout) {
                sim_.tcp_abort(s.conn);
                schedule_reconnect(k);
            }
        }
        sim_.schedule(sim_.now_us() + 1'000'000, [this] { supervision_tick(); });
    }

    void setpoint_tick() {
        if (!der_stations_.empty()) {
            const int station = der_stations_[sp_rr_ % der_stations_.size()];
            static const double cycle[] = {0.5, 1.0, 0.75};
            const double mw = der_base_[station] * cycle[sp_rr_ % 3];
            ++sp_rr_;
            const std::size_t k = static_cast<std::size_t>(station);
            if (k < sessions_.size()) {
                iec104::Asdu asdu;
                asdu.type_id = iec104::TypeId::C_SE_NC_1;
                asdu.cot = iec104::Cot::Activation;
                asdu.common_address = sessions_[k].coa;
                asdu.objects.push_back(
                    iec104::InformationObject{110, iec104::ShortFloat{static_cast<float>(mw), 0}});
                send_command(k, asdu);
            }
        }
        sim_.schedule(sim_.now_us() +
                          static_cast<std::int64_t>(sim_.opts_.setpoint_command_period_s * 1e6),
                      [this] { setpoint_tick(); });
    }

    void switch_tick() {
        if (!switch_stations_.empty()) {
            const int station = switch_stations_[sw_rr_ % switch_stations_.size()];
            ++sw_rr_;
            const std::size_t k = static_cast<std::size_t>(station);
            if (k < sessions_.size()) {
                iec104::Asdu asdu;
                asdu.type_id = iec104::TypeId::C_SC_NA_1;
                asdu.cot = iec104::Cot::Activation;
                asdu.common_address = sessions_[k].coa;
                asdu.objects.push_back(iec104::InformationObject{102, iec104::SingleCommand{true, 0}});
                send_command(k, asdu);
            }
        }
        sim_.schedule(sim_.now_us() +
                          static_cast<std::int64_t>(sim_.opts_.switch_command_period_s * 1e6),
                      [this] { switch_tick(); });
    }

    Simulator& sim_;
    int node_;
    std::vector<Session> sessions_;
    std::vector<int> der_stations_, switch_stations_;
    std::vector<double> der_base_;
    std::size_t sp_rr_ = 0, sw_rr_ = 0;
};

// Field device: answers STARTDT, reports cyclic measurements for its station,
// executes commands against the process model, and runs a stub SSH service.
class RtuApp {
public:
    RtuApp(Simulator& sim, int node_ix, int station)
        : sim_(sim), node_(node_ix), station_(station) {}

    void start() {
        sim_.listen(node_, 2404, [this](int conn) {
            conn_ = conn;
            started_ = false;
            vs_ = vr_ = 0;
            stream_.clear();
            TcpCallbacks cbs;
            cbs.on_data = [this](int c, const std::vector<std::uint8_t>& d) { on_data(c, d); };
            cbs.on_closed = [this](int c) {
                if (c == conn_) started_ = false;
            };
            return cbs;
        });
        sim_.listen(node_, 22, [this](int) {
            TcpCallbacks cbs;
            cbs.on_established = [this](int c) {
                static const char banner[] = "SSH-2.0-gridwatch_srv\r\n";
                sim_.tcp_send(c, std::vector<std::uint8_t>(banner, banner + sizeof(banner) - 1));
            };
            cbs.on_data = [this](int c, const std::vector<std::uint8_t>&) {
                static const char denied[] = "auth failed........";
                sim_.tcp_send(c, std::vector<std::uint8_t>(denied, denied + sizeof(denied) - 1));
            };
            return cbs;
        });
    }

private:
    void on_data(int conn, const std::vector<std::uint8_t>& data) {
        if (conn != conn_) return;
        stream_.insert(stream_.end(), data.begin(), data.end());
        std::size_t off = 0;
        while (off < stream_.size()) {
            auto res = iec104::decode_apdu(stream_.data() + off, stream_.size() - off);
            if (res.status == iec104::DecodeStatus::NeedMoreData) break;
            if (!res.ok()) {
                stream_.clear();
                return;
            }
            off += res.consumed;
            handle_apdu(*res.apdu);
        }
        stream_.erase(stream_.begin(), stream_.begin() + static_cast<std::ptrdiff_t>(off));
    }

    void handle_apdu(const iec104::Apdu& apdu) {
        if (const auto* u = std::get_if<iec104::UFrame>(&apdu.control)) {
            if (u->function == iec104::UFunction::StartDtAct) {
                iec104::Apdu con;
                con.control = iec104::UFrame{iec104::UFunction::StartDtCon};
                sim_.tcp_send(conn_, iec104::encode_apdu(con));
                started_ = true;
                ++epoch_;
                const int my_epoch = epoch_;
                sim_.schedule(sim_.now_us(), [this, my_epoch] { cyclic_tick(my_epoch); });
            }
            return;
        }
        if (!std::holds_alternative<iec104::IFrame>(apdu.control) || !apdu.asdu) return;
        vr_ = static_cast<std::uint16_t>((vr_ + 1) & 0x7FFF);
        const auto& asdu = *apdu.asdu;
        if (asdu.cot != iec104::Cot::Activation || asdu.objects.empty()) return;
        if (asdu.type_id == iec104::TypeId::C_SE_NC_1) {
            const auto& obj = asdu.objects.front();
            const auto& sf = std::get<iec104::ShortFloat>(obj.value);
            sim_.feeder_.apply_command(process::SetpointCommand{station_, sf.value});
            send_confirmation(asdu);
        } else if (asdu.type_id == iec104::TypeId::C_SC_NA_1) {
            const auto& obj = asdu.objects.front();
            const auto& sc = std::get<iec104::SingleCommand>(obj.value);
            if (station_ > 0)
                sim_.feeder_.apply_command(process::SwitchCommand{station_, sc.on});
            send_confirmation(asdu);
            send_switch_state(iec104::Cot::Spontaneous);
        }
    }

    void send_confirmation(iec104::Asdu asdu) {
        asdu.cot = iec104::Cot::ActivationCon;
        send_iframe(asdu);
    }

    void send_switch_state(iec104::Cot cot) {
        const auto& m = sim_.feeder_.state().station_measurements[station_];
        iec104::Asdu asdu;
        asdu.type_id = iec104::TypeId::M_SP_NA_1;
        asdu.cot = cot;
        asdu.common_address = static_cast<std::uint16_t>(station_ + 1);
        asdu.objects.push_back(iec104::InformationObject{
            102, iec104::SinglePoint{m.switch_closed,
                                     static_cast<std::uint8_t>(m.isolated ? 0x80 : 0x00)}});
        send_iframe(asdu);
    }

    void send_iframe(const iec104::Asdu& asdu) {
        if (!started_) return;
        iec104::Apdu apdu;
        apdu.control = iec104::IFrame{vs_, vr_};
        vs_ = static_cast<std::uint16_t>((vs_ + 1) & 0x7FFF);
        apdu.asdu = asdu;
        sim_.tcp_send(conn_, iec104::encode_apdu(apdu));
    }

    void cyclic_tick(int my_epoch) {
        if (my_epoch != epoch_ || !started_) return;
        const auto& m = sim_.feeder_.state().station_measurements[station_];
        const std::uint8_t quality = m.isolated ? 0x80 : 0x00;
        iec104::Asdu asdu;
        asdu.type_id = iec104::TypeId::M_ME_NF_1;
        asdu.cot = iec104::Cot::Cyclic;
        asdu.common_address = static_cast<std::uint16_t>(station_ + 1);
        asdu.objects.push_back(iec104::InformationObject{
            100, iec104::ShortFloat{static_cast<float>(m.p_mw), quality}});
        asdu.objects.push_back(iec104::InformationObject{
            101, iec104::ShortFloat{static_cast<float>(m.v_pu), quality}});
        send_iframe(asdu);
        const auto period = static_cast<std::int64_t>(sim_.opts_.cyclic_period_s * 1e6);
        sim_.schedule(sim_.now_us() + period, [this, my_epoch] { cyclic_tick(my_epoch); });
    }

    Simulator& sim_;
    int node_;
    int station_;
    int conn_ = -1;
    bool started_ = false;
    int epoch_ = 0;
    std::uint16_t vs_ = 0, vr_ = 0;
    std::vector<std::uint8_t> stream_;
};

// ---------------------------------------------------------------------------
// simulator core
// ---------------------------------------------------------------------------

Simulator::Simulator(Topology topology, process::GridModel grid, SimOptions options,
                     AttackerController* attacker)
    : topo_(std::move(topology)),
      opts_(options),
      attacker_ctrl_(attacker),
      feeder_(std::move(grid)),
      rng_(options.seed) {
    topo_.validate();
    duration_us_ = static_cast<std::int64_t>(opts_.duration_s * 1e6);
    rt_.resize(topo_.nodes.size());
    link_failures_.resize(topo_.links.size());
    link_last_arrival_.assign(topo_.links.size(), {0, 0});
    for (std::size_t i = 0; i < topo_.nodes.size(); ++i) {
        switch (topo_.nodes[i].role) {
            case NodeRole::Switch: switch_ix_ = static_cast<int>(i); break;
            case NodeRole::Firewall: firewall_ix_ = static_cast<int>(i); break;
            case NodeRole::Mtu: mtu_ix_ = static_cast<int>(i); break;
            case NodeRole::Attacker: attacker_ix_ = static_cast<int>(i); break;
            default: break;
        }
    }
    for (std::size_t l = 0; l < topo_.links.size(); ++l) {
        const auto& link = topo_.links[l];
        for (int end : {link.a, link.b}) {
            const auto role = topo_.nodes[end].role;
            if (role == NodeRole::Mtu || role == NodeRole::Rtu || role == NodeRole::Attacker)
                rt_[end].link = static_cast<int>(l);
        }
    }
}

Simulator::~Simulator() = default;

void Simulator::inject_link_failure(const std::string& link_id, double t0_s, double t1_s) {
    const int ix = topo_.link_index(link_id);
    if (ix < 0) throw UnknownLink(link_id);
    link_failures_[ix].emplace_back(static_cast<std::int64_t>(t0_s * 1e6),
                                    static_cast<std::int64_t>(t1_s * 1e6));
}

bool Simulator::link_failed_at(int link_ix, std::int64_t t_us) const {
    for (const auto& [t0, t1] : link_failures_[link_ix])
        if (t_us >= t0 && t_us < t1) return true;
    return false;
}

void Simulator::schedule(std::int64_t t_us, std::function<void()> fn) {
    queue_.push(Event{t_us, event_seq_++, std::move(fn)});
}

std::optional<wire::Mac> Simulator::mac_of_ip(wire::Ipv4 ip) const {
    for (const auto& n : topo_.nodes)
        if (n.ip == ip) return n.mac;
    return std::nullopt;
}

std::optional<GroundTruth> Simulator::response_label(int emitter_ix, wire::Ipv4 dst_ip) const {
    if (!current_inbound_label_ || attacker_ix_ < 0) return std::nullopt;
    if (emitter_ix != attacker_ix_ && topo_.nodes[attacker_ix_].ip != dst_ip) return std::nullopt;
    return current_inbound_label_;
}

void Simulator::listen(int node_ix, std::uint16_t port, Acceptor acceptor) {
    listeners_[listen_key(node_ix, port)] = std::move(acceptor);
}

std::uint16_t Simulator::window_for(int node_ix) const {
    switch (topo_.nodes[node_ix].role) {
        case NodeRole::Mtu: return 8192;
        case NodeRole::Rtu: return 2048;
        case NodeRole::Attacker: return 512;
        default: return 1024;
    }
}

bool Simulator::emit_raw(int node_ix, const std::vector<std::uint8_t>& bytes,
                         const std::optional<GroundTruth>& label) {
    const int link = rt_[node_ix].link;
    if (link < 0) return false;
    if (link_failed_at(link, now_us_)) return false;
    result_.capture.records.push_back(CaptureRecord{now_us_, bytes, label});
    send_on_link(link, node_ix, bytes, label);
    return true;
}

void Simulator::send_on_link(int link_ix, int from_node, std::vector<std::uint8_t> bytes,
                             std::optional<GroundTruth> label) {
    const auto& link = topo_.links[link_ix];
    if (link_failed_at(link_ix, now_us_)) return;
    const int to_node = link.a == from_node ? link.b : link.a;
    const std::int64_t jitter = link.jitter_us > 0
                                    ? rng_.uniform_int(-link.jitter_us, link.jitter_us)
                                    : 0;
    std::int64_t t = now_us_ + std::max<std::int64_t>(1, link.base_latency_us + jitter);
    // a link never reorders: clamp to FIFO per direction
    auto& last = link_last_arrival_[link_ix][link.a == from_node ? 0 : 1];
    t = std::max(t, last + 1);
    last = t;
    schedule(t, [this, link_ix, to_node, b = std::move(bytes), label] {
        deliver(to_node, link_ix, b, label);
    });
}

void Simulator::deliver(int node_ix, int ingress_link, const std::vector<std::uint8_t>& bytes,
                        const std::optional<GroundTruth>& label) {
    const auto& node = topo_.nodes[node_ix];
    if (bytes.size() < 14) return;
    wire::Mac dst;
    std::copy(bytes.begin(), bytes.begin() + 6, dst.begin());

    if (node.role == NodeRole::Switch) {
        wire::Mac src;
        std::copy(bytes.begin() + 6, bytes.begin() + 12, src.begin());
        switch_table_[wire::mac_to_string(src)] = ingress_link;
        if (dst == node.mac) {
            auto parsed = wire::parse_frame(bytes);
            if (parsed.ok) relay_host_receive(node_ix, ingress_link, parsed.frame, label);
            return;
        }
        if (is_broadcast(dst)) {
            auto parsed = wire::parse_frame(bytes);
            if (parsed.ok) relay_host_receive(node_ix, ingress_link, parsed.frame, label);
        }
        const auto it = is_broadcast(dst) ? switch_table_.end()
                                          : switch_table_.find(wire::mac_to_string(dst));
        if (it != switch_table_.end()) {
            send_on_link(it->second, node_ix, bytes, label);
            return;
        }
        for (std::size_t l = 0; l < topo_.links.size(); ++l) {
            const auto& lk = topo_.links[l];
            if (static_cast<int>(l) == ingress_link) continue;
            if (lk.a == node_ix || lk.b == node_ix) send_on_link(static_cast<int>(l), node_ix, bytes, label);
        }
        return;
    }

    if (node.role == NodeRole::Firewall) {
        if (is_broadcast(dst)) {
            auto parsed = wire::parse_frame(bytes);
            if (parsed.ok) relay_host_receive(node_ix, ingress_link, parsed.frame, label);
        } else if (dst == node.mac) {
            auto parsed = wire::parse_frame(bytes);
            if (parsed.ok) relay_host_receive(node_ix, ingress_link, parsed.frame, label);
            return;
        }
        // port allowlist: ARP passes, TCP must involve 2404 or 22
        const std::uint16_t ethertype = static_cast<std::uint16_t>((bytes[12] << 8) | bytes[13]);
        if (ethertype == wire::kEtherTypeIpv4) {
            if (bytes.size() < 14 + 40) return;
            const std::uint16_t sport = static_cast<std::uint16_t>((bytes[34] << 8) | bytes[35]);
            const std::uint16_t dport = static_cast<std::uint16_t>((bytes[36] << 8) | bytes[37]);
            auto allowed = [](std::uint16_t p) { return p == 2404 || p == 22; };
            if (!allowed(sport) && !allowed(dport)) return;
        }
        int other = -1;
        for (std::size_t l = 0; l < topo_.links.size(); ++l) {
            const auto& lk = topo_.links[l];
            if (static_cast<int>(l) == ingress_link) continue;
            if (lk.a == node_ix || lk.b == node_ix) other = static_cast<int>(l);
        }
        if (other >= 0) send_on_link(other, node_ix, bytes, label);
        return;
    }

    if (dst != node.mac && !is_broadcast(dst)) return;
    endpoint_receive(node_ix, bytes, label);
}

// switch/firewall management-plane behaviour: answer ARP for the own IP and
// refuse TCP (no services)
void Simulator::relay_host_receive(int node_ix, int ingress_link, const wire::EthernetFrame& frame,
                                   const std::optional<GroundTruth>& label) {
    const auto& node = topo_.nodes[node_ix];
    current_inbound_label_ = label;
    if (frame.arp && frame.arp->oper == 1 && frame.arp->target_ip == node.ip) {
        wire::EthernetFrame reply;
        reply.dst = frame.arp->sender_mac;
        reply.src = node.mac;
        reply.ethertype = wire::kEtherTypeArp;
        wire::ArpPacket arp;
        arp.oper = 2;
        arp.sender_mac = node.mac;
        arp.sender_ip = node.ip;
        arp.target_mac = frame.arp->sender_mac;
        arp.target_ip = frame.arp->sender_ip;
        reply.arp = arp;
        const auto bytes = wire::build_frame(reply);
        const auto rlabel = response_label(node_ix, frame.arp->sender_ip);
        result_.capture.records.push_back(CaptureRecord{now_us_, bytes, rlabel});
        send_on_link(ingress_link, node_ix, bytes, rlabel);
    } else if (frame.ip && frame.ip->dst == node.ip &&
               (frame.ip->tcp.flags & wire::tcpflag::kSyn) &&
               !(frame.ip->tcp.flags & wire::tcpflag::kAck)) {
        wire::EthernetFrame rst;
        rst.dst = frame.src;
        rst.src = node.mac;
        rst.ethertype = wire::kEtherTypeIpv4;
        wire::Ipv4Packet ip;
        ip.src = node.ip;
        ip.dst = frame.ip->src;
        ip.identification = rt_[node_ix].ip_ident++;
        ip.tcp.sport = frame.ip->tcp.dport;
        ip.tcp.dport = frame.ip->tcp.sport;
        ip.tcp.seq = 0;
        ip.tcp.ack = frame.ip->tcp.seq + 1;
        ip.tcp.flags = wire::tcpflag::kRst | wire::tcpflag::kAck;
        ip.tcp.window = 0;
        rst.ip = ip;
        const auto bytes = wire::build_frame(rst);
        const auto rlabel = response_label(node_ix, frame.ip->src);
        result_.capture.records.push_back(CaptureRecord{now_us_, bytes, rlabel});
        send_on_link(ingress_link, node_ix, bytes, rlabel);
    }
    current_inbound_label_.reset();
}

void Simulator::endpoint_receive(int node_ix, const std::vector<std::uint8_t>& bytes,
                                 const std::optional<GroundTruth>& label) {
    auto parsed = wire::parse_frame(bytes);
    if (!parsed.ok) return;
    const auto& node = topo_.nodes[node_ix];
    const auto& frame = parsed.frame;

    if (frame.arp) {
        current_inbound_label_ = label;
        handle_arp(node_ix, frame);
        current_inbound_label_.reset();
        return;
    }
    if (!frame.ip) return;

    if (frame.ip->dst != node.ip) {
        // a frame redirected by poisoning lands here; only the attacker cares
        if (node.role == NodeRole::Attacker && attacker_ctrl_)
            attacker_ctrl_->on_mitm_frame(*this, bytes);
        return;
    }

    if (node.role == NodeRole::Attacker && attacker_ctrl_) {
        current_inbound_label_ = label;
        const bool consumed = attacker_ctrl_->on_attacker_frame(*this, bytes);
        current_inbound_label_.reset();
        if (consumed) return;
    }

    // load shedding and slow processing while the half-open table is full
    auto& rt = rt_[node_ix];
    if (node.role == NodeRole::Mtu &&
        static_cast<int>(rt.half_open.size()) >= opts_.mtu_backlog) {
        ++rt.inbound_counter;
        if (rt.inbound_counter % kSheddingModulo == 0) return;
        const std::int64_t delay =
            kCongestionDelayPerEntryUs * static_cast<std::int64_t>(rt.half_open.size());
        schedule(now_us_ + delay, [this, node_ix, frame, label] {
            current_inbound_label_ = label;
            handle_tcp(node_ix, frame);
            current_inbound_label_.reset();
        });
        return;
    }

    current_inbound_label_ = label;
    handle_tcp(node_ix, frame);
    current_inbound_label_.reset();
}

void Simulator::handle_arp(int node_ix, const wire::EthernetFrame& frame) {
    const auto& node = topo_.nodes[node_ix];
    auto& rt = rt_[node_ix];
    const auto& arp = *frame.arp;

    if (arp.oper == 1) {
        if (arp.target_ip != node.ip) return;
        // learn the requester and answer
        auto& entry = rt.arp[arp.sender_ip];
        entry.mac = arp.sender_mac;
        entry.expires_us = now_us_ + kArpTtlUs;
        entry.poisoned = false;
        entry.label.reset();
        wire::EthernetFrame reply;
        reply.dst = arp.sender_mac;
        reply.src = node.mac;
        reply.ethertype = wire::kEtherTypeArp;
        wire::ArpPacket pkt;
        pkt.oper = 2;
        pkt.sender_mac = node.mac;
        pkt.sender_ip = node.ip;
        pkt.target_mac = arp.sender_mac;
        pkt.target_ip = arp.sender_ip;
        reply.arp = pkt;
        emit_raw(node_ix, wire::build_frame(reply), response_label(node_ix, arp.sender_ip));
        return;
    }

    // reply: solicited -> learned, unsolicited -> poisoned
    const bool solicited = rt.arp_pending.count(arp.sender_ip) > 0;
    auto& entry = rt.arp[arp.sender_ip];
    entry.mac = arp.sender_mac;
    entry.expires_us = now_us_ + kArpTtlUs;
    entry.poisoned = !solicited;
    entry.label = solicited ? std::nullopt : current_inbound_label_;
    if (solicited) {
        rt.arp_pending.erase(arp.sender_ip);
        auto it = rt.arp_backlog.find(arp.sender_ip);
        if (it != rt.arp_backlog.end()) {
            auto queued = std::move(it->second);
            rt.arp_backlog.erase(it);
            for (auto& q : queued) send_ip_frame(node_ix, std::move(q.frame), std::move(q.label));
        }
    }
}

void Simulator::arp_request(int node_ix, wire::Ipv4 target) {
    const auto& node = topo_.nodes[node_ix];
    auto& rt = rt_[node_ix];
    auto it = rt.arp_pending.find(target);
    if (it != rt.arp_pending.end() && now_us_ - it->second < 1'000'000) return;
    rt.arp_pending[target] = now_us_;
    wire::EthernetFrame req;
    req.dst = {0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF};
    req.src = node.mac;
    req.ethertype = wire::kEtherTypeArp;
    wire::ArpPacket pkt;
    pkt.oper = 1;
    pkt.sender_mac = node.mac;
    pkt.sender_ip = node.ip;
    pkt.target_ip = target;
    req.arp = pkt;
    emit_raw(node_ix, wire::build_frame(req), std::nullopt);
}

void Simulator::send_ip_frame(int node_ix, wire::EthernetFrame frame,
                              std::optional<GroundTruth> label) {
    const auto& node = topo_.nodes[node_ix];
    auto& rt = rt_[node_ix];
    const wire::Ipv4 dst_ip = frame.ip->dst;
    auto it = rt.arp.find(dst_ip);
    if (it == rt.arp.end() || now_us_ >= it->second.expires_us) {
        rt.arp_backlog[dst_ip].push_back(QueuedFrame{std::move(frame), std::move(label)});
        arp_request(node_ix, dst_ip);
        return;
    }
    frame.src = node.mac;
    frame.dst = it->second.mac;
    // traffic redirected by a poisoned entry carries the poisoning label
    if (!label && it->second.poisoned) label = it->second.label;
    emit_raw(node_ix, wire::build_frame(frame), label);
}

void Simulator::send_raw_tcp(int node_ix, wire::Ipv4 src_ip, wire::Ipv4 dst_ip,
                             std::uint16_t sport, std::uint16_t dport, std::uint32_t seq,
                             std::uint32_t ack, std::uint8_t flags, std::uint16_t window,
                             std::vector<std::uint8_t> payload,
                             std::optional<GroundTruth> label) {
    wire::EthernetFrame frame;
    frame.ethertype = wire::kEtherTypeIpv4;
    wire::Ipv4Packet ip;
    ip.src = src_ip;
    ip.dst = dst_ip;
    ip.identification = rt_[node_ix].ip_ident++;
    ip.tcp.sport = sport;
    ip.tcp.dport = dport;
    ip.tcp.seq = seq;
    ip.tcp.ack = ack;
    ip.tcp.flags = flags;
    ip.tcp.window = window;
    ip.tcp.payload = std::move(payload);
    frame.ip = std::move(ip);
    send_ip_frame(node_ix, std::move(frame), std::move(label));
}

Simulator::TcpConn* Simulator::find_conn(int node_ix, std::uint16_t local_port,
                                         wire::Ipv4 remote_ip, std::uint16_t remote_port) {
    for (auto& [id, c] : conns_) {
        if (c.node == node_ix && c.local_port == local_port && c.remote_ip == remote_ip &&
            c.remote_port == remote_port)
            return &c;
    }
    return nullptr;
}

void Simulator::erase_conn(int conn_id) { conns_.erase(conn_id); }

int Simulator::tcp_connect(int node_ix, wire::Ipv4 dst_ip, std::uint16_t dst_port,
                           TcpCallbacks cbs, std::optional<GroundTruth> label) {
    auto& rt = rt_[node_ix];
    TcpConn conn;
    conn.id = next_conn_id_++;
    conn.node = node_ix;
    conn.local_ip = topo_.nodes[node_ix].ip;
    conn.remote_ip = dst_ip;
    conn.local_port = rt.next_ephemeral;
    rt.next_ephemeral = rt.next_ephemeral == 65535 ? 49152 : rt.next_ephemeral + 1;
    conn.remote_port = dst_port;
    conn.state = TcpState::SynSent;
    const auto isn = static_cast<std::uint32_t>(rng_.uniform_int(0, 0x7FFFFFFF));
    conn.snd_nxt = isn;
    conn.snd_una = isn;
    conn.cbs = std::move(cbs);
    conn.label = std::move(label);
    const int id = conn.id;
    conns_[id] = std::move(conn);
    tcp_segment_out(conns_[id], wire::tcpflag::kSyn, isn, {}, true);
    conns_[id].snd_nxt = isn + 1;
    return id;
}

bool Simulator::tcp_send(int conn_id, const std::vector<std::uint8_t>& payload) {
    auto it = conns_.find(conn_id);
    if (it == conns_.end() || it->second.state != TcpState::Established) return false;
    auto& conn = it->second;
    const std::uint32_t seq = conn.snd_nxt;
    conn.snd_nxt += static_cast<std::uint32_t>(payload.size());
    tcp_segment_out(conn, wire::tcpflag::kPsh | wire::tcpflag::kAck, seq, payload, true);
    return true;
}

void Simulator::tcp_close(int conn_id) {
    auto it = conns_.find(conn_id);
    if (it == conns_.end() || it->second.state != TcpState::Established) return;
    auto& conn = it->second;
    conn.fin_sent = true;
    const std::uint32_t seq = conn.snd_nxt;
    conn.snd_nxt += 1;
    tcp_segment_out(conn, wire::tcpflag::kFin | wire::tcpflag::kAck, seq, {}, true);
}

void Simulator::tcp_abort(int conn_id) {
    auto it = conns_.find(conn_id);
    if (it == conns_.end()) return;
    auto& conn = it->second;
    if (conn.state == TcpState::Established || conn.state == TcpState::SynSent)
        tcp_segment_out(conn, wire::tcpflag::kRst | wire::tcpflag::kAck, conn.snd_nxt, {}, false);
    erase_conn(conn_id);
}

void Simulator::tcp_segment_out(TcpConn& conn, std::uint8_t flags, std::uint32_t seq,
                                std::vector<std::uint8_t> payload, bool retransmittable) {
    std::optional<GroundTruth> label = conn.label;
    if (!label) label = response_label(conn.node, conn.remote_ip);
    if (retransmittable) {
        PendingSegment seg;
        seg.seq = seq;
        seg.payload = payload;
        seg.flags = flags;
        seg.gen = ++conn.gen_counter;
        seg.first_tx_us = now_us_;
        seg.label = label;
        conn.pending.push_back(seg);
        schedule_retransmit(conn.id, seq, seg.gen);
    }
    send_raw_tcp(conn.node, conn.local_ip, conn.remote_ip, conn.local_port, conn.remote_port, seq,
                 conn.rcv_nxt, flags, window_for(conn.node), std::move(payload), label);
}

void Simulator::schedule_retransmit(int conn_id, std::uint32_t seq, std::uint64_t gen) {
    schedule(now_us_ + kRetransmitUs, [this, conn_id, seq, gen] {
        auto it = conns_.find(conn_id);
        if (it == conns_.end()) return;
        auto& conn = it->second;
        auto seg = std::find_if(conn.pending.begin(), conn.pending.end(),
                                [&](const PendingSegment& p) { return p.seq == seq && p.gen == gen; });
        if (seg == conn.pending.end()) return;
        if (seg->tries >= kMaxTries) {
            // abort: RST toward the peer, notify the owner
            tcp_segment_out(conn, wire::tcpflag::kRst | wire::tcpflag::kAck, conn.snd_nxt, {},
                            false);
            auto cb = conn.cbs.on_closed;
            const int id = conn.id;
            erase_conn(conn_id);
            if (cb) cb(id);
            return;
        }
        ++seg->tries;
        send_raw_tcp(conn.node, conn.local_ip, conn.remote_ip, conn.local_port, conn.remote_port,
                     seg->seq, conn.rcv_nxt, seg->flags, window_for(conn.node), seg->payload,
                     seg->label);
        schedule_retransmit(conn_id, seq, gen);
    });
}

void Simulator::schedule_synack_retransmit(int node_ix, std::uint64_t gen) {
    schedule(now_us_ + kRetransmitUs, [this, node_ix, gen] {
        auto& rt = rt_[node_ix];
        auto it = std::find_if(rt.half_open.begin(), rt.half_open.end(),
                               [&](const HalfOpen& h) { return h.gen == gen; });
        if (it == rt.half_open.end()) return;
        if (it->tries >= kMaxTries) {
            rt.half_open.erase(it);
            return;
        }
        ++it->tries;
        const auto& node = topo_.nodes[node_ix];
        send_raw_tcp(node_ix, node.ip, it->remote_ip, it->local_port, it->remote_port, it->isn,
                     it->peer_isn + 1, wire::tcpflag::kSyn | wire::tcpflag::kAck,
                     window_for(node_ix), {}, it->label);
        schedule_synack_retransmit(node_ix, gen);
    });
}

void Simulator::handle_tcp(int node_ix, const wire::EthernetFrame& frame) {
    const auto& node = topo_.nodes[node_ix];
    auto& rt = rt_[node_ix];
    const auto& ip = *frame.ip;
    const auto& tcp = ip.tcp;
    const std::uint8_t flags = tcp.flags;
    TcpConn* conn = find_conn(node_ix, tcp.dport, ip.src, tcp.sport);

    if (flags & wire::tcpflag::kRst) {
        if (conn) {
            auto cb = conn->cbs.on_closed;
            const int id = conn->id;
            erase_conn(id);
            if (cb) cb(id);
        } else {
            auto it = std::find_if(rt.half_open.begin(), rt.half_open.end(), [&](const HalfOpen& h) {
                return h.remote_ip == ip.src && h.remote_port == tcp.sport &&
                       h.local_port == tcp.dport;
            });
            if (it != rt.half_open.end()) rt.half_open.erase(it);
        }
        return;
    }

    if ((flags & wire::tcpflag::kSyn) && !(flags & wire::tcpflag::kAck)) {
        const auto listener = listeners_.find(listen_key(node_ix, tcp.dport));
        if (listener == listeners_.end()) {
            send_raw_tcp(node_ix, node.ip, ip.src, tcp.dport, tcp.sport, 0, tcp.seq + 1,
                         wire::tcpflag::kRst | wire::tcpflag::kAck, 0, {},
                         response_label(node_ix, ip.src));
            return;
        }
        if (static_cast<int>(rt.half_open.size()) >= opts_.mtu_backlog &&
            node.role == NodeRole::Mtu)
            return;  // backlog exhausted, drop silently
        const auto dup = std::find_if(rt.half_open.begin(), rt.half_open.end(),
                                      [&](const HalfOpen& h) {
                                          return h.remote_ip == ip.src &&
                                                 h.remote_port == tcp.sport &&
                                                 h.local_port == tcp.dport;
                                      });
        if (dup != rt.half_open.end()) return;
        HalfOpen ho;
        ho.remote_ip = ip.src;
        ho.remote_port = tcp.sport;
        ho.local_port = tcp.dport;
        ho.isn = static_cast<std::uint32_t>(rng_.uniform_int(0, 0x7FFFFFFF));
        ho.peer_isn = tcp.seq;
        ho.gen = ++rt.half_open_gen;
        ho.label = response_label(node_ix, ip.src);
        rt.half_open.push_back(ho);
        send_raw_tcp(node_ix, node.ip, ip.src, tcp.dport, tcp.sport, ho.isn, tcp.seq + 1,
                     wire::tcpflag::kSyn | wire::tcpflag::kAck, window_for(node_ix), {}, ho.label);
        schedule_synack_retransmit(node_ix, ho.gen);
        return;
    }

    if ((flags & wire::tcpflag::kSyn) && (flags & wire::tcpflag::kAck)) {
        if (!conn || conn->state != TcpState::SynSent) {
            // unexpected SYN-ACK (e.g. a half-open scan probe): refuse it
            send_raw_tcp(node_ix, node.ip, ip.src, tcp.dport, tcp.sport, tcp.ack, 0,
                         wire::tcpflag::kRst, 0, {}, response_label(node_ix, ip.src));
            return;
        }
        if (tcp.ack != conn->snd_nxt) return;
        if (!conn->pending.empty() && conn->pending.front().tries == 0)
            conn->srtt_s = static_cast<double>(now_us_ - conn->pending.front().first_tx_us) / 1e6;
        conn->pending.clear();
        conn->state = TcpState::Established;
        conn->snd_una = tcp.ack;
        conn->rcv_nxt = tcp.seq + 1;
        tcp_segment_out(*conn, wire::tcpflag::kAck, conn->snd_nxt, {}, false);
        if (conn->cbs.on_established) conn->cbs.on_established(conn->id);
        return;
    }

    if (!(flags & wire::tcpflag::kAck)) return;

    if (!conn) {
        // final step of a passive open?
        auto it = std::find_if(rt.half_open.begin(), rt.half_open.end(), [&](const HalfOpen& h) {
            return h.remote_ip == ip.src && h.remote_port == tcp.sport && h.local_port == tcp.dport;
        });
        if (it != rt.half_open.end() && tcp.ack == it->isn + 1) {
            TcpConn nc;
            nc.id = next_conn_id_++;
            nc.node = node_ix;
            nc.local_ip = node.ip;
            nc.remote_ip = ip.src;
            nc.local_port = tcp.dport;
            nc.remote_port = tcp.sport;
            nc.state = TcpState::Established;
            nc.snd_nxt = it->isn + 1;
            nc.snd_una = it->isn + 1;
            nc.rcv_nxt = it->peer_isn + 1;
            rt.half_open.erase(it);
            const int id = nc.id;
            conns_[id] = std::move(nc);
            const auto listener = listeners_.find(listen_key(node_ix, tcp.dport));
            if (listener != listeners_.end()) conns_[id].cbs = listener->second(id);
            conn = &conns_[id];
            if (conn->cbs.on_established) conn->cbs.on_established(id);
            // fall through: the ACK may carry data
        } else {
            return;
        }
    }

    // acknowledgement bookkeeping
    if (tcp.ack > conn->snd_una && tcp.ack <= conn->snd_nxt) {
        conn->snd_una = tcp.ack;
        for (auto it = conn->pending.begin(); it != conn->pending.end();) {
            const std::uint32_t logical = static_cast<std::uint32_t>(it->payload.size()) +
                                          ((it->flags & (wire::tcpflag::kSyn | wire::tcpflag::kFin))
                                               ? 1u
                                               : 0u);
            if (tcp.ack >= it->seq + logical) {
                if (it->tries == 0) {
                    const double sample = static_cast<double>(now_us_ - it->first_tx_us) / 1e6;
                    conn->srtt_s = conn->srtt_s == 0.0 ? sample
                                                       : 0.875 * conn->srtt_s + 0.125 * sample;
                }
                it = conn->pending.erase(it);
            } else {
                ++it;
            }
        }
    }

    const int conn_id = conn->id;
    if (!tcp.payload.empty()) {
        if (tcp.seq == conn->rcv_nxt) {
            conn->rcv_nxt += static_cast<std::uint32_t>(tcp.payload.size());
            tcp_segment_out(*conn, wire::tcpflag::kAck, conn->snd_nxt, {}, false);
            if (conn->cbs.on_data) conn->cbs.on_data(conn_id, tcp.payload);
            conn = conns_.count(conn_id) ? &conns_[conn_id] : nullptr;
            if (!conn) return;
        } else {
            // out of order or duplicate: re-assert the expected sequence
            tcp_segment_out(*conn, wire::tcpflag::kAck, conn->snd_nxt, {}, false);
        }
    }

    if (flags & wire::tcpflag::kFin) {
        const bool in_order = tcp.seq + tcp.payload.size() == conn->rcv_nxt;
        if (!in_order) return;
        conn->rcv_nxt += 1;
        if (conn->fin_sent) {
            tcp_segment_out(*conn, wire::tcpflag::kAck, conn->snd_nxt, {}, false);
        } else {
            conn->fin_sent = true;
            const std::uint32_t seq = conn->snd_nxt;
            conn->snd_nxt += 1;
            tcp_segment_out(*conn, wire::tcpflag::kFin | wire::tcpflag::kAck, seq, {}, false);
        }
        auto cb = conn->cbs.on_closed;
        erase_conn(conn_id);
        if (cb) cb(conn_id);
    }
}

RunResult Simulator::run() {
    // process stepping across the whole horizon
    const auto period_us = static_cast<std::int64_t>(opts_.cyclic_period_s * 1e6);
    for (std::int64_t t = 0; t <= duration_us_; t += period_us) {
        schedule(t, [this] {
            const auto& st = feeder_.step(opts_.cyclic_period_s);
            for (std::size_t i = 0; i < st.station_measurements.size(); ++i) {
                const auto& m = st.station_measurements[i];
                result_.process_trace.push_back(ProcessSample{
                    static_cast<double>(now_us_) / 1e6, static_cast<int>(i), m.p_mw, m.v_pu});
            }
        });
    }

    mtu_app_ = std::make_unique<MtuApp>(*this, mtu_ix_, feeder_.model());
    mtu_app_->start();
    for (std::size_t i = 0; i < topo_.nodes.size(); ++i) {
        if (topo_.nodes[i].role != NodeRole::Rtu) continue;
        rtu_apps_.push_back(std::make_unique<RtuApp>(*this, static_cast<int>(i),
                                                     topo_.nodes[i].station));
        rtu_apps_.back()->start();
    }
    if (attacker_ctrl_) attacker_ctrl_->on_start(*this);

    while (!queue_.empty()) {
        Event ev = queue_.top();
        queue_.pop();
        if (ev.t_us >= duration_us_) break;
        now_us_ = ev.t_us;
        ev.fn();
    }
    return std::move(result_);
}

}  // namespace gridwatch::netsim
