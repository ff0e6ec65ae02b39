#include "gridwatch/attack.hpp"

#include <algorithm>
#include <memory>

namespace gridwatch::attack {

using netsim::GroundTruth;
using netsim::MitrePhase;
using netsim::NodeRole;

namespace {

constexpr std::int64_t kForwardDelayUs = 300;
// tool port ranges, kept clear of the 49152+ ephemeral range the stacks use
constexpr std::uint16_t kFloodPortBase = 20000;
constexpr std::uint16_t kFloodPortEnd = 29999;
constexpr std::uint16_t kScanPortBase = 30000;
constexpr std::uint16_t kScanPortSpan = 1000;

bool window_overlap(double a0, double a1, double b0, double b1) {
    return a0 < b1 && b0 < a1;
}

bool uses_mitm_channel(const Technique& t) {
    return std::holds_alternative<MitmMutateParams>(t) ||
           std::holds_alternative<RstInjectionParams>(t) ||
           std::holds_alternative<ReplayParams>(t);
}

}  // namespace

AttackScript paper_scenario_script(int n_rtus) {
    AttackScript script;
    auto add = [&](MitrePhase phase, const char* ttp, double a, double b, Technique tech) {
        script.stages.push_back(AttackStage{phase, ttp, a, b, std::move(tech)});
    };

    EnumerateParams scan;
    scan.subnet_prefix = 26;
    scan.ports = {22, 2404};
    scan.passes = 12;
    add(MitrePhase::Discovery, "T0846", 0.002, 0.020, scan);

    ArpSpoofParams spoof;
    spoof.victims.emplace_back("mtu", "rtu1");
    if (n_rtus >= 2) spoof.victims.emplace_back("mtu", "rtu2");
    spoof.interval_s = 5.0;
    add(MitrePhase::LateralMovement, "T1557 arp-spoof", 0.020, 0.800, spoof);

    RstInjectionParams rst;
    rst.flows.emplace_back("mtu", "rtu1");
    if (n_rtus >= 2) rst.flows.emplace_back("mtu", "rtu2");
    add(MitrePhase::Impact, "T0814", 0.020, 0.060, rst);

    SynFloodParams flood;
    flood.target = "mtu";
    flood.rate_per_s = 150.0;
    add(MitrePhase::Impact, "T1499 DoS", 0.060, 0.100, flood);

    MitmMutateParams cot_rules;
    cot_rules.rules.push_back(
        MutationRule{MutationSelector{FlowDirection::RtuToMtu, std::nullopt, std::nullopt},
                     SetCot{iec104::Cot::Spontaneous}});
    add(MitrePhase::Impact, "T0832 value-manipulation", 0.200, 0.450, cot_rules);

    MitmMutateParams value_rules;
    value_rules.rules.push_back(
        MutationRule{MutationSelector{FlowDirection::RtuToMtu, std::nullopt, std::nullopt},
                     StaticValue{0.0f}});
    add(MitrePhase::Impact, "T0832 value-manipulation", 0.450, 0.700, value_rules);

    ReplayParams replay;
    replay.flow_from = "rtu1";
    replay.flow_to = "mtu";
    replay.record_start_frac = 0.100;
    replay.record_end_frac = 0.200;
    add(MitrePhase::DefenseEvasion, "T0856 replay", 0.700, 0.800, replay);

    if (n_rtus >= 3) {
        SshBruteforceParams ssh;
        ssh.target = "rtu" + std::to_string(n_rtus);
        ssh.attempts = 20;
        ssh.rate_per_s = 2.0;
        add(MitrePhase::CredentialAccess, "T0822/T1110", 0.800, 1.000, ssh);
    }
    return script;
}

void validate_script(const AttackScript& script, const netsim::Topology& topo) {
    auto require_victim = [&](const std::string& id) {
        const int ix = topo.node_index(id);
        if (ix < 0) throw NotOnSegment(id);
        const auto role = topo.nodes[ix].role;
        if (role != NodeRole::Mtu && role != NodeRole::Rtu) throw NotOnSegment(id);
    };

    // collect spoof coverage first
    struct SpoofCover {
        double a, b;
        std::vector<std::pair<std::string, std::string>> victims;
    };
    std::vector<SpoofCover> spoofs;
    for (const auto& st : script.stages) {
        if (st.start_frac < 0.0 || st.end_frac > 1.0 || st.start_frac > st.end_frac)
            throw std::invalid_argument("attack stage window out of range");
        if (const auto* p = std::get_if<ArpSpoofParams>(&st.technique)) {
            for (const auto& [a, b] : p->victims) {
                require_victim(a);
                require_victim(b);
            }
            spoofs.push_back({st.start_frac, st.end_frac, p->victims});
        }
    }

    auto pair_covered = [&](double a, double b, const std::string& x, const std::string& y) {
        for (const auto& sp : spoofs) {
            if (!(sp.a <= a && b <= sp.b)) continue;
            for (const auto& [u, v] : sp.victims)
                if ((u == x && v == y) || (u == y && v == x)) return true;
        }
        return false;
    };
    auto any_cover = [&](double a, double b) {
        for (const auto& sp : spoofs)
            if (sp.a <= a && b <= sp.b && !sp.victims.empty()) return true;
        return false;
    };

    std::vector<std::pair<double, double>> mitm_windows;
    for (const auto& st : script.stages) {
        if (st.start_frac == st.end_frac) continue;  // inert stage
        if (const auto* p = std::get_if<SynFloodParams>(&st.technique)) {
            if (p->rate_per_s <= 0.0) throw std::invalid_argument("syn flood rate must be > 0");
            if (topo.node_index(p->target) < 0) throw NotOnSegment(p->target);
        } else if (const auto* p = std::get_if<RstInjectionParams>(&st.technique)) {
            for (const auto& [from, to] : p->flows)
                if (!pair_covered(st.start_frac, st.end_frac, from, to))
                    throw MitmNotActive("rst injection on " + from + "->" + to);
        } else if (std::holds_alternative<MitmMutateParams>(st.technique)) {
            if (!any_cover(st.start_frac, st.end_frac))
                throw MitmNotActive("mutation stage outside spoof window");
        } else if (const auto* p = std::get_if<ReplayParams>(&st.technique)) {
            if (p->record_start_frac >= p->record_end_frac) throw NothingRecorded();
            if (p->record_end_frac > st.start_frac)
                throw std::invalid_argument("replay: record window must precede replay window");
            if (!pair_covered(st.start_frac, st.end_frac, p->flow_from, p->flow_to))
                throw MitmNotActive("replay on " + p->flow_from + "->" + p->flow_to);
        } else if (const auto* p = std::get_if<SshBruteforceParams>(&st.technique)) {
            const int ix = topo.node_index(p->target);
            if (ix < 0 || topo.nodes[ix].role != NodeRole::Rtu) throw NotOnSegment(p->target);
            for (const auto& sp : spoofs)
                for (const auto& [u, v] : sp.victims)
                    if (u == p->target || v == p->target) throw TargetIsSpoofed(p->target);
        }
        if (uses_mitm_channel(st.technique)) mitm_windows.emplace_back(st.start_frac, st.end_frac);
    }

    for (std::size_t i = 0; i < mitm_windows.size(); ++i)
        for (std::size_t j = i + 1; j < mitm_windows.size(); ++j)
            if (window_overlap(mitm_windows[i].first, mitm_windows[i].second,
                               mitm_windows[j].first, mitm_windows[j].second))
                throw std::invalid_argument(
                    "single-agent rule: MITM-channel stages may not overlap");
}

Engine::Engine(AttackScript script, std::uint64_t seed)
    : script_(std::move(script)), rng_(seed) {}

bool Engine::stage_active(const StageRt& st) const {
    const auto t = sim_->now_us();
    return t >= st.t0_us && t < st.t1_us;
}

bool Engine::pair_spoofed(wire::Ipv4 a, wire::Ipv4 b) const {
    for (const auto& st : stages_) {
        if (!stage_active(st)) continue;
        const auto* p = std::get_if<ArpSpoofParams>(&st.stage->technique);
        if (!p) continue;
        for (const auto& [x, y] : p->victims) {
            const auto ipx = sim_->topology().node(x).ip;
            const auto ipy = sim_->topology().node(y).ip;
            if ((ipx == a && ipy == b) || (ipx == b && ipy == a)) return true;
        }
    }
    return false;
}

void Engine::on_start(netsim::Simulator& sim) {
    sim_ = &sim;
    attacker_ix_ = sim.attacker_index();
    if (attacker_ix_ < 0) return;
    const auto dur = static_cast<double>(sim.duration_us());
    for (const auto& stage : script_.stages) {
        StageRt rt;
        rt.stage = &stage;
        rt.t0_us = static_cast<std::int64_t>(stage.start_frac * dur);
        rt.t1_us = static_cast<std::int64_t>(stage.end_frac * dur);
        stages_.push_back(rt);
    }
    for (auto& st : stages_) {
        if (const auto* p = std::get_if<ArpSpoofParams>(&st.stage->technique)) {
            schedule_spoof(st, *p);
        } else if (const auto* p = std::get_if<SynFloodParams>(&st.stage->technique)) {
            schedule_flood(st, *p);
        } else if (const auto* p = std::get_if<EnumerateParams>(&st.stage->technique)) {
            schedule_enumeration(st, *p);
        } else if (const auto* p = std::get_if<SshBruteforceParams>(&st.stage->technique)) {
            schedule_bruteforce(st, *p);
        } else if (const auto* p = std::get_if<ReplayParams>(&st.stage->technique)) {
            sim_->schedule(st.t0_us, [this, &st, p] { schedule_replay_emissions(st, *p); });
        }
    }
}

void Engine::emit_poison(wire::Ipv4 victim_ip, wire::Ipv4 claimed_ip,
                         const GroundTruth& label) {
    const auto victim_mac = sim_->mac_of_ip(victim_ip);
    if (!victim_mac) return;
    const auto& me = sim_->topology().nodes[attacker_ix_];
    wire::EthernetFrame f;
    f.dst = *victim_mac;
    f.src = me.mac;
    f.ethertype = wire::kEtherTypeArp;
    wire::ArpPacket arp;
    arp.oper = 2;
    arp.sender_mac = me.mac;   // the lie: claimed ip lives at the attacker's mac
    arp.sender_ip = claimed_ip;
    arp.target_mac = *victim_mac;
    arp.target_ip = victim_ip;
    f.arp = arp;
    sim_->emit_raw(attacker_ix_, wire::build_frame(f), label);
}

void Engine::schedule_spoof(const StageRt& st, const ArpSpoofParams& p) {
    const auto interval = static_cast<std::int64_t>(p.interval_s * 1e6);
    const GroundTruth label{st.stage->phase, st.stage->ttp};
    for (std::int64_t t = st.t0_us; t < st.t1_us; t += interval) {
        sim_->schedule(t, [this, &p, label] {
            for (const auto& [a, b] : p.victims) {
                const auto ipa = sim_->topology().node(a).ip;
                const auto ipb = sim_->topology().node(b).ip;
                emit_poison(ipa, ipb, label);
                emit_poison(ipb, ipa, label);
            }
        });
    }
}

void Engine::schedule_flood(const StageRt& st, const SynFloodParams& p) {
    const int target_ix = sim_->topology().node_index(p.target);
    if (target_ix < 0) return;
    const auto target = sim_->topology().nodes[target_ix];
    const auto& me = sim_->topology().nodes[attacker_ix_];
    const GroundTruth label{st.stage->phase, st.stage->ttp};
    const auto step = static_cast<std::int64_t>(1e6 / p.rate_per_s);
    for (std::int64_t t = st.t0_us; t < st.t1_us; t += step) {
        sim_->schedule(t, [this, target, me, label] {
            wire::EthernetFrame f;
            f.dst = target.mac;
            f.src = me.mac;
            f.ethertype = wire::kEtherTypeIpv4;
            wire::Ipv4Packet ip;
            ip.src = me.ip;
            ip.dst = target.ip;
            ip.identification = ident_++;
            ip.tcp.sport = flood_port_;
            flood_port_ = flood_port_ >= kFloodPortEnd ? kFloodPortBase : flood_port_ + 1;
            ip.tcp.dport = 2404;
            ip.tcp.seq = static_cast<std::uint32_t>(rng_.uniform_int(0, 0x7FFFFFFF));
            ip.tcp.flags = wire::tcpflag::kSyn;
            ip.tcp.window = 512;
            f.ip = ip;
            sim_->emit_raw(attacker_ix_, wire::build_frame(f), label);
        });
    }
}

void Engine::schedule_enumeration(const StageRt& st, const EnumerateParams& p) {
    const auto& me = sim_->topology().nodes[attacker_ix_];
    const GroundTruth label{st.stage->phase, st.stage->ttp};
    const int host_bits = 32 - p.subnet_prefix;
    const int usable = (1 << host_bits) - 2;
    const auto base = me.ip & ~((1u << host_bits) - 1);

    const std::int64_t span = st.t1_us - st.t0_us;
    const int passes = std::max(1, p.passes);
    const std::int64_t pass_len = span / passes;

    // live hosts: everything with an address except the attacker itself
    std::vector<wire::Ipv4> live;
    for (const auto& n : sim_->topology().nodes)
        if (n.ip != me.ip) live.push_back(n.ip);

    for (int pass = 0; pass < passes; ++pass) {
        const std::int64_t pass_t0 = st.t0_us + pass * pass_len;
        const std::int64_t arp_gap = std::max<std::int64_t>(1, pass_len / 2 / std::max(1, usable));
        for (int h = 1; h <= usable; ++h) {
            const wire::Ipv4 target = base + static_cast<wire::Ipv4>(h);
            if (target == me.ip) continue;
            sim_->schedule(pass_t0 + h * arp_gap, [this, me, target, label] {
                wire::EthernetFrame f;
                f.dst = {0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF};
                f.src = me.mac;
                f.ethertype = wire::kEtherTypeArp;
                wire::ArpPacket arp;
                arp.oper = 1;
                arp.sender_mac = me.mac;
                arp.sender_ip = me.ip;
                arp.target_ip = target;
                f.arp = arp;
                sim_->emit_raw(attacker_ix_, wire::build_frame(f), label);
            });
        }
        if (pass == 0) continue;  // first sweep is address discovery only
        const std::size_t probes = live.size() * p.ports.size();
        const std::int64_t syn_gap = std::max<std::int64_t>(1, pass_len / 2 / std::max<std::size_t>(1, probes));
        std::int64_t k = 0;
        for (const auto ip_target : live) {
            for (const auto port : p.ports) {
                sim_->schedule(pass_t0 + pass_len / 2 + (k++) * syn_gap,
                               [this, me, ip_target, port, label] {
                    const auto dst_mac = sim_->mac_of_ip(ip_target);
                    if (!dst_mac) return;
                    wire::EthernetFrame f;
                    f.dst = *dst_mac;
                    f.src = me.mac;
                    f.ethertype = wire::kEtherTypeIpv4;
                    wire::Ipv4Packet ip;
                    ip.src = me.ip;
                    ip.dst = ip_target;
                    ip.identification = ident_++;
                    ip.tcp.sport = static_cast<std::uint16_t>(
                        kScanPortBase + (scan_port_seq_++ % kScanPortSpan));
                    ip.tcp.dport = port;
                    ip.tcp.seq = static_cast<std::uint32_t>(rng_.uniform_int(0, 0x7FFFFFFF));
                    ip.tcp.flags = wire::tcpflag::kSyn;
                    ip.tcp.window = 512;
                    f.ip = ip;
                    sim_->emit_raw(attacker_ix_, wire::build_frame(f), label);
                });
            }
        }
    }
}

void Engine::schedule_bruteforce(const StageRt& st, const SshBruteforceParams& p) {
    const int target_ix = sim_->topology().node_index(p.target);
    if (target_ix < 0) return;
    const auto target_ip = sim_->topology().nodes[target_ix].ip;
    const GroundTruth label{st.stage->phase, st.stage->ttp};
    const auto step = static_cast<std::int64_t>(1e6 / p.rate_per_s);
    for (int k = 0; k < p.attempts; ++k) {
        const std::int64_t t = st.t0_us + k * step;
        if (t >= st.t1_us) break;
        sim_->schedule(t, [this, target_ip, label] {
            auto state = std::make_shared<int>(0);
            netsim::TcpCallbacks cbs;
            cbs.on_established = [this, state](int conn) {
                static const char hello[] = "SSH-2.0-bruteforce_tool\r\n";
                sim_->tcp_send(conn, std::vector<std::uint8_t>(hello, hello + sizeof(hello) - 1));
            };
            cbs.on_data = [this, state](int conn, const std::vector<std::uint8_t>&) {
                if (*state == 0) {
                    *state = 1;
                    std::vector<std::uint8_t> login(32, 0x41);
                    login[0] = 'u';
                    login[1] = 's';
                    login[2] = 'r';
                    sim_->tcp_send(conn, login);
                } else if (*state == 1) {
                    *state = 2;
                    sim_->tcp_close(conn);
                }
            };
            sim_->tcp_connect(attacker_ix_, target_ip, 22, std::move(cbs), label);
        });
    }
}

void Engine::schedule_replay_emissions(const StageRt& st, const ReplayParams& p) {
    if (recordings_.empty()) return;
    const auto from_ip = sim_->topology().node(p.flow_from).ip;
    const auto to_ip = sim_->topology().node(p.flow_to).ip;
    const GroundTruth label{st.stage->phase, st.stage->ttp};
    const auto& me = sim_->topology().nodes[attacker_ix_];
    for (const auto& rec : recordings_) {
        const std::int64_t t = st.t0_us + rec.rel_us;
        if (t >= st.t1_us) continue;
        sim_->schedule(t, [this, rec, from_ip, to_ip, label, me] {
            if (!pair_spoofed(from_ip, to_ip)) return;
            auto& flow = flows_[{from_ip, to_ip}];
            if (!flow.ports_valid || !flow.cursor_valid) return;
            const auto dst_mac = sim_->mac_of_ip(to_ip);
            if (!dst_mac) return;
            wire::EthernetFrame f;
            f.dst = *dst_mac;
            f.src = me.mac;
            f.ethertype = wire::kEtherTypeIpv4;
            wire::Ipv4Packet ip;
            ip.src = from_ip;
            ip.dst = to_ip;
            ip.identification = ident_++;
            ip.tcp.sport = flow.from_port;
            ip.tcp.dport = flow.to_port;
            ip.tcp.seq = flow.cursor;
            ip.tcp.ack = flow.last_ack;
            ip.tcp.flags = wire::tcpflag::kPsh | wire::tcpflag::kAck;
            ip.tcp.window = rec.window;
            ip.tcp.payload = rec.payload;
            f.ip = ip;
            if (sim_->emit_raw(attacker_ix_, wire::build_frame(f), label)) {
                flow.cursor += static_cast<std::uint32_t>(rec.payload.size());
                ++replayed_;
            }
        });
    }
}

std::vector<std::uint8_t> Engine::mutate_payload(const std::vector<std::uint8_t>& payload,
                                                 const std::vector<MutationRule>& rules,
                                                 FlowDirection dir, bool& changed) {
    std::vector<std::uint8_t> out;
    out.reserve(payload.size());
    std::size_t off = 0;
    bool any = false;
    while (off < payload.size()) {
        auto res = iec104::decode_apdu(payload.data() + off, payload.size() - off);
        if (!res.ok()) {
            changed = false;
            return payload;  // undecodable traffic is forwarded untouched
        }
        off += res.consumed;
        auto apdu = *res.apdu;
        if (apdu.asdu) {
            for (const auto& rule : rules) {
                const auto& sel = rule.selector;
                if (sel.direction != FlowDirection::Any && sel.direction != dir) continue;
                if (sel.coa && *sel.coa != apdu.asdu->common_address) continue;
                if (const auto* sc = std::get_if<SetCot>(&rule.action)) {
                    if (apdu.asdu->cot != sc->new_cot) {
                        apdu.asdu->cot = sc->new_cot;
                        any = true;
                    }
                } else if (const auto* sv = std::get_if<StaticValue>(&rule.action)) {
                    if (apdu.asdu->type_id != iec104::TypeId::M_ME_NF_1) continue;
                    for (auto& obj : apdu.asdu->objects) {
                        if (sel.ioa && *sel.ioa != obj.ioa) continue;
                        if (auto* sf = std::get_if<iec104::ShortFloat>(&obj.value)) {
                            if (sf->value != sv->value) {
                                sf->value = sv->value;
                                any = true;
                            }
                        }
                    }
                }
            }
        }
        const auto enc = iec104::encode_apdu(apdu);
        out.insert(out.end(), enc.begin(), enc.end());
    }
    changed = any;
    return out;
}

void Engine::on_mitm_frame(netsim::Simulator& sim, const std::vector<std::uint8_t>& bytes) {
    auto parsed = wire::parse_frame(bytes);
    if (!parsed.ok || !parsed.frame.ip) return;
    auto frame = parsed.frame;
    auto& ip = *frame.ip;
    const wire::Ipv4 src_ip = ip.src, dst_ip = ip.dst;
    if (!pair_spoofed(src_ip, dst_ip)) return;  // stale poison: blackhole

    const auto& topo = sim.topology();
    auto role_of = [&](wire::Ipv4 addr) {
        for (const auto& n : topo.nodes)
            if (n.ip == addr) return n.role;
        return NodeRole::Switch;
    };
    FlowDirection dir = FlowDirection::Any;
    if (role_of(src_ip) == NodeRole::Rtu && role_of(dst_ip) == NodeRole::Mtu)
        dir = FlowDirection::RtuToMtu;
    else if (role_of(src_ip) == NodeRole::Mtu && role_of(dst_ip) == NodeRole::Rtu)
        dir = FlowDirection::MtuToRtu;

    auto& fwd = flows_[{src_ip, dst_ip}];
    auto& rev = flows_[{dst_ip, src_ip}];

    // seq spaces as seen downstream of the attacker
    const std::uint32_t adj_seq = ip.tcp.seq + static_cast<std::uint32_t>(fwd.seq_delta);
    const std::uint32_t adj_ack = ip.tcp.ack - static_cast<std::uint32_t>(rev.seq_delta);
    fwd.from_port = ip.tcp.sport;
    fwd.to_port = ip.tcp.dport;
    fwd.ports_valid = true;
    fwd.last_ack = adj_ack;
    fwd.window = ip.tcp.window;

    bool has_iframe = false;
    {
        std::size_t off = 0;
        while (off < ip.tcp.payload.size()) {
            auto res = iec104::decode_apdu(ip.tcp.payload.data() + off,
                                           ip.tcp.payload.size() - off);
            if (!res.ok()) break;
            if (std::holds_alternative<iec104::IFrame>(res.apdu->control)) has_iframe = true;
            off += res.consumed;
        }
    }

    std::optional<GroundTruth> label;

    for (const auto& st : stages_) {
        const auto* rp = std::get_if<ReplayParams>(&st.stage->technique);
        if (!rp) continue;
        const auto from_ip = topo.node(rp->flow_from).ip;
        const auto to_ip = topo.node(rp->flow_to).ip;
        if (src_ip != from_ip || dst_ip != to_ip) continue;
        const auto dur = static_cast<double>(sim.duration_us());
        const auto rec_t0 = static_cast<std::int64_t>(rp->record_start_frac * dur);
        const auto rec_t1 = static_cast<std::int64_t>(rp->record_end_frac * dur);
        const auto now = sim.now_us();
        if (has_iframe && now >= rec_t0 && now < rec_t1)
            recordings_.push_back(Recording{now - rec_t0, ip.tcp.payload, ip.tcp.window});
        if (has_iframe && stage_active(st)) return;  // suppress the genuine stream
    }

    bool changed = false;
    for (const auto& st : stages_) {
        const auto* mp = std::get_if<MitmMutateParams>(&st.stage->technique);
        if (!mp || !stage_active(st) || ip.tcp.payload.empty()) continue;
        bool stage_changed = false;
        auto mutated = mutate_payload(ip.tcp.payload, mp->rules, dir, stage_changed);
        if (stage_changed) {
            fwd.seq_delta += static_cast<std::int64_t>(mutated.size()) -
                             static_cast<std::int64_t>(ip.tcp.payload.size());
            ip.tcp.payload = std::move(mutated);
            changed = true;
            label = GroundTruth{st.stage->phase, st.stage->ttp};
        }
    }

    bool rst = false;
    for (const auto& st : stages_) {
        const auto* rp = std::get_if<RstInjectionParams>(&st.stage->technique);
        if (!rp || !stage_active(st)) continue;
        for (const auto& [from, to] : rp->flows) {
            if (topo.node(from).ip == src_ip && topo.node(to).ip == dst_ip) {
                rst = true;
                if (!changed) label = GroundTruth{st.stage->phase, st.stage->ttp};
            }
        }
    }

    if (!label) {
        for (const auto& st : stages_) {
            if (!stage_active(st)) continue;
            if (std::holds_alternative<ArpSpoofParams>(st.stage->technique)) {
                label = GroundTruth{st.stage->phase, st.stage->ttp};
                break;
            }
        }
    }

    // track what the far side will expect next
    const std::uint32_t logical =
        static_cast<std::uint32_t>(ip.tcp.payload.size()) +
        ((ip.tcp.flags & (wire::tcpflag::kSyn | wire::tcpflag::kFin)) ? 1u : 0u);
    const std::uint32_t seq_after = adj_seq + logical;
    if (!fwd.cursor_valid || seq_after > fwd.cursor) {
        fwd.cursor = seq_after;
        fwd.cursor_valid = true;
    }

    const auto dst_mac = sim.mac_of_ip(dst_ip);
    if (!dst_mac) return;
    frame.src = topo.nodes[attacker_ix_].mac;
    frame.dst = *dst_mac;
    ip.ttl = ip.ttl > 1 ? static_cast<std::uint8_t>(ip.ttl - 1) : 1;
    ip.tcp.seq = adj_seq;
    ip.tcp.ack = adj_ack;
    if (rst) ip.tcp.flags |= wire::tcpflag::kRst;
    const auto out = wire::build_frame(frame);
    sim.schedule(sim.now_us() + kForwardDelayUs, [this, out, label] {
        sim_->emit_raw(attacker_ix_, out, label);
    });
}

bool Engine::on_attacker_frame(netsim::Simulator& sim, const std::vector<std::uint8_t>& bytes) {
    auto parsed = wire::parse_frame(bytes);
    if (!parsed.ok || !parsed.frame.ip) return false;
    const auto& ip = *parsed.frame.ip;
    const auto& tcp = ip.tcp;
    const bool to_flood_port = tcp.dport >= kFloodPortBase && tcp.dport <= kFloodPortEnd;
    const bool to_scan_port = tcp.dport >= kScanPortBase && tcp.dport < kScanPortBase + kScanPortSpan;
    if (to_flood_port) return true;  // raw flood socket: responses are ignored
    if (to_scan_port) {
        if ((tcp.flags & wire::tcpflag::kSyn) && (tcp.flags & wire::tcpflag::kAck)) {
            // close the half-open probe
            GroundTruth label{MitrePhase::Discovery, "T0846"};
            for (const auto& st : stages_)
                if (stage_active(st) && std::holds_alternative<EnumerateParams>(st.stage->technique))
                    label = GroundTruth{st.stage->phase, st.stage->ttp};
            const auto& me = sim.topology().nodes[attacker_ix_];
            wire::EthernetFrame f;
            f.dst = parsed.frame.src;
            f.src = me.mac;
            f.ethertype = wire::kEtherTypeIpv4;
            wire::Ipv4Packet out;
            out.src = me.ip;
            out.dst = ip.src;
            out.identification = ident_++;
            out.tcp.sport = tcp.dport;
            out.tcp.dport = tcp.sport;
            out.tcp.seq = tcp.ack;
            out.tcp.ack = 0;
            out.tcp.flags = wire::tcpflag::kRst;
            out.tcp.window = 0;
            f.ip = out;
            sim.emit_raw(attacker_ix_, wire::build_frame(f), label);
        }
        return true;
    }
    return false;
}

netsim::RunResult run_scenario(netsim::Topology topology, process::GridModel grid,
                               netsim::SimOptions options, const AttackScript& script) {
    validate_script(script, topology);
    Engine engine(script, options.seed ^ 0xa77ac4e5ULL);
    netsim::Simulator sim(std::move(topology), std::move(grid), options, &engine);
    return sim.run();
}

}  // namespace gridwatch::attack
