#include "gridwatch/topology.hpp"

#include <set>

namespace gridwatch::netsim {

int Topology::node_index(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return static_cast<int>(i);
    return -1;
}

int Topology::link_index(const std::string& id) const {
    for (std::size_t i = 0; i < links.size(); ++i)
        if (links[i].id == id) return static_cast<int>(i);
    return -1;
}

const Node& Topology::node(const std::string& id) const {
    const int ix = node_index(id);
    if (ix < 0) throw TopologyError("unknown node " + id);
    return nodes[ix];
}

void Topology::validate() const {
    std::set<wire::Ipv4> ips;
    std::set<std::string> macs;
    for (const auto& n : nodes) {
        if (!ips.insert(n.ip).second)
            throw TopologyError("duplicate ip " + wire::ipv4_to_string(n.ip));
        if (!macs.insert(wire::mac_to_string(n.mac)).second)
            throw TopologyError("duplicate mac " + wire::mac_to_string(n.mac));
    }
    std::vector<int> degree(nodes.size(), 0);
    for (const auto& l : links) {
        if (l.a < 0 || l.b < 0 || l.a >= static_cast<int>(nodes.size()) ||
            l.b >= static_cast<int>(nodes.size()))
            throw TopologyError("link " + l.id + " references missing node");
        ++degree[l.a];
        ++degree[l.b];
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        const bool endpoint = n.role == NodeRole::Mtu || n.role == NodeRole::Rtu ||
                              n.role == NodeRole::Attacker;
        if (endpoint && degree[i] != 1)
            throw TopologyError("node " + n.id + " must have exactly one link");
        if (n.role == NodeRole::Firewall && degree[i] != 2)
            throw TopologyError("firewall " + n.id + " must bridge exactly two links");
        if (n.role == NodeRole::Mtu && degree[i] == 0)
            throw TopologyError("MTU " + n.id + " is disconnected");
    }
}

Topology build_topology(int n_rtus, double latency_ms, double jitter_ms) {
    Topology topo;
    const auto lat = static_cast<std::int64_t>(latency_ms * 1000.0);
    const auto jit = static_cast<std::int64_t>(jitter_ms * 1000.0);

    auto make_node = [&](std::string id, NodeRole role, std::uint8_t mac_lo, std::uint8_t ip_lo,
                         int station) {
        Node n;
        n.id = std::move(id);
        n.role = role;
        n.station = station;
        // grid gear shares one OUI; the attacker's tool box brings its own NIC
        const std::uint8_t oui0 = role == NodeRole::Attacker ? 0xfe : 0x02;
        n.mac = {oui0, 0x00, 0x00, 0x00,
                 role == NodeRole::Rtu ? std::uint8_t(0x01) : std::uint8_t(0x00), mac_lo};
        n.ip = wire::ipv4_from_octets(10, 0, 0, ip_lo);
        topo.nodes.push_back(n);
        return static_cast<int>(topo.nodes.size() - 1);
    };

    const int mtu = make_node("mtu", NodeRole::Mtu, 0x01, 1, -1);
    const int fw = make_node("firewall", NodeRole::Firewall, 0x02, 2, -1);
    const int sw = make_node("switch", NodeRole::Switch, 0x03, 3, -1);
    const int att = make_node("attacker", NodeRole::Attacker, 0x0a, 4, -1);

    topo.links.push_back({"mtu-firewall", mtu, fw, lat, jit});
    topo.links.push_back({"firewall-switch", fw, sw, lat, jit});
    topo.links.push_back({"attacker", att, sw, lat, jit});

    for (int k = 1; k <= n_rtus; ++k) {
        const int ix = make_node("rtu" + std::to_string(k), NodeRole::Rtu,
                                 static_cast<std::uint8_t>(k), static_cast<std::uint8_t>(9 + k),
                                 k - 1);
        topo.links.push_back({"rtu" + std::to_string(k), ix, sw, lat, jit});
    }
    topo.validate();
    return topo;
}

}  // namespace gridwatch::netsim
