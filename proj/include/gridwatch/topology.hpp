#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridwatch/wire.hpp"

namespace gridwatch::netsim {

enum class NodeRole { Mtu, Rtu, Switch, Attacker, Firewall };

struct Node {
    std::string id;
    NodeRole role = NodeRole::Rtu;
    int station = -1;  // process station index, RTUs only
    wire::Mac mac{};
    wire::Ipv4 ip = 0;
};

struct Link {
    std::string id;
    int a = 0;  // node indices
    int b = 0;
    std::int64_t base_latency_us = 2000;
    std::int64_t jitter_us = 500;
};

class TopologyError : public std::runtime_error {
public:
    explicit TopologyError(const std::string& what) : std::runtime_error("topology: " + what) {}
};

class UnknownLink : public std::runtime_error {
public:
    explicit UnknownLink(const std::string& id) : std::runtime_error("unknown link: " + id) {}
};

struct Topology {
    std::vector<Node> nodes;
    std::vector<Link> links;

    int node_index(const std::string& id) const;
    int link_index(const std::string& id) const;
    const Node& node(const std::string& id) const;

    // duplicate mac/ip detection and MTU/switch connectivity checks
    void validate() const;
};

// Star around one switch with the MTU behind a firewall:
// mtu - firewall - switch - { rtu1..rtuN, attacker }.
// rtuK monitors process station K-1.
Topology build_topology(int n_rtus, double latency_ms = 2.0, double jitter_ms = 0.5);

}  // namespace gridwatch::netsim
