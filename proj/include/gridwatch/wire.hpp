#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Byte-level Ethernet II / ARP / IPv4 / TCP frame building and parsing.
// All frames in the simulator are real octet sequences so captures export
// to pcap unchanged and checksums can be verified independently.
namespace gridwatch::wire {

using Mac = std::array<std::uint8_t, 6>;
using Ipv4 = std::uint32_t;  // host byte order

std::string mac_to_string(const Mac& mac);
std::string ipv4_to_string(Ipv4 ip);
Ipv4 ipv4_from_octets(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d);

constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
constexpr std::uint16_t kEtherTypeArp = 0x0806;

// RFC 1071 one's-complement checksum (odd length zero-padded).
std::uint16_t internet_checksum(const std::uint8_t* data, std::size_t size);
std::uint16_t internet_checksum(const std::vector<std::uint8_t>& data);

namespace tcpflag {
constexpr std::uint8_t kFin = 0x01;
constexpr std::uint8_t kSyn = 0x02;
constexpr std::uint8_t kRst = 0x04;
constexpr std::uint8_t kPsh = 0x08;
constexpr std::uint8_t kAck = 0x10;
}  // namespace tcpflag

struct ArpPacket {
    std::uint16_t oper = 1;  // 1 request, 2 reply
    Mac sender_mac{};
    Ipv4 sender_ip = 0;
    Mac target_mac{};
    Ipv4 target_ip = 0;
};

struct TcpSegment {
    std::uint16_t sport = 0;
    std::uint16_t dport = 0;
    std::uint32_t seq = 0;
    std::uint32_t ack = 0;
    std::uint8_t flags = 0;
    std::uint16_t window = 0;
    std::uint16_t checksum = 0;  // filled on build
    std::vector<std::uint8_t> payload;
};

struct Ipv4Packet {
    Ipv4 src = 0;
    Ipv4 dst = 0;
    std::uint16_t identification = 0;
    std::uint16_t total_length = 0;  // filled on build
    std::uint8_t ttl = 64;
    std::uint8_t protocol = 6;
    std::uint16_t header_checksum = 0;  // filled on build
    TcpSegment tcp;
};

struct EthernetFrame {
    Mac dst{};
    Mac src{};
    std::uint16_t ethertype = kEtherTypeIpv4;
    // exactly one of the two is meaningful, selected by ethertype
    std::optional<ArpPacket> arp;
    std::optional<Ipv4Packet> ip;
};

// Serializers compute lengths and checksums.
std::vector<std::uint8_t> build_frame(const EthernetFrame& frame);

struct ParsedFrame {
    bool ok = false;
    EthernetFrame frame;
};
ParsedFrame parse_frame(const std::vector<std::uint8_t>& bytes);

// Recomputes the IP header and TCP checksums of an encoded IPv4/TCP frame
// and compares with the stored ones. True when both match.
bool verify_checksums(const std::vector<std::uint8_t>& bytes);

}  // namespace gridwatch::wire
