#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridwatch/wire.hpp"

using namespace gridwatch::wire;

TEST_CASE("internet checksum reference values") {
    const std::vector<std::uint8_t> zeros(20, 0);
    CHECK(internet_checksum(zeros) == 0xFFFF);

    const std::vector<std::uint8_t> one = {0x00, 0x01};
    CHECK(internet_checksum(one) == 0xFFFE);

    // classic worked example
    const std::vector<std::uint8_t> sample = {0x00, 0x01, 0xf2, 0x03, 0xf4, 0xf5, 0xf6, 0xf7};
    CHECK(internet_checksum(sample) == 0x220D);

    // odd length is zero padded
    const std::vector<std::uint8_t> odd = {0x01};
    CHECK(internet_checksum(odd) == static_cast<std::uint16_t>(~0x0100 & 0xFFFF));
}

TEST_CASE("tcp frame build/parse round trip with valid checksums") {
    EthernetFrame f;
    f.dst = {0x02, 0, 0, 0, 0, 0x01};
    f.src = {0x02, 0, 0, 0, 0x01, 0x05};
    f.ethertype = kEtherTypeIpv4;
    Ipv4Packet ip;
    ip.src = ipv4_from_octets(10, 0, 0, 14);
    ip.dst = ipv4_from_octets(10, 0, 0, 1);
    ip.identification = 77;
    TcpSegment tcp;
    tcp.sport = 2404;
    tcp.dport = 49152;
    tcp.seq = 1000;
    tcp.ack = 2000;
    tcp.flags = tcpflag::kPsh | tcpflag::kAck;
    tcp.window = 2048;
    tcp.payload = {0x68, 0x04, 0x07, 0x00, 0x00, 0x00};
    ip.tcp = tcp;
    f.ip = ip;

    const auto bytes = build_frame(f);
    CHECK(bytes.size() == 14 + 20 + 20 + 6);
    CHECK(verify_checksums(bytes));

    auto parsed = parse_frame(bytes);
    REQUIRE(parsed.ok);
    REQUIRE(parsed.frame.ip.has_value());
    CHECK(parsed.frame.ip->src == ip.src);
    CHECK(parsed.frame.ip->dst == ip.dst);
    CHECK(parsed.frame.ip->total_length == 46);
    CHECK(parsed.frame.ip->tcp.sport == 2404);
    CHECK(parsed.frame.ip->tcp.payload == tcp.payload);

    // flipping one payload byte must break checksum verification
    auto corrupted = bytes;
    corrupted.back() ^= 0xFF;
    CHECK(!verify_checksums(corrupted));
}

TEST_CASE("arp frame build/parse round trip") {
    EthernetFrame f;
    f.dst = {0xff, 0xff, 0xff, 0xff, 0xff, 0xff};
    f.src = {0x02, 0, 0, 0, 0, 0x0a};
    f.ethertype = kEtherTypeArp;
    ArpPacket arp;
    arp.oper = 1;
    arp.sender_mac = f.src;
    arp.sender_ip = ipv4_from_octets(10, 0, 0, 4);
    arp.target_ip = ipv4_from_octets(10, 0, 0, 1);
    f.arp = arp;

    const auto bytes = build_frame(f);
    CHECK(bytes.size() == 42);
    auto parsed = parse_frame(bytes);
    REQUIRE(parsed.ok);
    REQUIRE(parsed.frame.arp.has_value());
    CHECK(parsed.frame.arp->sender_ip == arp.sender_ip);
    CHECK(parsed.frame.arp->target_ip == arp.target_ip);
    CHECK(parsed.frame.arp->oper == 1);
}

TEST_CASE("string helpers") {
    CHECK(mac_to_string({0x02, 0x00, 0x00, 0x00, 0x01, 0x1a}) == "02:00:00:00:01:1a");
    CHECK(ipv4_to_string(ipv4_from_octets(10, 0, 0, 35)) == "10.0.0.35");
}
