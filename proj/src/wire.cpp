#include "gridwatch/wire.hpp"

#include <cstdio>
#include <cstring>

namespace gridwatch::wire {

namespace {

void put_u16be(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

std::uint16_t get_u16be(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t get_u32be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void set_u16be(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 8);
    p[1] = static_cast<std::uint8_t>(v & 0xFF);
}

std::uint16_t tcp_checksum_for(Ipv4 src, Ipv4 dst, const std::uint8_t* tcp, std::size_t tcp_len) {
    std::vector<std::uint8_t> pseudo;
    pseudo.reserve(12 + tcp_len);
    put_u32be(pseudo, src);
    put_u32be(pseudo, dst);
    pseudo.push_back(0);
    pseudo.push_back(6);  // TCP
    put_u16be(pseudo, static_cast<std::uint16_t>(tcp_len));
    pseudo.insert(pseudo.end(), tcp, tcp + tcp_len);
    return internet_checksum(pseudo);
}

}  // namespace

std::string mac_to_string(const Mac& mac) {
    char buf[18];
    std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2],
                  mac[3], mac[4], mac[5]);
    return buf;
}

std::string ipv4_to_string(Ipv4 ip) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (ip >> 24) & 0xFF, (ip >> 16) & 0xFF,
                  (ip >> 8) & 0xFF, ip & 0xFF);
    return buf;
}

Ipv4 ipv4_from_octets(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    return (static_cast<Ipv4>(a) << 24) | (static_cast<Ipv4>(b) << 16) |
           (static_cast<Ipv4>(c) << 8) | static_cast<Ipv4>(d);
}

std::uint16_t internet_checksum(const std::uint8_t* data, std::size_t size) {
    std::uint32_t sum = 0;
    std::size_t i = 0;
    for (; i + 1 < size; i += 2) sum += static_cast<std::uint32_t>((data[i] << 8) | data[i + 1]);
    if (i < size) sum += static_cast<std::uint32_t>(data[i] << 8);
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum & 0xFFFF);
}

std::uint16_t internet_checksum(const std::vector<std::uint8_t>& data) {
    return internet_checksum(data.data(), data.size());
}

std::vector<std::uint8_t> build_frame(const EthernetFrame& frame) {
    std::vector<std::uint8_t> out;
    out.reserve(64);
    out.insert(out.end(), frame.dst.begin(), frame.dst.end());
    out.insert(out.end(), frame.src.begin(), frame.src.end());
    put_u16be(out, frame.ethertype);

    if (frame.ethertype == kEtherTypeArp) {
        const ArpPacket& arp = *frame.arp;
        put_u16be(out, 0x0001);  // ethernet
        put_u16be(out, 0x0800);  // ipv4
        out.push_back(6);
        out.push_back(4);
        put_u16be(out, arp.oper);
        out.insert(out.end(), arp.sender_mac.begin(), arp.sender_mac.end());
        put_u32be(out, arp.sender_ip);
        out.insert(out.end(), arp.target_mac.begin(), arp.target_mac.end());
        put_u32be(out, arp.target_ip);
        return out;
    }

    const Ipv4Packet& ip = *frame.ip;
    const std::size_t ip_off = out.size();
    const std::uint16_t tcp_len = static_cast<std::uint16_t>(20 + ip.tcp.payload.size());
    const std::uint16_t total_len = static_cast<std::uint16_t>(20 + tcp_len);

    out.push_back(0x45);
    out.push_back(0x00);
    put_u16be(out, total_len);
    put_u16be(out, ip.identification);
    put_u16be(out, 0x4000);  // DF
    out.push_back(ip.ttl);
    out.push_back(ip.protocol);
    put_u16be(out, 0);  // checksum placeholder
    put_u32be(out, ip.src);
    put_u32be(out, ip.dst);
    const std::uint16_t ip_csum = internet_checksum(out.data() + ip_off, 20);
    set_u16be(out.data() + ip_off + 10, ip_csum);

    const std::size_t tcp_off = out.size();
    put_u16be(out, ip.tcp.sport);
    put_u16be(out, ip.tcp.dport);
    put_u32be(out, ip.tcp.seq);
    put_u32be(out, ip.tcp.ack);
    out.push_back(0x50);  // data offset 5 words
    out.push_back(ip.tcp.flags);
    put_u16be(out, ip.tcp.window);
    put_u16be(out, 0);  // checksum placeholder
    put_u16be(out, 0);  // urgent
    out.insert(out.end(), ip.tcp.payload.begin(), ip.tcp.payload.end());
    const std::uint16_t tcp_csum = tcp_checksum_for(ip.src, ip.dst, out.data() + tcp_off, tcp_len);
    set_u16be(out.data() + tcp_off + 16, tcp_csum);
    return out;
}

ParsedFrame parse_frame(const std::vector<std::uint8_t>& bytes) {
    ParsedFrame res;
    if (bytes.size() < 14) return res;
    EthernetFrame& f = res.frame;
    std::memcpy(f.dst.data(), bytes.data(), 6);
    std::memcpy(f.src.data(), bytes.data() + 6, 6);
    f.ethertype = get_u16be(bytes.data() + 12);

    if (f.ethertype == kEtherTypeArp) {
        if (bytes.size() < 14 + 28) return res;
        const std::uint8_t* p = bytes.data() + 14;
        ArpPacket arp;
        arp.oper = get_u16be(p + 6);
        std::memcpy(arp.sender_mac.data(), p + 8, 6);
        arp.sender_ip = get_u32be(p + 14);
        std::memcpy(arp.target_mac.data(), p + 18, 6);
        arp.target_ip = get_u32be(p + 24);
        f.arp = arp;
        res.ok = true;
        return res;
    }
    if (f.ethertype != kEtherTypeIpv4) return res;
    if (bytes.size() < 14 + 20) return res;
    const std::uint8_t* iph = bytes.data() + 14;
    if ((iph[0] >> 4) != 4 || (iph[0] & 0x0F) != 5) return res;
    Ipv4Packet ip;
    ip.total_length = get_u16be(iph + 2);
    ip.identification = get_u16be(iph + 4);
    ip.ttl = iph[8];
    ip.protocol = iph[9];
    ip.header_checksum = get_u16be(iph + 10);
    ip.src = get_u32be(iph + 12);
    ip.dst = get_u32be(iph + 16);
    if (ip.protocol != 6) return res;
    if (bytes.size() < 14u + ip.total_length || ip.total_length < 40) return res;
    const std::uint8_t* tcph = iph + 20;
    TcpSegment tcp;
    tcp.sport = get_u16be(tcph);
    tcp.dport = get_u16be(tcph + 2);
    tcp.seq = get_u32be(tcph + 4);
    tcp.ack = get_u32be(tcph + 8);
    tcp.flags = tcph[13];
    tcp.window = get_u16be(tcph + 14);
    tcp.checksum = get_u16be(tcph + 16);
    const std::size_t payload_len = ip.total_length - 40u;
    tcp.payload.assign(tcph + 20, tcph + 20 + payload_len);
    ip.tcp = std::move(tcp);
    f.ip = std::move(ip);
    res.ok = true;
    return res;
}

bool verify_checksums(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 14 + 40) return false;
    if (get_u16be(bytes.data() + 12) != kEtherTypeIpv4) return false;
    const std::uint8_t* iph = bytes.data() + 14;
    std::vector<std::uint8_t> header(iph, iph + 20);
    set_u16be(header.data() + 10, 0);
    if (internet_checksum(header) != get_u16be(iph + 10)) return false;

    const std::uint16_t total_len = get_u16be(iph + 2);
    if (bytes.size() < 14u + total_len || total_len < 40) return false;
    const std::size_t tcp_len = total_len - 20u;
    std::vector<std::uint8_t> tcp(iph + 20, iph + 20 + tcp_len);
    const std::uint16_t stored = get_u16be(tcp.data() + 16);
    set_u16be(tcp.data() + 16, 0);
    return tcp_checksum_for(get_u32be(iph + 12), get_u32be(iph + 16), tcp.data(), tcp.size()) ==
           stored;
}

}  // namespace gridwatch::wire
