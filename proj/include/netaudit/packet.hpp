#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "netaudit/common.hpp"

namespace netaudit {

enum class LinkType : std::uint32_t {
  Ethernet = 1,   // pcap LINKTYPE_ETHERNET
  RawIPv4 = 101,  // pcap LINKTYPE_RAW
};

struct FieldSpan {
  std::size_t offset = 0;  // within header_bytes
  std::size_t length = 0;
};

// One packet dissected by the built-in parser. header_bytes start at the IP
// header (link layer stripped); offsets are byte-exact so occlusion can edit
// fields in place.
struct ParsedPacket {
  LinkType link_type = LinkType::Ethernet;
  Bytes header_bytes;   // IP header (incl. options) + transport header (incl. options)
  Bytes payload_bytes;  // transport payload
  std::map<std::string, FieldSpan> field_offsets;
  std::map<std::string, std::uint64_t> parsed_values;
  // SNI hostname, when the payload is a TLS ClientHello carrying one.
  std::optional<std::string> sni;
  FieldSpan sni_payload_span;  // within payload_bytes, valid iff sni is set

  bool is_tcp() const { return parsed_values.count("tcp.srcport") != 0; }
  bool is_udp() const { return parsed_values.count("udp.srcport") != 0; }
};

namespace detail {

inline std::uint16_t be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}
inline std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}
inline void put_be16(std::uint8_t* p, std::uint16_t v) {
  p[0] = std::uint8_t(v >> 8);
  p[1] = std::uint8_t(v & 0xff);
}
inline void put_be32(std::uint8_t* p, std::uint32_t v) {
  p[0] = std::uint8_t(v >> 24);
  p[1] = std::uint8_t(v >> 16);
  p[2] = std::uint8_t(v >> 8);
  p[3] = std::uint8_t(v & 0xff);
}

// RFC 1071 ones-complement 16-bit sum.
inline std::uint16_t ones_complement_sum(const std::uint8_t* data, std::size_t len,
                                         std::uint32_t initial = 0) {
  std::uint32_t sum = initial;
  std::size_t i = 0;
  for (; i + 1 < len; i += 2) sum += be16(data + i);
  if (i < len) sum += std::uint32_t(data[i]) << 8;
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(sum);
}

inline std::uint16_t internet_checksum(const std::uint8_t* data, std::size_t len,
                                       std::uint32_t initial = 0) {
  return static_cast<std::uint16_t>(~ones_complement_sum(data, len, initial) & 0xffff);
}

// Scans the TLS ClientHello in `p` for the server_name extension; returns the
// span of the hostname bytes, or nullopt.
inline std::optional<std::pair<FieldSpan, std::string>> find_client_hello_sni(
    const Bytes& p) {
  // TLS record: type 0x16 (handshake), version, length; handshake type 1.
  if (p.size() < 9 || p[0] != 0x16 || p[5] != 0x01) return std::nullopt;
  std::size_t pos = 9;  // after record header (5) + handshake header (4)
  auto need = [&](std::size_t n) { return pos + n <= p.size(); };
  if (!need(2 + 32)) return std::nullopt;
  pos += 2 + 32;  // client_version + random
  if (!need(1)) return std::nullopt;
  pos += 1 + p[pos];  // session id
  if (!need(2)) return std::nullopt;
  std::size_t cs_len = be16(p.data() + pos);
  pos += 2 + cs_len;  // cipher suites
  if (!need(1)) return std::nullopt;
  pos += 1 + p[pos];  // compression methods
  if (!need(2)) return std::nullopt;
  std::size_t ext_total = be16(p.data() + pos);
  pos += 2;
  std::size_t ext_end = pos + ext_total;
  while (pos + 4 <= ext_end && pos + 4 <= p.size()) {
    std::uint16_t ext_type = be16(p.data() + pos);
    std::uint16_t ext_len = be16(p.data() + pos + 2);
    pos += 4;
    if (pos + ext_len > p.size()) return std::nullopt;
    if (ext_type == 0 && ext_len >= 5) {
      // server_name_list: u16 list len, u8 type (0=host_name), u16 name len
      const std::uint8_t* e = p.data() + pos;
      if (e[2] == 0) {
        std::uint16_t name_len = be16(e + 3);
        if (std::size_t(5) + name_len <= ext_len) {
          FieldSpan span{pos + 5, name_len};
          std::string name(reinterpret_cast<const char*>(e + 5), name_len);
          return std::make_pair(span, name);
        }
      }
      return std::nullopt;
    }
    pos += ext_len;
  }
  return std::nullopt;
}

}  // namespace detail

// Parses Ethernet/raw-IP + IPv4 + TCP/UDP and records byte offsets for the
// fields occlusion targets. Throws ParseError on truncated or non-IPv4 input.
inline ParsedPacket parse_packet_inline(const Bytes& raw_frame, LinkType link_type) {
  using namespace detail;
  std::size_t ip_off = 0;
  if (link_type == LinkType::Ethernet) {
    if (raw_frame.size() < 14)
      throw ParseError(ParseError::Kind::Truncated, "frame shorter than Ethernet header");
    std::uint16_t ethertype = be16(raw_frame.data() + 12);
    if (ethertype != 0x0800)
      throw ParseError(ParseError::Kind::Unsupported, "non-IPv4 ethertype");
    ip_off = 14;
  }
  if (raw_frame.size() < ip_off + 20)
    throw ParseError(ParseError::Kind::Truncated, "truncated IPv4 header");
  const std::uint8_t* ip = raw_frame.data() + ip_off;
  if ((ip[0] >> 4) != 4)
    throw ParseError(ParseError::Kind::Unsupported, "not IPv4");
  std::size_t ihl = (ip[0] & 0x0f) * 4u;
  if (ihl < 20 || raw_frame.size() < ip_off + ihl)
    throw ParseError(ParseError::Kind::Truncated, "bad IHL");
  std::uint16_t total_len = be16(ip + 2);
  std::size_t avail = raw_frame.size() - ip_off;
  std::size_t ip_pkt_len = std::min<std::size_t>(total_len, avail);
  if (ip_pkt_len < ihl)
    throw ParseError(ParseError::Kind::Truncated, "total length below IHL");
  std::uint8_t proto = ip[9];

  ParsedPacket out;
  out.link_type = link_type;
  auto add = [&](const std::string& name, std::size_t off, std::size_t len,
                 std::uint64_t value) {
    out.field_offsets[name] = FieldSpan{off, len};
    out.parsed_values[name] = value;
  };
  add("ip.len", 2, 2, total_len);
  add("ip.id", 4, 2, be16(ip + 4));
  add("ip.ttl", 8, 1, ip[8]);
  out.parsed_values["ip.proto"] = proto;
  add("ip.checksum", 10, 2, be16(ip + 10));
  add("ip.src", 12, 4, be32(ip + 12));
  add("ip.dst", 16, 4, be32(ip + 16));

  std::size_t trans_off = ihl;
  std::size_t trans_len = 0;
  if (proto == 6) {
    if (ip_pkt_len < trans_off + 20)
      throw ParseError(ParseError::Kind::Truncated, "truncated TCP header");
    const std::uint8_t* tcp = ip + trans_off;
    std::size_t doff = (tcp[12] >> 4) * 4u;
    if (doff < 20 || ip_pkt_len < trans_off + doff)
      throw ParseError(ParseError::Kind::Truncated, "bad TCP data offset");
    add("tcp.srcport", trans_off + 0, 2, be16(tcp + 0));
    add("tcp.dstport", trans_off + 2, 2, be16(tcp + 2));
    add("tcp.seq_raw", trans_off + 4, 4, be32(tcp + 4));
    add("tcp.ack_raw", trans_off + 8, 4, be32(tcp + 8));
    out.parsed_values["tcp.hdr_len"] = doff;
    add("tcp.flags", trans_off + 13, 1, tcp[13]);
    add("tcp.window_size", trans_off + 14, 2, be16(tcp + 14));
    add("tcp.checksum", trans_off + 16, 2, be16(tcp + 16));
    // options scan for Timestamp (kind 8)
    std::size_t opt = 20;
    while (opt < doff) {
      std::uint8_t kind = tcp[opt];
      if (kind == 0) break;      // EOL
      if (kind == 1) { ++opt; continue; }  // NOP
      if (opt + 1 >= doff) break;
      std::uint8_t olen = tcp[opt + 1];
      if (olen < 2 || opt + olen > doff) break;
      if (kind == 8 && olen == 10) {
        add("tcp.options.timestamp.tsval", trans_off + opt + 2, 4, be32(tcp + opt + 2));
        add("tcp.options.timestamp.tsecr", trans_off + opt + 6, 4, be32(tcp + opt + 6));
      }
      opt += olen;
    }
    trans_len = doff;
    out.parsed_values["tcp.len"] = ip_pkt_len - trans_off - doff;
  } else if (proto == 17) {
    if (ip_pkt_len < trans_off + 8)
      throw ParseError(ParseError::Kind::Truncated, "truncated UDP header");
    const std::uint8_t* udp = ip + trans_off;
    add("udp.srcport", trans_off + 0, 2, be16(udp + 0));
    add("udp.dstport", trans_off + 2, 2, be16(udp + 2));
    add("udp.length", trans_off + 4, 2, be16(udp + 4));
    add("udp.checksum", trans_off + 6, 2, be16(udp + 6));
    trans_len = 8;
  } else {
    throw ParseError(ParseError::Kind::Unsupported, "transport protocol not TCP/UDP");
  }

  std::size_t hdr_total = trans_off + trans_len;
  out.header_bytes.assign(ip, ip + hdr_total);
  out.payload_bytes.assign(ip + hdr_total, ip + ip_pkt_len);

  if (auto sni = detail::find_client_hello_sni(out.payload_bytes)) {
    out.sni_payload_span = sni->first;
    out.sni = sni->second;
  }
  return out;
}

// IPv4 header length of a parsed header block.
inline std::size_t ip_header_len(const Bytes& header) {
  return (header.empty() ? 0 : (header[0] & 0x0f) * 4u);
}

struct ChecksumResult {
  bool transport_zeroed = false;  // payload truncated, transport checksum unset
};

// Recomputes the IPv4 header checksum and the TCP/UDP checksum (with
// pseudo-header) in place. When the payload was truncated (ip.len claims more
// bytes than are present) the transport checksum cannot be computed and is
// zeroed instead.
inline ChecksumResult recompute_checksums(Bytes& header, const Bytes& payload) {
  using namespace detail;
  ChecksumResult res;
  std::size_t ihl = ip_header_len(header);
  if (ihl < 20 || header.size() < ihl) return res;
  std::uint8_t* ip = header.data();
  put_be16(ip + 10, 0);
  put_be16(ip + 10, internet_checksum(ip, ihl));

  std::uint8_t proto = ip[9];
  std::size_t trans_len = header.size() - ihl;
  if (trans_len == 0) return res;
  std::uint8_t* trans = ip + ihl;
  std::uint16_t total_len = be16(ip + 2);
  std::size_t expect_payload =
      total_len >= ihl + trans_len ? total_len - ihl - trans_len : 0;
  std::size_t cksum_off;
  if (proto == 6 && trans_len >= 20) {
    cksum_off = 16;
  } else if (proto == 17 && trans_len >= 8) {
    cksum_off = 6;
  } else {
    return res;
  }
  if (expect_payload > payload.size()) {
    put_be16(trans + cksum_off, 0);
    res.transport_zeroed = true;
    return res;
  }
  std::uint8_t pseudo[12];
  std::copy(ip + 12, ip + 20, pseudo);
  pseudo[8] = 0;
  pseudo[9] = proto;
  put_be16(pseudo + 10, static_cast<std::uint16_t>(trans_len + expect_payload));
  put_be16(trans + cksum_off, 0);
  std::uint32_t sum = ones_complement_sum(pseudo, 12);
  sum = ones_complement_sum(trans, trans_len, sum);
  sum = ones_complement_sum(payload.data(), expect_payload, sum);
  std::uint16_t ck = static_cast<std::uint16_t>(~sum & 0xffff);
  if (proto == 17 && ck == 0) ck = 0xffff;  // RFC 768: zero means "no checksum"
  put_be16(trans + cksum_off, ck);
  return res;
}

}  // namespace netaudit
