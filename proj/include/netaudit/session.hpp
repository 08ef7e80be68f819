#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "netaudit/common.hpp"
#include "netaudit/packet.hpp"

namespace netaudit {

enum class Transport : std::uint8_t { TCP, UDP };

struct Endpoint {
  std::uint32_t ip = 0;
  std::uint16_t port = 0;
  auto operator<=>(const Endpoint&) const = default;
};

// Canonical bidirectional 5-tuple: endpoint_a <= endpoint_b so both directions
// of a connection map to the same key.
struct FlowKey {
  Endpoint endpoint_a;
  Endpoint endpoint_b;
  Transport transport = Transport::TCP;

  static FlowKey canonical(Endpoint src, Endpoint dst, Transport t) {
    FlowKey k;
    k.transport = t;
    if (dst < src) std::swap(src, dst);
    k.endpoint_a = src;
    k.endpoint_b = dst;
    return k;
  }
  auto operator<=>(const FlowKey&) const = default;
};

enum class Direction : std::uint8_t { Forward, Reverse };

// One dissected packet as field-name → raw string value. Absent keys mean the
// field did not occur in the packet.
struct PacketRecord {
  std::uint64_t capture_index = 0;
  double timestamp = 0.0;
  std::map<std::string, std::string> fields;
  FlowKey flow_key;
  Direction direction = Direction::Forward;
  bool has_flow_key = false;
};

namespace detail {

inline bool parse_ipv4_string(const std::string& s, std::uint32_t& out) {
  std::uint32_t acc = 0;
  int octets = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!isdigit(static_cast<unsigned char>(s[i]))) return false;
    std::uint32_t oct = 0;
    std::size_t start = i;
    while (i < s.size() && isdigit(static_cast<unsigned char>(s[i]))) {
      oct = oct * 10 + std::uint32_t(s[i] - '0');
      if (oct > 255 || i - start >= 3) return false;
      ++i;
    }
    acc = (acc << 8) | oct;
    ++octets;
    if (i < s.size()) {
      if (s[i] != '.') return false;
      ++i;
    }
  }
  if (octets != 4) return false;
  out = acc;
  return true;
}

// Attaches a canonical flow key from ip.src/ip.dst + ports, when all present.
inline void attach_flow_key(PacketRecord& rec) {
  auto get = [&](const char* k) -> const std::string* {
    auto it = rec.fields.find(k);
    return it == rec.fields.end() ? nullptr : &it->second;
  };
  const std::string* src = get("ip.src");
  const std::string* dst = get("ip.dst");
  if (!src || !dst) return;
  std::uint32_t sip, dip;
  if (!parse_ipv4_string(*src, sip) || !parse_ipv4_string(*dst, dip)) return;
  Transport t;
  const std::string *sp, *dp;
  if ((sp = get("tcp.srcport")) && (dp = get("tcp.dstport"))) {
    t = Transport::TCP;
  } else if ((sp = get("udp.srcport")) && (dp = get("udp.dstport"))) {
    t = Transport::UDP;
  } else {
    return;
  }
  Endpoint s{sip, static_cast<std::uint16_t>(std::stoul(*sp))};
  Endpoint d{dip, static_cast<std::uint16_t>(std::stoul(*dp))};
  rec.flow_key = FlowKey::canonical(s, d, t);
  rec.direction = (d < s) ? Direction::Reverse : Direction::Forward;
  rec.has_flow_key = true;
}

}  // namespace detail

struct SessionPacket {
  std::uint64_t capture_index = 0;
  double timestamp = 0.0;
  Direction direction = Direction::Forward;
  ParsedPacket parsed;
};

struct Session {
  FlowKey flow_key;
  std::vector<SessionPacket> packets;  // timestamp-ordered
  std::string label;
  std::string dataset_tag;
};

inline FlowKey flow_key_of(const ParsedPacket& p, bool* forward_is_src_a = nullptr) {
  Endpoint src{static_cast<std::uint32_t>(p.parsed_values.at("ip.src")), 0};
  Endpoint dst{static_cast<std::uint32_t>(p.parsed_values.at("ip.dst")), 0};
  Transport t = p.is_tcp() ? Transport::TCP : Transport::UDP;
  const char* sp = p.is_tcp() ? "tcp.srcport" : "udp.srcport";
  const char* dp = p.is_tcp() ? "tcp.dstport" : "udp.dstport";
  src.port = static_cast<std::uint16_t>(p.parsed_values.at(sp));
  dst.port = static_cast<std::uint16_t>(p.parsed_values.at(dp));
  if (forward_is_src_a) *forward_is_src_a = !(dst < src);
  return FlowKey::canonical(src, dst, t);
}

struct AssembleStats {
  std::size_t unlabeled_flows = 0;
};

// Labeling rule: maps a flow key (or anything about the packet stream) to a
// class label; empty string excludes the flow.
using LabelingRule = std::function<std::string(const FlowKey&)>;

// Groups parsed packets into bidirectional sessions. Direction is forward for
// packets matching the first-seen orientation of each flow.
inline std::vector<Session> assemble_sessions(
    std::vector<std::pair<std::uint64_t, ParsedPacket>> packets,  // (capture_index, pkt)
    const std::vector<double>& timestamps, const LabelingRule& label_of,
    const std::string& dataset_tag, AssembleStats* stats = nullptr) {
  std::map<FlowKey, Session> by_key;
  std::map<FlowKey, Endpoint> first_src;
  for (std::size_t i = 0; i < packets.size(); ++i) {
    auto& [idx, pkt] = packets[i];
    FlowKey key = flow_key_of(pkt);
    Endpoint src{static_cast<std::uint32_t>(pkt.parsed_values.at("ip.src")),
                 static_cast<std::uint16_t>(pkt.parsed_values.at(
                     pkt.is_tcp() ? "tcp.srcport" : "udp.srcport"))};
    auto [it, fresh] = by_key.try_emplace(key);
    if (fresh) {
      it->second.flow_key = key;
      it->second.dataset_tag = dataset_tag;
      first_src[key] = src;
    }
    SessionPacket sp;
    sp.capture_index = idx;
    sp.timestamp = i < timestamps.size() ? timestamps[i] : 0.0;
    sp.direction = (src == first_src[key]) ? Direction::Forward : Direction::Reverse;
    sp.parsed = std::move(pkt);
    it->second.packets.push_back(std::move(sp));
  }
  std::vector<Session> out;
  out.reserve(by_key.size());
  for (auto& [key, sess] : by_key) {
    std::string label = label_of(key);
    if (label.empty()) {
      if (stats) ++stats->unlabeled_flows;
      continue;
    }
    sess.label = label;
    std::stable_sort(sess.packets.begin(), sess.packets.end(),
                     [](const SessionPacket& a, const SessionPacket& b) {
                       return std::tie(a.timestamp, a.capture_index) <
                              std::tie(b.timestamp, b.capture_index);
                     });
    out.push_back(std::move(sess));
  }
  return out;
}

}  // namespace netaudit
