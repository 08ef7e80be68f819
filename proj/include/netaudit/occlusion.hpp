#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "netaudit/common.hpp"
#include "netaudit/packet.hpp"
#include "netaudit/session.hpp"
#include "netaudit/taxonomy.hpp"

namespace netaudit {

constexpr std::size_t kTensorPackets = 5;
constexpr std::size_t kHeaderBytes = 80;
constexpr std::size_t kPayloadBytes = 240;
constexpr std::size_t kRowBytes = kHeaderBytes + kPayloadBytes;  // 320

// Backing packet kept alongside the rendered rows so occlusion can edit
// fields byte-exactly and recompute checksums over the full payload.
struct TensorPacket {
  Bytes header;   // full IP+transport header
  Bytes payload;  // full transport payload
  std::map<std::string, FieldSpan> field_offsets;  // within header
  bool has_sni = false;
  FieldSpan sni_payload_span;  // within payload
  bool transport_checksum_zeroed = false;
};

// Fixed 5×320 session representation: per packet 80 header bytes (from the IP
// header) then 240 payload bytes, zero-padded.
struct SessionTensor {
  std::array<std::array<std::uint8_t, kRowBytes>, kTensorPackets> rows{};
  std::vector<TensorPacket> packets;  // ≤ 5, row i backed by packets[i]
  std::string label;
  std::string dataset_tag;
  std::uint64_t session_id = 0;

  void render_rows() {
    for (auto& row : rows) row.fill(0);
    for (std::size_t i = 0; i < packets.size() && i < kTensorPackets; ++i) {
      const auto& p = packets[i];
      std::size_t h = std::min(p.header.size(), kHeaderBytes);
      std::memcpy(rows[i].data(), p.header.data(), h);
      std::size_t pl = std::min(p.payload.size(), kPayloadBytes);
      if (pl) std::memcpy(rows[i].data() + kHeaderBytes, p.payload.data(), pl);
    }
  }

  std::vector<std::uint8_t> flat() const {
    std::vector<std::uint8_t> out;
    out.reserve(kTensorPackets * kRowBytes);
    for (const auto& row : rows) out.insert(out.end(), row.begin(), row.end());
    return out;
  }
};

inline SessionTensor build_session_tensor(const Session& session,
                                          std::uint64_t session_id = 0) {
  if (session.packets.empty())
    throw std::domain_error("cannot build tensor from empty session");
  SessionTensor t;
  t.label = session.label;
  t.dataset_tag = session.dataset_tag;
  t.session_id = session_id;
  for (std::size_t i = 0; i < session.packets.size() && i < kTensorPackets; ++i) {
    const ParsedPacket& p = session.packets[i].parsed;
    TensorPacket tp;
    tp.header = p.header_bytes;
    tp.payload = p.payload_bytes;
    tp.field_offsets = p.field_offsets;
    if (p.sni) {
      tp.has_sni = true;
      tp.sni_payload_span = p.sni_payload_span;
    }
    t.packets.push_back(std::move(tp));
  }
  t.render_rows();
  return t;
}

enum class OcclusionStrategy { Zero, Relative, Random };

struct OcclusionSpec {
  OcclusionStrategy strategy = OcclusionStrategy::Zero;
  std::vector<std::string> targets;
  std::uint64_t seed = 0;
};

inline const char* strategy_name(OcclusionStrategy s) {
  switch (s) {
    case OcclusionStrategy::Zero: return "zero";
    case OcclusionStrategy::Relative: return "relative";
    case OcclusionStrategy::Random: return "random";
  }
  return "zero";
}

// Field universe the occlusion engine can locate byte-exactly.
inline const std::set<std::string>& occludable_fields() {
  static const std::set<std::string> fields = {
      "ip.src", "ip.dst", "ip.ttl", "ip.checksum", "ip.id", "ip.len",
      "tcp.srcport", "tcp.dstport", "tcp.seq_raw", "tcp.ack_raw",
      "tcp.window_size", "tcp.checksum", "tcp.flags",
      "tcp.options.timestamp.tsval", "tcp.options.timestamp.tsecr",
      "udp.srcport", "udp.dstport", "udp.length", "udp.checksum",
      "tls.handshake.extensions_server_name",
  };
  return fields;
}

inline bool is_sii_field(const std::string& f) {
  return f == "ip.src" || f == "ip.dst" || f == "tcp.srcport" ||
         f == "tcp.dstport" || f == "udp.srcport" || f == "udp.dstport";
}

inline bool is_checksum_field(const std::string& f) {
  return f.find("checksum") != std::string::npos;
}

namespace detail {

inline std::uint64_t read_field(const Bytes& header, const FieldSpan& span) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < span.length; ++i) v = (v << 8) | header[span.offset + i];
  return v;
}

inline void write_field(Bytes& header, const FieldSpan& span, std::uint64_t v) {
  for (std::size_t i = span.length; i-- > 0;) {
    header[span.offset + i] = std::uint8_t(v & 0xff);
    v >>= 8;
  }
}

inline std::uint64_t field_mask(std::size_t length) {
  return length >= 8 ? ~0ULL : ((1ULL << (8 * length)) - 1);
}

}  // namespace detail

struct OcclusionResult {
  SessionTensor tensor;
  std::vector<std::string> absent_targets;  // warned, no-op
};

// Applies one occlusion strategy byte-exactly; checksums are recomputed for
// packets whose covered bytes changed, and explicitly targeted checksum
// fields keep their occluded value.
inline OcclusionResult apply_occlusion(const SessionTensor& input,
                                       const OcclusionSpec& spec) {
  for (const auto& t : spec.targets)
    if (!occludable_fields().count(t))
      throw ConfigError("unknown occlusion target: " + t);

  OcclusionResult res;
  res.tensor = input;
  SessionTensor& t = res.tensor;
  std::mt19937_64 rng(derive_seed(spec.seed, t.session_id));

  // per-target presence and per-packet edits
  std::set<std::string> seen;
  for (const auto& p : t.packets) {
    for (const auto& [name, span] : p.field_offsets)
      if (p.field_offsets.count(name)) seen.insert(name);
    if (p.has_sni) seen.insert("tls.handshake.extensions_server_name");
  }
  for (const auto& target : spec.targets)
    if (!seen.count(target)) res.absent_targets.push_back(target);

  std::vector<bool> noncksum_edited(t.packets.size(), false);
  auto edit = [&](std::size_t pi, const std::string& field) {
    if (!is_checksum_field(field)) noncksum_edited[pi] = true;
  };

  // consistent endpoint substitution map for random SII masking
  std::map<std::uint64_t, std::uint64_t> ip_subst, port_subst;
  auto subst_of = [&](std::map<std::uint64_t, std::uint64_t>& table,
                      std::uint64_t original, std::size_t width) {
    auto it = table.find(original);
    if (it != table.end()) return it->second;
    std::uint64_t v = rng() & detail::field_mask(width);
    table.emplace(original, v);
    return v;
  };

  for (const auto& target : spec.targets) {
    bool sni_target = target == "tls.handshake.extensions_server_name";
    switch (spec.strategy) {
      case OcclusionStrategy::Zero: {
        for (std::size_t pi = 0; pi < t.packets.size(); ++pi) {
          auto& p = t.packets[pi];
          if (sni_target) {
            if (!p.has_sni) continue;
            // zero the hostname bytes only; lengths stay intact
            for (std::size_t i = 0; i < p.sni_payload_span.length; ++i)
              p.payload[p.sni_payload_span.offset + i] = 0;
            edit(pi, target);
          } else if (auto it = p.field_offsets.find(target);
                     it != p.field_offsets.end()) {
            detail::write_field(p.header, it->second, 0);
            edit(pi, target);
          }
        }
        break;
      }
      case OcclusionStrategy::Relative: {
        if (sni_target)
          throw ConfigError("relative transformation needs a numeric field");
        bool have_prev = false;
        std::uint64_t prev = 0;
        for (std::size_t pi = 0; pi < t.packets.size(); ++pi) {
          auto& p = t.packets[pi];
          auto it = p.field_offsets.find(target);
          if (it == p.field_offsets.end()) continue;
          std::uint64_t v = detail::read_field(p.header, it->second);
          std::uint64_t mask = detail::field_mask(it->second.length);
          // first packet 0, then wrap-around difference in field width
          std::uint64_t stored = have_prev ? ((v - prev) & mask) : 0;
          detail::write_field(p.header, it->second, stored);
          prev = v;
          have_prev = true;
          edit(pi, target);
        }
        break;
      }
      case OcclusionStrategy::Random: {
        if (sni_target) {
          for (std::size_t pi = 0; pi < t.packets.size(); ++pi) {
            auto& p = t.packets[pi];
            if (!p.has_sni) continue;
            for (std::size_t i = 0; i < p.sni_payload_span.length; ++i)
              p.payload[p.sni_payload_span.offset + i] =
                  std::uint8_t('a' + rng() % 26);
            edit(pi, target);
          }
          break;
        }
        bool sii = is_sii_field(target);
        bool relative_artifact =
            rule_category(target) == Category::RelativeArtifact;
        if (sii) {
          bool is_ip = target == "ip.src" || target == "ip.dst";
          for (std::size_t pi = 0; pi < t.packets.size(); ++pi) {
            auto& p = t.packets[pi];
            auto it = p.field_offsets.find(target);
            if (it == p.field_offsets.end()) continue;
            std::uint64_t v = detail::read_field(p.header, it->second);
            std::uint64_t sub = subst_of(is_ip ? ip_subst : port_subst, v,
                                         it->second.length);
            detail::write_field(p.header, it->second, sub);
            edit(pi, target);
          }
        } else if (relative_artifact) {
          bool have_first = false;
          std::uint64_t first = 0, base = 0, mask = 0;
          for (std::size_t pi = 0; pi < t.packets.size(); ++pi) {
            auto& p = t.packets[pi];
            auto it = p.field_offsets.find(target);
            if (it == p.field_offsets.end()) continue;
            std::uint64_t v = detail::read_field(p.header, it->second);
            if (!have_first) {
              first = v;
              mask = detail::field_mask(it->second.length);
              base = rng() & mask;
              have_first = true;
            }
            // random base + original cumulative diff
            detail::write_field(p.header, it->second, (base + (v - first)) & mask);
            edit(pi, target);
          }
        } else {
          for (std::size_t pi = 0; pi < t.packets.size(); ++pi) {
            auto& p = t.packets[pi];
            auto it = p.field_offsets.find(target);
            if (it == p.field_offsets.end()) continue;
            detail::write_field(p.header, it->second,
                                rng() & detail::field_mask(it->second.length));
            edit(pi, target);
          }
        }
        break;
      }
    }
  }

  // recompute checksums for edited packets, then restore explicitly occluded
  // checksum fields to their occluded value
  std::set<std::string> cksum_targets;
  for (const auto& target : spec.targets)
    if (is_checksum_field(target)) cksum_targets.insert(target);
  for (std::size_t pi = 0; pi < t.packets.size(); ++pi) {
    if (!noncksum_edited[pi]) continue;
    auto& p = t.packets[pi];
    std::map<std::string, std::uint64_t> keep;
    for (const auto& ct : cksum_targets)
      if (auto it = p.field_offsets.find(ct); it != p.field_offsets.end())
        keep[ct] = detail::read_field(p.header, it->second);
    ChecksumResult cr = recompute_checksums(p.header, p.payload);
    p.transport_checksum_zeroed = cr.transport_zeroed;
    for (const auto& [ct, v] : keep)
      detail::write_field(p.header, p.field_offsets.at(ct), v);
  }

  t.render_rows();
  return res;
}

// Flat binary container: magic, version, N, then per session label code and
// 5×320 row bytes. Label names travel in a JSON index next to it.
inline void write_tensor_file(const std::vector<SessionTensor>& tensors,
                              const std::vector<int>& label_codes,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path);
  const char magic[4] = {'N', 'A', 'S', 'T'};
  out.write(magic, 4);
  std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  std::uint64_t n = tensors.size();
  out.write(reinterpret_cast<const char*>(&n), 8);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    std::int32_t code = label_codes[i];
    out.write(reinterpret_cast<const char*>(&code), 4);
    for (const auto& row : tensors[i].rows)
      out.write(reinterpret_cast<const char*>(row.data()), kRowBytes);
  }
}

}  // namespace netaudit
