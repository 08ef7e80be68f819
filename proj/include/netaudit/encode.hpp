#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "netaudit/common.hpp"
#include "netaudit/session.hpp"

namespace netaudit {

enum class FieldKind {
  Ipv4Address,
  HexOrInt,
  FloatTemporal,
  DomainName,
  OpaqueCategorical,
};

struct FieldSchema {
  std::string name;
  FieldKind kind = FieldKind::HexOrInt;
};

// Sentinel never interpreted as a value: validity is a separate channel.
struct EncodedValue {
  double value = 0.0;
  bool valid = false;
};

// Second-level-domain → dense index, first-seen order.
class DomainDict {
 public:
  // Last two labels of the dotted name; names with fewer labels map verbatim.
  static std::string second_level(const std::string& domain) {
    std::size_t last = domain.rfind('.');
    if (last == std::string::npos || last == 0) return domain;
    std::size_t prev = domain.rfind('.', last - 1);
    return prev == std::string::npos ? domain : domain.substr(prev + 1);
  }

  std::int64_t lookup_or_insert(const std::string& domain) {
    std::string sld = second_level(domain);
    auto [it, fresh] = index_.try_emplace(sld, ordered_.size());
    if (fresh) ordered_.push_back(sld);
    return static_cast<std::int64_t>(it->second);
  }

  std::size_t size() const { return ordered_.size(); }
  const std::vector<std::string>& entries() const { return ordered_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> ordered_;
};

inline DomainDict build_domain_dictionary(const std::vector<std::string>& values) {
  DomainDict dict;
  for (const auto& v : values) dict.lookup_or_insert(v);
  return dict;
}

namespace detail {

inline bool parse_int_chain(const std::string& s, double& out) {
  // 0x-prefix → decimal → bare hex, so "80" stays decimal 80.
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str() + 2, &end, 16);
    if (end && *end == '\0' && end != s.c_str() + 2) {
      out = static_cast<double>(v);
      return true;
    }
    return false;
  }
  {
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end && *end == '\0' && end != s.c_str()) {
      out = static_cast<double>(v);
      return true;
    }
  }
  {
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 16);
    if (end && *end == '\0' && end != s.c_str()) {
      out = static_cast<double>(v);
      return true;
    }
  }
  return false;
}

}  // namespace detail

inline EncodedValue encode_field(const std::string& raw, const FieldSchema& schema,
                                 DomainDict& dict) {
  if (raw.empty()) return {};
  switch (schema.kind) {
    case FieldKind::Ipv4Address: {
      std::uint32_t ip;
      if (!netaudit::detail::parse_ipv4_string(raw, ip)) return {};
      return {static_cast<double>(ip), true};
    }
    case FieldKind::HexOrInt: {
      double v;
      if (!detail::parse_int_chain(raw, v)) return {};
      return {v, true};
    }
    case FieldKind::FloatTemporal: {
      char* end = nullptr;
      double v = std::strtod(raw.c_str(), &end);
      if (!end || *end != '\0' || end == raw.c_str() || !std::isfinite(v)) return {};
      return {v, true};
    }
    case FieldKind::DomainName:
      return {static_cast<double>(dict.lookup_or_insert(raw)), true};
    case FieldKind::OpaqueCategorical: {
      // stable 64-bit hash folded to 53 bits so the double is exact
      std::uint64_t h = 1469598103934665603ULL;
      for (unsigned char c : raw) h = (h ^ c) * 1099511628211ULL;
      return {static_cast<double>(h >> 11), true};
    }
  }
  return {};
}

inline FieldKind infer_field_kind(const std::string& name) {
  if (name == "ip.src" || name == "ip.dst") return FieldKind::Ipv4Address;
  if (name.find("time") != std::string::npos && name.find("timestamp") == std::string::npos)
    return FieldKind::FloatTemporal;
  if (name.find("server_name") != std::string::npos || name == "tls.sni")
    return FieldKind::DomainName;
  return FieldKind::HexOrInt;
}

// N×d integer-encoded table, per-packet granularity, with validity mask.
struct FeatureMatrix {
  std::vector<std::string> field_names;           // d columns
  std::vector<std::vector<EncodedValue>> cells;   // N rows × d
  std::vector<int> labels;                        // class codes, |labels| = N
  std::vector<std::string> label_names;           // code → name
  std::vector<std::string> dataset_tags;          // per row
  std::vector<std::size_t> session_index;         // per row: owning session

  std::size_t rows() const { return cells.size(); }
  std::size_t cols() const { return field_names.size(); }

  std::size_t column_of(const std::string& name) const {
    auto it = std::find(field_names.begin(), field_names.end(), name);
    if (it == field_names.end())
      throw ConfigError("field not in matrix: " + name);
    return static_cast<std::size_t>(it - field_names.begin());
  }
  bool has_column(const std::string& name) const {
    return std::find(field_names.begin(), field_names.end(), name) !=
           field_names.end();
  }
};

struct QualityReport {
  std::size_t dropped_low_valid = 0;
  std::size_t dropped_bad_ip = 0;
  std::size_t kept = 0;
};

// Drops packets with < 5% valid fields over the schema universe, and packets
// whose ip.src/ip.dst fail IPv4 encoding. Exactly 5% is kept.
inline std::vector<PacketRecord> filter_low_quality(
    std::vector<PacketRecord> records, const std::vector<FieldSchema>& schemas,
    QualityReport* report = nullptr) {
  QualityReport local;
  std::vector<PacketRecord> out;
  DomainDict scratch;
  for (auto& rec : records) {
    bool bad_ip = false;
    for (const char* key : {"ip.src", "ip.dst"}) {
      auto it = rec.fields.find(key);
      if (it != rec.fields.end()) {
        std::uint32_t ip;
        if (!detail::parse_ipv4_string(it->second, ip)) bad_ip = true;
      }
    }
    if (bad_ip) {
      ++local.dropped_bad_ip;
      continue;
    }
    std::size_t valid = 0;
    for (const auto& s : schemas)
      if (auto it = rec.fields.find(s.name); it != rec.fields.end())
        if (encode_field(it->second, s, scratch).valid) ++valid;
    double fraction = schemas.empty() ? 1.0
                                      : double(valid) / double(schemas.size());
    if (fraction < 0.05) {
      ++local.dropped_low_valid;
      continue;
    }
    out.push_back(std::move(rec));
  }
  local.kept = out.size();
  if (report) *report = local;
  return out;
}

// Builds the per-packet matrix: rows = packets owned by a session, columns =
// union of observed field names, labels propagated from the owning session.
inline FeatureMatrix build_feature_matrix(
    const std::vector<Session>& sessions,
    const std::vector<std::vector<PacketRecord>>& session_records,  // parallel to sessions
    std::vector<FieldSchema>& schemas, DomainDict& dict) {
  FeatureMatrix m;
  std::map<std::string, std::size_t> col_of;
  std::map<std::string, FieldKind> kind_of;
  for (const auto& s : schemas) kind_of[s.name] = s.kind;
  for (const auto& recs : session_records)
    for (const auto& rec : recs)
      for (const auto& [name, value] : rec.fields)
        if (!col_of.count(name)) {
          col_of[name] = m.field_names.size();
          m.field_names.push_back(name);
          if (!kind_of.count(name)) {
            kind_of[name] = infer_field_kind(name);
            schemas.push_back({name, kind_of[name]});
          }
        }

  std::map<std::string, int> label_code;
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const Session& sess = sessions[si];
    auto [it, fresh] = label_code.try_emplace(sess.label,
                                              static_cast<int>(m.label_names.size()));
    if (fresh) m.label_names.push_back(sess.label);
    int code = it->second;
    for (const auto& rec : session_records[si]) {
      std::vector<EncodedValue> row(m.field_names.size());
      for (const auto& [name, value] : rec.fields) {
        FieldSchema schema{name, kind_of[name]};
        row[col_of[name]] = encode_field(value, schema, dict);
      }
      m.cells.push_back(std::move(row));
      m.labels.push_back(code);
      m.dataset_tags.push_back(sess.dataset_tag);
      m.session_index.push_back(si);
    }
  }
  return m;
}

// Field records for one parsed packet, in the raw-string form the dissector
// path produces, so both ingestion routes share downstream semantics.
inline PacketRecord record_from_parsed(const ParsedPacket& p, double timestamp,
                                       std::uint64_t capture_index) {
  PacketRecord rec;
  rec.timestamp = timestamp;
  rec.capture_index = capture_index;
  for (const auto& [name, value] : p.parsed_values) {
    if (name == "ip.src" || name == "ip.dst") {
      std::uint32_t ip = static_cast<std::uint32_t>(value);
      rec.fields[name] = std::to_string(ip >> 24) + "." +
                         std::to_string((ip >> 16) & 0xff) + "." +
                         std::to_string((ip >> 8) & 0xff) + "." +
                         std::to_string(ip & 0xff);
    } else {
      rec.fields[name] = std::to_string(value);
    }
  }
  if (p.sni) rec.fields["tls.handshake.extensions_server_name"] = *p.sni;
  netaudit::detail::attach_flow_key(rec);
  return rec;
}

}  // namespace netaudit
