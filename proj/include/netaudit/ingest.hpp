#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netaudit/common.hpp"
#include "netaudit/session.hpp"

namespace netaudit {

struct IngestStats {
  std::size_t records = 0;
  std::size_t skipped_lines = 0;  // unparseable output lines
};

namespace detail {

inline void flatten_json(const nlohmann::json& j, const std::string& prefix,
                         std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    // tshark JSON nests layers; leaf keys already carry dotted names
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten_json(it.value(), it.key(), out);
  } else if (j.is_array()) {
    if (!j.empty()) flatten_json(j.front(), prefix, out);
  } else if (j.is_string()) {
    if (!j.get<std::string>().empty()) out[prefix] = j.get<std::string>();
  } else if (!j.is_null()) {
    out[prefix] = j.dump();
  }
}

}  // namespace detail

// Runs an external tshark-style dissector and yields one PacketRecord per
// packet. With a non-empty field_list, uses tab-separated field export; an
// empty list means "all fields" via structured JSON output.
inline std::vector<PacketRecord> run_external_dissector(
    const std::string& capture_path, const std::vector<std::string>& field_list,
    const std::string& dissector_binary, IngestStats* stats = nullptr,
    const std::vector<std::string>& extra_args = {}) {
  namespace fs = std::filesystem;
  if (!fs::exists(capture_path))
    throw IngestError(IngestError::Kind::ToolUnavailable,
                      "capture not found: " + capture_path);
  std::string cmd = dissector_binary + " -r '" + capture_path + "'";
  bool json_mode = field_list.empty();
  if (json_mode) {
    cmd += " -T json";
  } else {
    cmd += " -T fields -E separator=/t -e frame.time_epoch";
    for (const auto& f : field_list) cmd += " -e " + f;
  }
  for (const auto& a : extra_args) cmd += " " + a;
  cmd += " 2>/dev/null";

  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe)
    throw IngestError(IngestError::Kind::ToolUnavailable,
                      "cannot launch dissector: " + dissector_binary);
  std::string output;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
  int rc = pclose(pipe);
  if (rc != 0)
    throw IngestError(IngestError::Kind::DissectFailed,
                      "dissector exited with status " + std::to_string(rc));

  std::vector<PacketRecord> out;
  IngestStats local;
  if (json_mode) {
    nlohmann::json doc = nlohmann::json::parse(output, nullptr, false);
    if (doc.is_discarded() || !doc.is_array())
      throw IngestError(IngestError::Kind::DissectFailed, "unparseable JSON output");
    std::uint64_t idx = 0;
    for (const auto& pkt : doc) {
      PacketRecord rec;
      rec.capture_index = idx++;
      const auto* layers = pkt.contains("_source") && pkt["_source"].contains("layers")
                               ? &pkt["_source"]["layers"]
                               : &pkt;
      std::map<std::string, std::string> flat;
      detail::flatten_json(*layers, "", flat);
      rec.fields = std::move(flat);
      if (auto it = rec.fields.find("frame.time_epoch"); it != rec.fields.end())
        rec.timestamp = std::stod(it->second);
      detail::attach_flow_key(rec);
      out.push_back(std::move(rec));
    }
  } else {
    std::istringstream lines(output);
    std::string line;
    std::uint64_t idx = 0;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::size_t start = 0;
      for (;;) {
        std::size_t tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab == std::string::npos
                                              ? std::string::npos
                                              : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      if (cols.size() != field_list.size() + 1) {
        ++local.skipped_lines;
        continue;
      }
      PacketRecord rec;
      rec.capture_index = idx++;
      try {
        rec.timestamp = std::stod(cols[0]);
      } catch (...) {
        ++local.skipped_lines;
        continue;
      }
      for (std::size_t c = 0; c < field_list.size(); ++c)
        if (!cols[c + 1].empty()) rec.fields[field_list[c]] = cols[c + 1];
      detail::attach_flow_key(rec);
      out.push_back(std::move(rec));
    }
  }
  local.records = out.size();
  if (stats) *stats = local;
  return out;
}

enum class RecordFormat { NDJSON, CSV };

// Loads pre-extracted field tables; downstream-identical to dissector output.
inline std::vector<PacketRecord> load_records(const std::string& path,
                                              RecordFormat format,
                                              IngestStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in)
    throw IngestError(IngestError::Kind::ToolUnavailable, "cannot open " + path);
  std::vector<PacketRecord> out;
  IngestStats local;
  std::string line;
  std::uint64_t idx = 0;
  if (format == RecordFormat::NDJSON) {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        ++local.skipped_lines;
        continue;
      }
      PacketRecord rec;
      rec.capture_index = idx++;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.value().is_string()) {
          if (!it.value().get<std::string>().empty())
            rec.fields[it.key()] = it.value().get<std::string>();
        } else if (!it.value().is_null()) {
          rec.fields[it.key()] = it.value().dump();
        }
      }
      if (auto it = rec.fields.find("timestamp"); it != rec.fields.end())
        rec.timestamp = std::stod(it->second);
      else if (auto it2 = rec.fields.find("frame.time_epoch"); it2 != rec.fields.end())
        rec.timestamp = std::stod(it2->second);
      else
        throw IngestError(IngestError::Kind::BadFormat,
                          "NDJSON record missing timestamp");
      detail::attach_flow_key(rec);
      if (!rec.has_flow_key)
        throw IngestError(IngestError::Kind::BadFormat,
                          "NDJSON record missing flow identity");
      out.push_back(std::move(rec));
    }
  } else {
    if (!std::getline(in, line))
      throw IngestError(IngestError::Kind::BadFormat, "CSV missing header row");
    auto split = [](const std::string& s) {
      std::vector<std::string> cols;
      std::size_t start = 0;
      for (;;) {
        std::size_t c = s.find(',', start);
        cols.push_back(s.substr(start, c == std::string::npos ? std::string::npos
                                                              : c - start));
        if (c == std::string::npos) break;
        start = c + 1;
      }
      return cols;
    };
    std::vector<std::string> header = split(line);
    bool has_ts = false, has_flow = false;
    for (auto& h : header) {
      if (h == "timestamp" || h == "frame.time_epoch") has_ts = true;
      if (h == "ip.src") has_flow = true;
    }
    if (!has_ts || !has_flow)
      throw IngestError(IngestError::Kind::BadFormat,
                        "CSV missing mandatory timestamp/flow columns");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cols = split(line);
      if (cols.size() != header.size()) {
        ++local.skipped_lines;
        continue;
      }
      PacketRecord rec;
      rec.capture_index = idx++;
      for (std::size_t c = 0; c < cols.size(); ++c)
        if (!cols[c].empty()) rec.fields[header[c]] = cols[c];
      auto it = rec.fields.find("timestamp");
      if (it == rec.fields.end()) it = rec.fields.find("frame.time_epoch");
      if (it == rec.fields.end()) {
        ++local.skipped_lines;
        continue;
      }
      rec.timestamp = std::stod(it->second);
      detail::attach_flow_key(rec);
      out.push_back(std::move(rec));
    }
  }
  local.records = out.size();
  if (stats) *stats = local;
  return out;
}

// Serializes records to NDJSON for caching.
inline void write_records_ndjson(const std::vector<PacketRecord>& records,
                                 const std::string& path) {
  std::ofstream out(path);
  for (const auto& rec : records) {
    nlohmann::json j;
    j["timestamp"] = std::to_string(rec.timestamp);
    for (const auto& [k, v] : rec.fields) j[k] = v;
    out << j.dump() << '\n';
  }
}

}  // namespace netaudit
