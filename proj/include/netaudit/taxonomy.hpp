#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "netaudit/common.hpp"
#include "netaudit/ranker.hpp"

namespace netaudit {

enum class Category { DataLeakage, RelativeArtifact, TaskAgnostic, Benign };
enum class Provenance { Rule, Human };

inline const char* category_name(Category c) {
  switch (c) {
    case Category::DataLeakage: return "DataLeakage";
    case Category::RelativeArtifact: return "RelativeArtifact";
    case Category::TaskAgnostic: return "TaskAgnostic";
    case Category::Benign: return "Benign";
  }
  return "Benign";
}

inline Category category_from_name(const std::string& s) {
  if (s == "DataLeakage") return Category::DataLeakage;
  if (s == "RelativeArtifact") return Category::RelativeArtifact;
  if (s == "TaskAgnostic") return Category::TaskAgnostic;
  if (s == "Benign") return Category::Benign;
  throw ConfigError("unknown category: " + s);
}

struct CategoryEntry {
  Category category = Category::Benign;
  Provenance provenance = Provenance::Rule;
  bool needs_review = false;  // no rule matched
};

using CategoryAssignment = std::map<std::string, CategoryEntry>;

// Built-in rules: identifiers and SNI leak labels; raw counters whose
// differences carry the semantics are relative artifacts; environment-coupled
// low-level fields are task-agnostic.
inline Category rule_category(const std::string& field, bool* matched = nullptr) {
  if (matched) *matched = true;
  if (field == "ip.src" || field == "ip.dst" || field == "tcp.srcport" ||
      field == "tcp.dstport" || field == "udp.srcport" || field == "udp.dstport" ||
      field.find("server_name") != std::string::npos)
    return Category::DataLeakage;
  if (field == "tcp.seq_raw" || field == "tcp.ack_raw" ||
      field.find("options.timestamp") != std::string::npos)
    return Category::RelativeArtifact;
  if (field == "tcp.window_size" || field == "ip.ttl" ||
      field.find("checksum") != std::string::npos)
    return Category::TaskAgnostic;
  if (matched) *matched = false;
  return Category::Benign;
}

inline CategoryAssignment suggest_categories(const AmiReport& report) {
  if (report.records.empty())
    throw std::domain_error("empty report");
  CategoryAssignment out;
  for (const auto& rec : report.records) {
    if (!rec.shortcut_candidate) continue;
    CategoryEntry e;
    bool matched;
    e.category = rule_category(rec.field, &matched);
    e.needs_review = !matched;
    out[rec.field] = e;
  }
  return out;
}

struct CategorizedField {
  AmiRecord ami;
  CategoryEntry entry;
};

struct CategorizedReport {
  std::vector<CategorizedField> candidates;  // top-k, report order
  std::vector<std::string> needs_review;
  std::vector<std::string> unknown_fields;  // assignment entries not in report
};

// Assignment file: CSV with columns field,category. Human entries override
// rule suggestions.
inline std::map<std::string, Category> load_assignment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open assignment file: " + path);
  std::map<std::string, Category> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("assignment line " + std::to_string(lineno) +
                        ": expected field,category");
    std::string field = line.substr(0, comma);
    std::string cat = line.substr(comma + 1);
    if (lineno == 1 && field == "field") continue;  // header row
    try {
      out[field] = category_from_name(cat);
    } catch (const ConfigError&) {
      throw ConfigError("assignment line " + std::to_string(lineno) +
                        ": unknown category '" + cat + "'");
    }
  }
  return out;
}

inline CategorizedReport apply_assignment(
    const AmiReport& report, const std::map<std::string, Category>& human) {
  CategorizedReport out;
  CategoryAssignment rules = suggest_categories(report);
  for (const auto& rec : report.records) {
    if (!rec.shortcut_candidate) continue;
    CategorizedField cf;
    cf.ami = rec;
    cf.entry = rules.at(rec.field);
    if (auto it = human.find(rec.field); it != human.end()) {
      cf.entry.category = it->second;
      cf.entry.provenance = Provenance::Human;
      cf.entry.needs_review = false;
    }
    if (cf.entry.needs_review) out.needs_review.push_back(rec.field);
    out.candidates.push_back(std::move(cf));
  }
  for (const auto& [field, cat] : human) {
    bool present = false;
    for (const auto& cf : out.candidates)
      if (cf.ami.field == field) present = true;
    if (!present) out.unknown_fields.push_back(field);
  }
  return out;
}

}  // namespace netaudit
