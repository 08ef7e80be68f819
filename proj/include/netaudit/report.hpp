#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netaudit/encode.hpp"
#include "netaudit/evaluator.hpp"
#include "netaudit/ranker.hpp"
#include "netaudit/taxonomy.hpp"
#include "netaudit/validators.hpp"

namespace netaudit {

inline constexpr double kNatsToBits = 1.4426950408889634;  // 1/ln 2

// Doubles serialized via shortest round-trip text so report bytes are stable
// across runs and worker counts.
inline double round_for_report(double v) { return v; }

inline nlohmann::json ami_report_to_json(const AmiReport& report) {
  nlohmann::json j;
  j["top_k"] = report.top_k;
  j["records"] = nlohmann::json::array();
  for (const auto& r : report.records) {
    j["records"].push_back({
        {"field", r.field},
        {"entropy_feature_nats", r.entropy_feature},
        {"entropy_feature_bits", r.entropy_feature * kNatsToBits},
        {"entropy_label_nats", r.entropy_label},
        {"entropy_label_bits", r.entropy_label * kNatsToBits},
        {"mi_nats", r.mi},
        {"expected_mi_nats", r.expected_mi},
        {"ami", r.ami},
        {"n_valid", r.n_valid},
        {"discretized", r.discretized},
        {"shortcut_candidate", r.shortcut_candidate},
        {"clamped", r.clamped},
    });
  }
  return j;
}

inline void ami_report_to_csv(const AmiReport& report, const std::string& path) {
  std::ofstream out(path);
  out << "field,entropy_feature_nats,entropy_label_nats,mi_nats,expected_mi_nats,"
         "ami,n_valid,discretized,shortcut_candidate\n";
  for (const auto& r : report.records)
    out << r.field << ',' << r.entropy_feature << ',' << r.entropy_label << ','
        << r.mi << ',' << r.expected_mi << ',' << r.ami << ',' << r.n_valid << ','
        << (r.discretized ? 1 : 0) << ',' << (r.shortcut_candidate ? 1 : 0) << '\n';
}

// Horizontal bar chart of the top-k AMI scores.
inline void ami_topk_svg(const AmiReport& report, const std::string& path) {
  std::size_t k = report.top_k;
  double bar_h = 24, gap = 8, left = 240, width = 720, top = 40;
  double height = top + k * (bar_h + gap) + 20;
  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n";
  out << "<text x='16' y='24' font-size='16' font-family='sans-serif'>"
         "Top-k AMI features</text>\n";
  for (std::size_t i = 0; i < k; ++i) {
    const auto& r = report.records[i];
    double y = top + i * (bar_h + gap);
    double w = std::max(0.0, std::min(1.0, r.ami)) * (width - left - 80);
    out << "<text x='8' y='" << y + bar_h * 0.7
        << "' font-size='12' font-family='monospace'>" << r.field << "</text>\n";
    out << "<rect x='" << left << "' y='" << y << "' width='" << w
        << "' height='" << bar_h << "' fill='#4878b0'/>\n";
    out << "<text x='" << left + w + 6 << "' y='" << y + bar_h * 0.7
        << "' font-size='12' font-family='monospace'>" << std::fixed
        << std::setprecision(3) << r.ami << "</text>\n";
    out.unsetf(std::ios::fixed);
  }
  out << "</svg>\n";
}

inline nlohmann::json categorized_report_to_json(const CategorizedReport& report) {
  nlohmann::json j;
  j["candidates"] = nlohmann::json::array();
  for (const auto& cf : report.candidates) {
    j["candidates"].push_back({
        {"field", cf.ami.field},
        {"ami", cf.ami.ami},
        {"category", category_name(cf.entry.category)},
        {"provenance", cf.entry.provenance == Provenance::Human ? "human" : "rule"},
        {"needs_review", cf.entry.needs_review},
    });
  }
  j["needs_review"] = report.needs_review;
  j["unknown_assignment_fields"] = report.unknown_fields;
  return j;
}

inline nlohmann::json delta_ami_to_json(const std::vector<DeltaAmiRecord>& records) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : records) {
    const char* kind = r.kind == RelativeKind::AdjacentDiff ? "adjacent_diff"
                       : r.kind == RelativeKind::AnchorFirst ? "anchor_first"
                                                             : "tsval_minus_tsecr";
    j.push_back({
        {"field", r.field},
        {"kind", kind},
        {"ami_absolute", r.ami_absolute},
        {"ami_relative", r.ami_relative},
        {"delta_ami", r.delta_ami},
    });
  }
  return j;
}

inline nlohmann::json kl_records_to_json(const std::vector<KlAvgRecord>& records,
                                         const std::string& tag1,
                                         const std::string& tag2) {
  nlohmann::json j;
  j["dataset_pair"] = {tag1, tag2};
  j["fields"] = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& c : r.per_class)
      per_class.push_back({{"class", c.class_name},
                           {"kl", c.kl},
                           {"n1", c.n1},
                           {"n2", c.n2}});
    j["fields"].push_back({
        {"field", r.field},
        {"kl_avg", r.kl_avg},
        {"symmetrized", r.symmetrized},
        {"per_class", per_class},
        {"skipped_classes", r.skipped_classes},
    });
  }
  return j;
}

// Per-class density curves for external plotting.
inline void density_curves_csv(const std::string& field,
                               const std::vector<double>& grid,
                               const std::vector<std::pair<std::string, std::vector<double>>>& curves,
                               const std::string& path) {
  std::ofstream out(path);
  out << "x";
  for (const auto& [name, curve] : curves) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << grid[i];
    for (const auto& [name, curve] : curves) out << ',' << curve[i];
    out << '\n';
  }
  (void)field;
}

inline void kl_comparison_svg(const std::vector<KlAvgRecord>& records,
                              const std::string& path) {
  double bar_h = 24, gap = 8, left = 240, width = 720, top = 40;
  double height = top + records.size() * (bar_h + gap) + 20;
  double max_kl = 1e-9;
  for (const auto& r : records) max_kl = std::max(max_kl, r.kl_avg);
  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n";
  out << "<text x='16' y='24' font-size='16' font-family='sans-serif'>"
         "Class-conditional KL divergence by field</text>\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    double y = top + i * (bar_h + gap);
    double w = (r.kl_avg / max_kl) * (width - left - 80);
    out << "<text x='8' y='" << y + bar_h * 0.7
        << "' font-size='12' font-family='monospace'>" << r.field << "</text>\n";
    out << "<rect x='" << left << "' y='" << y << "' width='" << w
        << "' height='" << bar_h << "' fill='#b05048'/>\n";
    out << "<text x='" << left + w + 6 << "' y='" << y + bar_h * 0.7
        << "' font-size='12' font-family='monospace'>" << std::fixed
        << std::setprecision(3) << r.kl_avg << "</text>\n";
    out.unsetf(std::ios::fixed);
  }
  out << "</svg>\n";
}

inline nlohmann::json accuracy_report_to_json(const AccuracyReport& report) {
  nlohmann::json j;
  j["strategy"] = report.strategy;
  j["targets"] = report.targets;
  j["mean_accuracy"] = report.mean_accuracy;
  j["dropped_classes"] = report.dropped_classes;
  j["repeats"] = nlohmann::json::array();
  for (const auto& r : report.repeats) {
    nlohmann::json audit = nlohmann::json::array();
    for (const auto& a : r.split_audit)
      audit.push_back({{"class", a.class_name},
                       {"sampled", a.sampled},
                       {"train", a.train},
                       {"val", a.val},
                       {"test", a.test}});
    j["repeats"].push_back({
        {"test_accuracy", r.test_accuracy},
        {"val_accuracy", r.val_accuracy},
        {"chosen_depth", r.chosen_depth},
        {"split_audit", audit},
    });
  }
  return j;
}

// strategy × dataset rows, one accuracy column per report.
inline void accuracy_table_csv(const std::vector<AccuracyReport>& reports,
                               const std::string& dataset,
                               const std::string& path) {
  std::ofstream out(path);
  out << "strategy,targets,dataset,mean_accuracy,delta_vs_baseline\n";
  double baseline = 0.0;
  for (const auto& r : reports)
    if (r.strategy == "none") baseline = r.mean_accuracy;
  for (const auto& r : reports) {
    out << r.strategy << ',';
    for (std::size_t i = 0; i < r.targets.size(); ++i)
      out << (i ? ";" : "") << r.targets[i];
    out << ',' << dataset << ',' << r.mean_accuracy << ','
        << (r.mean_accuracy - baseline) << '\n';
  }
}

// FeatureMatrix → values CSV + validity CSV + JSON sidecar.
inline void write_feature_matrix(const FeatureMatrix& m, const std::string& stem,
                                 const std::vector<FieldSchema>& schemas,
                                 const DomainDict& dict) {
  {
    std::ofstream values(stem + ".values.csv");
    std::ofstream validity(stem + ".valid.csv");
    for (std::size_t c = 0; c < m.cols(); ++c) {
      values << (c ? "," : "") << m.field_names[c];
      validity << (c ? "," : "") << m.field_names[c];
    }
    values << '\n';
    validity << '\n';
    values << std::setprecision(17);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        values << (c ? "," : "") << m.cells[r][c].value;
        validity << (c ? "," : "") << (m.cells[r][c].valid ? 1 : 0);
      }
      values << '\n';
      validity << '\n';
    }
  }
  nlohmann::json side;
  side["labels"] = m.labels;
  side["label_names"] = m.label_names;
  side["dataset_tags"] = m.dataset_tags;
  side["session_index"] = m.session_index;
  side["schemas"] = nlohmann::json::array();
  for (const auto& s : schemas) {
    const char* kind = s.kind == FieldKind::Ipv4Address    ? "ipv4_address"
                       : s.kind == FieldKind::HexOrInt     ? "hex_or_int"
                       : s.kind == FieldKind::FloatTemporal ? "float_temporal"
                       : s.kind == FieldKind::DomainName   ? "domain_name"
                                                           : "opaque_categorical";
    side["schemas"].push_back({{"name", s.name}, {"kind", kind}});
  }
  side["domain_dict"] = dict.entries();
  std::ofstream(stem + ".meta.json") << side.dump(2) << '\n';
}

inline FeatureMatrix read_feature_matrix(const std::string& stem) {
  FeatureMatrix m;
  std::ifstream values(stem + ".values.csv");
  std::ifstream validity(stem + ".valid.csv");
  if (!values || !validity)
    throw ConfigError("missing cached matrix files at " + stem);
  auto split = [](const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      std::size_t c = line.find(',', start);
      cols.push_back(line.substr(start, c == std::string::npos ? std::string::npos
                                                               : c - start));
      if (c == std::string::npos) break;
      start = c + 1;
    }
    return cols;
  };
  std::string vline, mline;
  std::getline(values, vline);
  m.field_names = split(vline);
  std::getline(validity, mline);
  while (std::getline(values, vline) && std::getline(validity, mline)) {
    auto vs = split(vline);
    auto ms = split(mline);
    std::vector<EncodedValue> row(vs.size());
    for (std::size_t c = 0; c < vs.size(); ++c)
      row[c] = {std::stod(vs[c]), ms[c] == "1"};
    m.cells.push_back(std::move(row));
  }
  nlohmann::json side;
  std::ifstream meta(stem + ".meta.json");
  if (!meta) throw ConfigError("missing matrix sidecar at " + stem);
  meta >> side;
  m.labels = side["labels"].get<std::vector<int>>();
  m.label_names = side["label_names"].get<std::vector<std::string>>();
  m.dataset_tags = side["dataset_tags"].get<std::vector<std::string>>();
  m.session_index = side["session_index"].get<std::vector<std::size_t>>();
  return m;
}

}  // namespace netaudit
