#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netaudit/kde.hpp"
#include "netaudit/ranker.hpp"

namespace netaudit {

enum class RelativeKind { AdjacentDiff, AnchorFirst, TsvalMinusTsecr };

// One session's time-ordered field values; invalid entries propagate.
struct MaybeSeries {
  std::vector<double> values;
  std::vector<bool> valid;
};

inline MaybeSeries relative_transform_values(const MaybeSeries& in,
                                             RelativeKind kind,
                                             const MaybeSeries* tsecr = nullptr) {
  MaybeSeries out;
  out.values.assign(in.values.size(), 0.0);
  out.valid.assign(in.values.size(), false);
  switch (kind) {
    case RelativeKind::AdjacentDiff: {
      std::optional<double> prev;
      for (std::size_t i = 0; i < in.values.size(); ++i) {
        if (!in.valid[i]) continue;
        out.values[i] = prev ? in.values[i] - *prev : 0.0;
        out.valid[i] = true;
        prev = in.values[i];
      }
      break;
    }
    case RelativeKind::AnchorFirst: {
      std::optional<double> first;
      for (std::size_t i = 0; i < in.values.size(); ++i) {
        if (!in.valid[i]) continue;
        if (!first) first = in.values[i];
        out.values[i] = in.values[i] - *first;
        out.valid[i] = true;
      }
      break;
    }
    case RelativeKind::TsvalMinusTsecr: {
      for (std::size_t i = 0; i < in.values.size(); ++i) {
        if (!in.valid[i] || !tsecr || i >= tsecr->valid.size() || !tsecr->valid[i])
          continue;
        out.values[i] = in.values[i] - tsecr->values[i];
        out.valid[i] = true;
      }
      break;
    }
  }
  return out;
}

struct DeltaAmiRecord {
  std::string field;
  double ami_absolute = 0.0;
  double ami_relative = 0.0;
  double delta_ami = 0.0;
  RelativeKind kind = RelativeKind::AdjacentDiff;
};

namespace detail {

// AMI of a (value, valid) column against labels through the standard
// discretization policy, missing bin included.
inline double column_ami(const std::vector<double>& values,
                         const std::vector<bool>& valid,
                         const std::vector<int>& labels,
                         const ExpectedMiOptions& opt) {
  std::vector<double> valid_values;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (valid[i]) valid_values.push_back(values[i]);
  if (valid_values.empty()) return 0.0;
  Discretized d = discretize(valid_values);
  int missing_code = 0;
  for (int c : d.codes) missing_code = std::max(missing_code, c + 1);
  std::vector<int> codes(values.size(), missing_code);
  std::size_t vi = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (valid[i]) codes[i] = d.codes[vi++];
  return adjusted_mi(codes, labels, opt);
}

}  // namespace detail

// ΔAMI = AMI(absolute values, Y) − AMI(relative values, Y); both routes share
// the discretization policy.
inline DeltaAmiRecord delta_ami(const FeatureMatrix& m, const std::string& field,
                                RelativeKind kind,
                                const ExpectedMiOptions& opt = {}) {
  std::size_t col = m.column_of(field);
  std::optional<std::size_t> tsecr_col;
  if (kind == RelativeKind::TsvalMinusTsecr) {
    std::string tsecr_name = field;
    std::size_t pos = tsecr_name.rfind("tsval");
    if (pos == std::string::npos)
      throw ConfigError("tsval_minus_tsecr requires a tsval field");
    tsecr_name.replace(pos, 5, "tsecr");
    tsecr_col = m.column_of(tsecr_name);
  }

  std::size_t n = m.rows();
  std::vector<double> abs_values(n), rel_values(n, 0.0);
  std::vector<bool> abs_valid(n), rel_valid(n, false);
  for (std::size_t r = 0; r < n; ++r) {
    abs_values[r] = m.cells[r][col].value;
    abs_valid[r] = m.cells[r][col].valid;
  }

  // group rows by owning session, preserving row (time) order
  std::map<std::size_t, std::vector<std::size_t>> by_session;
  for (std::size_t r = 0; r < n; ++r) by_session[m.session_index[r]].push_back(r);
  for (const auto& [sid, rows] : by_session) {
    MaybeSeries in, tsecr;
    for (std::size_t r : rows) {
      in.values.push_back(abs_values[r]);
      in.valid.push_back(abs_valid[r]);
      if (tsecr_col) {
        tsecr.values.push_back(m.cells[r][*tsecr_col].value);
        tsecr.valid.push_back(m.cells[r][*tsecr_col].valid);
      }
    }
    MaybeSeries out = relative_transform_values(in, kind, tsecr_col ? &tsecr : nullptr);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      rel_values[rows[i]] = out.values[i];
      rel_valid[rows[i]] = out.valid[i];
    }
  }

  DeltaAmiRecord rec;
  rec.field = field;
  rec.kind = kind;
  rec.ami_absolute = detail::column_ami(abs_values, abs_valid, m.labels, opt);
  rec.ami_relative = detail::column_ami(rel_values, rel_valid, m.labels, opt);
  rec.delta_ami = rec.ami_absolute - rec.ami_relative;
  return rec;
}

struct ClassKl {
  std::string class_name;
  double kl = 0.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

struct KlAvgRecord {
  std::string field;
  double kl_avg = 0.0;
  std::vector<ClassKl> per_class;
  std::vector<std::string> skipped_classes;  // below the minimum sample count
  bool symmetrized = false;
};

struct ClassKlOptions {
  std::size_t min_class_samples = 30;
  std::size_t grid_points = 512;
  bool symmetrized = false;  // 0.5·(KL(p‖q)+KL(q‖p)) instead of KL(D1‖D2)
};

// Per shared class: KDE both class-conditional distributions of `field` on a
// shared grid and compute KL(D1 ‖ D2); kl_avg is the mean over classes.
inline KlAvgRecord class_conditional_kl(const std::string& field,
                                        const FeatureMatrix& d1,
                                        const FeatureMatrix& d2,
                                        const ClassKlOptions& opt = {}) {
  auto collect = [&](const FeatureMatrix& m) {
    std::map<std::string, std::vector<double>> per_class;
    if (!m.has_column(field)) return per_class;
    std::size_t col = m.column_of(field);
    for (std::size_t r = 0; r < m.rows(); ++r)
      if (m.cells[r][col].valid)
        per_class[m.label_names[std::size_t(m.labels[r])]].push_back(
            m.cells[r][col].value);
    return per_class;
  };
  auto c1 = collect(d1);
  auto c2 = collect(d2);

  KlAvgRecord rec;
  rec.field = field;
  rec.symmetrized = opt.symmetrized;
  for (const auto& [cls, s1] : c1) {
    auto it = c2.find(cls);
    if (it == c2.end()) continue;
    const auto& s2 = it->second;
    if (s1.size() < opt.min_class_samples || s2.size() < opt.min_class_samples) {
      rec.skipped_classes.push_back(cls);
      continue;
    }
    double lo = std::min(*std::min_element(s1.begin(), s1.end()),
                         *std::min_element(s2.begin(), s2.end()));
    double hi = std::max(*std::max_element(s1.begin(), s1.end()),
                         *std::max_element(s2.begin(), s2.end()));
    double pad = 3.0 * std::max(silverman_bandwidth(s1), silverman_bandwidth(s2));
    std::vector<double> grid = make_grid(lo, hi, pad, opt.grid_points);
    KdeResult p = kde_density(s1, grid);
    KdeResult q = kde_density(s2, grid);
    ClassKl ck;
    ck.class_name = cls;
    ck.n1 = s1.size();
    ck.n2 = s2.size();
    ck.kl = kl_divergence(p.density, q.density, grid);
    if (opt.symmetrized)
      ck.kl = 0.5 * (ck.kl + kl_divergence(q.density, p.density, grid));
    rec.per_class.push_back(std::move(ck));
  }
  if (rec.per_class.empty())
    throw std::domain_error("no shared class with enough samples for " + field);
  for (const auto& ck : rec.per_class) rec.kl_avg += ck.kl;
  rec.kl_avg /= double(rec.per_class.size());
  return rec;
}

// Splits a matrix by dataset tag; class_conditional_kl's D1/D2 inputs.
inline FeatureMatrix filter_by_tag(const FeatureMatrix& m, const std::string& tag) {
  FeatureMatrix out;
  out.field_names = m.field_names;
  out.label_names = m.label_names;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.dataset_tags[r] != tag) continue;
    out.cells.push_back(m.cells[r]);
    out.labels.push_back(m.labels[r]);
    out.dataset_tags.push_back(m.dataset_tags[r]);
    out.session_index.push_back(m.session_index[r]);
  }
  return out;
}

}  // namespace netaudit
