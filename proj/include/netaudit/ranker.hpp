#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "netaudit/common.hpp"
#include "netaudit/encode.hpp"

namespace netaudit {

struct ContingencyTable {
  std::vector<std::vector<std::uint64_t>> counts;  // r × c
  std::vector<std::uint64_t> row_margins;
  std::vector<std::uint64_t> col_margins;
  std::uint64_t total = 0;

  static ContingencyTable from_codes(const std::vector<int>& x,
                                     const std::vector<int>& y) {
    if (x.size() != y.size())
      throw std::invalid_argument("code vectors differ in length");
    std::map<int, std::size_t> xi, yi;
    for (int v : x) xi.try_emplace(v, xi.size());
    for (int v : y) yi.try_emplace(v, yi.size());
    ContingencyTable t;
    t.counts.assign(xi.size(), std::vector<std::uint64_t>(yi.size(), 0));
    for (std::size_t i = 0; i < x.size(); ++i)
      ++t.counts[xi.at(x[i])][yi.at(y[i])];
    t.finalize();
    return t;
  }

  void finalize() {
    std::size_t r = counts.size();
    std::size_t c = r ? counts[0].size() : 0;
    row_margins.assign(r, 0);
    col_margins.assign(c, 0);
    total = 0;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        row_margins[i] += counts[i][j];
        col_margins[j] += counts[i][j];
        total += counts[i][j];
      }
  }
};

// Shannon entropy in nats; zero-count terms contribute 0.
inline double entropy(const std::vector<std::uint64_t>& counts) {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) throw std::domain_error("entropy of empty distribution");
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    double p = double(c) / double(n);
    h -= p * std::log(p);
  }
  return h;
}

inline double mutual_information(const ContingencyTable& t) {
  if (t.total == 0) throw std::domain_error("empty contingency table");
  double n = double(t.total);
  double mi = 0.0;
  for (std::size_t i = 0; i < t.counts.size(); ++i)
    for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
      std::uint64_t nij = t.counts[i][j];
      if (nij == 0) continue;
      double pij = double(nij) / n;
      mi += pij * std::log(double(nij) * n /
                           (double(t.row_margins[i]) * double(t.col_margins[j])));
    }
  return mi;
}

struct ExpectedMiOptions {
  // Above this r·c·N product the exact triple sum falls back to seeded
  // Monte-Carlo over label permutations.
  std::uint64_t exact_cost_bound = 200'000'000ULL;
  std::size_t mc_permutations = 10'000;
  std::uint64_t mc_seed = 0x9e3779b9ULL;
};

namespace detail {

// Exact expectation of MI under the fixed-margin permutation (hypergeometric)
// null model; per-cell sum over feasible counts weighted by the
// hypergeometric pmf.
inline double expected_mi_exact(const std::vector<std::uint64_t>& a,
                                const std::vector<std::uint64_t>& b,
                                std::uint64_t n_total) {
  double N = double(n_total);
  double lgN = std::lgamma(N + 1.0);
  double emi = 0.0;
  for (std::uint64_t ai : a) {
    if (ai == 0) continue;
    for (std::uint64_t bj : b) {
      if (bj == 0) continue;
      std::uint64_t lo = ai + bj > n_total ? ai + bj - n_total : 1;
      std::uint64_t hi = std::min(ai, bj);
      double base = std::lgamma(double(ai) + 1) + std::lgamma(double(bj) + 1) +
                    std::lgamma(N - double(ai) + 1) + std::lgamma(N - double(bj) + 1) -
                    lgN;
      for (std::uint64_t nij = lo; nij <= hi; ++nij) {
        double lp = base - std::lgamma(double(nij) + 1) -
                    std::lgamma(double(ai - nij) + 1) -
                    std::lgamma(double(bj - nij) + 1) -
                    std::lgamma(N - double(ai) - double(bj) + double(nij) + 1);
        double term = (double(nij) / N) *
                      std::log(N * double(nij) / (double(ai) * double(bj)));
        emi += term * std::exp(lp);
      }
    }
  }
  return emi;
}

inline double expected_mi_monte_carlo(const std::vector<std::uint64_t>& a,
                                      const std::vector<std::uint64_t>& b,
                                      std::uint64_t n_total,
                                      const ExpectedMiOptions& opt) {
  std::vector<int> x, y;
  x.reserve(n_total);
  y.reserve(n_total);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::uint64_t k = 0; k < a[i]; ++k) x.push_back(int(i));
  for (std::size_t j = 0; j < b.size(); ++j)
    for (std::uint64_t k = 0; k < b[j]; ++k) y.push_back(int(j));
  std::mt19937_64 rng(opt.mc_seed);
  double acc = 0.0;
  for (std::size_t p = 0; p < opt.mc_permutations; ++p) {
    for (std::size_t i = y.size(); i > 1; --i)
      std::swap(y[i - 1], y[rng() % i]);
    acc += mutual_information(ContingencyTable::from_codes(x, y));
  }
  return acc / double(opt.mc_permutations);
}

}  // namespace detail

inline double expected_mi(const std::vector<std::uint64_t>& row_margins,
                          const std::vector<std::uint64_t>& col_margins,
                          std::uint64_t n_total,
                          const ExpectedMiOptions& opt = {}) {
  std::uint64_t sa = 0, sb = 0;
  for (auto v : row_margins) sa += v;
  for (auto v : col_margins) sb += v;
  if (n_total == 0 || sa != n_total || sb != n_total)
    throw std::domain_error("inconsistent contingency margins");
  std::uint64_t cost = std::uint64_t(row_margins.size()) * col_margins.size() * n_total;
  if (cost > opt.exact_cost_bound)
    return detail::expected_mi_monte_carlo(row_margins, col_margins, n_total, opt);
  return detail::expected_mi_exact(row_margins, col_margins, n_total);
}

struct AmiComponents {
  double entropy_x = 0.0;
  double entropy_y = 0.0;
  double mi = 0.0;
  double expected_mi = 0.0;
  double ami = 0.0;
  bool degenerate = false;  // constant feature or constant labels
};

inline AmiComponents adjusted_mi_components(const std::vector<int>& x_codes,
                                            const std::vector<int>& y_codes,
                                            const ExpectedMiOptions& opt = {}) {
  if (x_codes.empty() || x_codes.size() != y_codes.size())
    throw std::invalid_argument("adjusted_mi needs equal non-empty vectors");
  ContingencyTable t = ContingencyTable::from_codes(x_codes, y_codes);
  AmiComponents c;
  c.entropy_x = entropy(t.row_margins);
  c.entropy_y = entropy(t.col_margins);
  if (t.counts.size() < 2 || t.counts[0].size() < 2) {
    c.degenerate = true;
    return c;  // ami = 0 by convention
  }
  c.mi = mutual_information(t);
  c.expected_mi = expected_mi(t.row_margins, t.col_margins, t.total, opt);
  double denom = std::max(c.entropy_x, c.entropy_y) - c.expected_mi;
  double num = c.mi - c.expected_mi;
  if (std::abs(denom) <= 1e-12) {
    if (std::abs(num) <= 1e-12) {
      c.ami = 1.0;
    } else {
      c.ami = num / (denom >= 0 ? 1e-12 : -1e-12);
    }
  } else {
    c.ami = num / denom;
  }
  return c;
}

inline double adjusted_mi(const std::vector<int>& x_codes,
                          const std::vector<int>& y_codes,
                          const ExpectedMiOptions& opt = {}) {
  return adjusted_mi_components(x_codes, y_codes, opt).ami;
}

struct DiscretizePolicy {
  std::size_t max_categories = 256;  // identity codebook at or below this
  std::size_t bins = 256;
};

struct Discretized {
  std::vector<int> codes;
  bool binned = false;  // quantile binning applied (vs identity codebook)
};

// Identity codebook for low-cardinality vectors, otherwise quantile binning
// with duplicate edges merged.
inline Discretized discretize(const std::vector<double>& values,
                              const DiscretizePolicy& policy = {}) {
  Discretized out;
  out.codes.resize(values.size());
  if (values.empty()) return out;
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.size() <= policy.max_categories) {
    for (std::size_t i = 0; i < values.size(); ++i)
      out.codes[i] = int(std::lower_bound(sorted.begin(), sorted.end(), values[i]) -
                         sorted.begin());
    return out;
  }
  out.binned = true;
  std::vector<double> all(values);
  std::sort(all.begin(), all.end());
  std::vector<double> edges;  // upper edge of each bin except the last
  edges.reserve(policy.bins - 1);
  for (std::size_t b = 1; b < policy.bins; ++b) {
    std::size_t idx = b * all.size() / policy.bins;
    double e = all[std::min(idx, all.size() - 1)];
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    out.codes[i] = int(std::lower_bound(edges.begin(), edges.end(), values[i],
                                        [](double edge, double v) { return edge <= v; }) -
                       edges.begin());
  return out;
}

struct PrefilterOptions {
  double min_entropy_nats = 0.05;
  double min_valid_fraction = 0.01;
  std::vector<std::string> denylist = {
      "frame.number", "frame.offset", "tcp.stream", "udp.stream", "eth.padding",
  };
};

struct ExclusionEntry {
  std::string field;
  std::string reason;  // constant | low_entropy | denylist | sparsity
};

struct PrefilterResult {
  std::vector<std::string> retained;
  std::vector<ExclusionEntry> excluded;
};

inline PrefilterResult prefilter_fields(const FeatureMatrix& m,
                                        const PrefilterOptions& opt = {}) {
  if (m.rows() == 0) throw std::domain_error("empty feature matrix");
  PrefilterResult res;
  for (std::size_t col = 0; col < m.cols(); ++col) {
    const std::string& name = m.field_names[col];
    bool denied = false;
    for (const auto& d : opt.denylist)
      if (name == d) denied = true;
    if (denied) {
      res.excluded.push_back({name, "denylist"});
      continue;
    }
    std::vector<double> valid_values;
    valid_values.reserve(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
      if (m.cells[r][col].valid) valid_values.push_back(m.cells[r][col].value);
    if (double(valid_values.size()) < opt.min_valid_fraction * double(m.rows())) {
      res.excluded.push_back({name, "sparsity"});
      continue;
    }
    std::set<double> distinct(valid_values.begin(), valid_values.end());
    if (distinct.size() <= 1) {
      res.excluded.push_back({name, "constant"});
      continue;
    }
    Discretized d = discretize(valid_values);
    std::map<int, std::uint64_t> hist;
    for (int c : d.codes) ++hist[c];
    std::vector<std::uint64_t> counts;
    for (auto& [k, v] : hist) counts.push_back(v);
    if (entropy(counts) < opt.min_entropy_nats) {
      res.excluded.push_back({name, "low_entropy"});
      continue;
    }
    res.retained.push_back(name);
  }
  return res;
}

struct AmiRecord {
  std::string field;
  double entropy_feature = 0.0;
  double entropy_label = 0.0;
  double mi = 0.0;
  double expected_mi = 0.0;
  double ami = 0.0;
  std::size_t n_valid = 0;
  bool discretized = false;
  bool shortcut_candidate = false;
  bool clamped = false;  // raw ami fell outside [0,1]
};

struct AmiReport {
  std::vector<AmiRecord> records;  // descending ami, ties by field name
  std::size_t top_k = 0;
};

// Column codes with the missing category as its own bin (code = max+1), so
// field absence itself is visible to AMI.
inline std::pair<std::vector<int>, AmiRecord> field_codes(const FeatureMatrix& m,
                                                          std::size_t col) {
  std::vector<double> valid_values;
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (m.cells[r][col].valid) valid_values.push_back(m.cells[r][col].value);
  Discretized d = discretize(valid_values);
  AmiRecord rec;
  rec.field = m.field_names[col];
  rec.n_valid = valid_values.size();
  rec.discretized = d.binned;
  int missing_code = 0;
  for (int c : d.codes) missing_code = std::max(missing_code, c + 1);
  std::vector<int> codes(m.rows(), missing_code);
  std::size_t vi = 0;
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (m.cells[r][col].valid) codes[r] = d.codes[vi++];
  return {std::move(codes), std::move(rec)};
}

struct RankOptions {
  std::size_t k = 10;
  PrefilterOptions prefilter;
  ExpectedMiOptions emi;
  unsigned threads = 1;
};

inline AmiReport rank_top_k(const FeatureMatrix& m, const RankOptions& opt = {},
                            PrefilterResult* prefilter_out = nullptr) {
  std::set<int> classes(m.labels.begin(), m.labels.end());
  if (classes.size() < 2)
    throw std::domain_error("ranking needs at least 2 classes");
  PrefilterResult pf = prefilter_fields(m, opt.prefilter);
  if (prefilter_out) *prefilter_out = pf;

  AmiReport report;
  report.records.resize(pf.retained.size());
  parallel_for(pf.retained.size(), opt.threads, [&](std::size_t i) {
    std::size_t col = m.column_of(pf.retained[i]);
    auto [codes, rec] = field_codes(m, col);
    AmiComponents c = adjusted_mi_components(codes, m.labels, opt.emi);
    rec.entropy_feature = c.entropy_x;
    rec.entropy_label = c.entropy_y;
    rec.mi = c.mi;
    rec.expected_mi = c.expected_mi;
    rec.ami = c.ami;
    if (rec.ami > 1.0 || rec.ami < 0.0) rec.clamped = true;
    report.records[i] = std::move(rec);
  });
  std::sort(report.records.begin(), report.records.end(),
            [](const AmiRecord& a, const AmiRecord& b) {
              if (a.ami != b.ami) return a.ami > b.ami;
              return a.field < b.field;
            });
  report.top_k = std::min(opt.k, report.records.size());
  for (std::size_t i = 0; i < report.top_k; ++i)
    report.records[i].shortcut_candidate = true;
  return report;
}

}  // namespace netaudit
