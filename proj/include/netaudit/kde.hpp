#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace netaudit {

struct KdeResult {
  std::vector<double> density;
  double bandwidth = 0.0;
  bool degenerate_spike = false;  // zero-spread input
};

// Silverman's rule of thumb.
inline double silverman_bandwidth(const std::vector<double>& samples) {
  std::size_t n = samples.size();
  if (n < 2) return 1.0;
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= double(n);
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= double(n - 1);
  double sd = std::sqrt(var);
  std::vector<double> sorted(samples);
  std::sort(sorted.begin(), sorted.end());
  double q1 = sorted[(n - 1) / 4];
  double q3 = sorted[(3 * (n - 1)) / 4];
  double iqr = q3 - q1;
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) return 0.0;
  return 0.9 * spread * std::pow(double(n), -0.2);
}

inline double trapezoid_integral(const std::vector<double>& f,
                                 const std::vector<double>& grid) {
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    acc += 0.5 * (f[i] + f[i - 1]) * (grid[i] - grid[i - 1]);
  return acc;
}

// Gaussian-kernel density on the grid, renormalized so the trapezoid-rule
// integral over the grid is 1. bandwidth <= 0 selects Silverman's rule.
inline KdeResult kde_density(const std::vector<double>& samples,
                             const std::vector<double>& grid,
                             double bandwidth = 0.0) {
  if (samples.empty()) throw std::domain_error("kde needs samples");
  if (grid.size() < 2) throw std::domain_error("kde needs a grid");
  KdeResult out;
  double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  if (h <= 0.0) {
    // all samples identical: spike at the value's nearest grid point
    out.degenerate_spike = true;
    out.density.assign(grid.size(), 0.0);
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (std::abs(grid[i] - samples[0]) < std::abs(grid[best] - samples[0]))
        best = i;
    out.density[best] = 1.0;
  } else {
    out.bandwidth = h;
    out.density.resize(grid.size());
    double inv = 1.0 / (h * std::sqrt(2.0 * M_PI) * double(samples.size()));
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double acc = 0.0;
      for (double s : samples) {
        double z = (grid[g] - s) / h;
        acc += std::exp(-0.5 * z * z);
      }
      out.density[g] = acc * inv;
    }
  }
  double mass = trapezoid_integral(out.density, grid);
  if (mass > 0.0)
    for (double& d : out.density) d /= mass;
  return out;
}

// Trapezoid-rule KL(p‖q) in nats; q floored at eps, p terms below eps
// contribute 0, result clamped at >= 0.
inline double kl_divergence(const std::vector<double>& p,
                            const std::vector<double>& q,
                            const std::vector<double>& grid) {
  if (p.size() != grid.size() || q.size() != grid.size())
    throw std::invalid_argument("kl_divergence: grid mismatch");
  constexpr double eps = 1e-10;
  std::vector<double> integrand(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (p[i] < eps) {
      integrand[i] = 0.0;
    } else {
      integrand[i] = p[i] * std::log(p[i] / std::max(q[i], eps));
    }
  }
  return std::max(0.0, trapezoid_integral(integrand, grid));
}

// 512 uniform points spanning [lo, hi] padded by pad on both sides.
inline std::vector<double> make_grid(double lo, double hi, double pad,
                                     std::size_t points = 512) {
  lo -= pad;
  hi += pad;
  if (hi <= lo) hi = lo + 1.0;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = lo + (hi - lo) * double(i) / double(points - 1);
  return grid;
}

}  // namespace netaudit
