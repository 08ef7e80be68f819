#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "netaudit/validators.hpp"

using namespace netaudit;
using Catch::Approx;

TEST_CASE("relative transforms") {
  MaybeSeries in;
  in.values = {100, 103, 109, 120};
  in.valid = {true, true, true, true};

  SECTION("adjacent diff") {
    MaybeSeries out = relative_transform_values(in, RelativeKind::AdjacentDiff);
    CHECK(out.values == std::vector<double>{0, 3, 6, 11});
    CHECK(out.valid == std::vector<bool>{true, true, true, true});
  }
  SECTION("anchor first") {
    MaybeSeries out = relative_transform_values(in, RelativeKind::AnchorFirst);
    CHECK(out.values == std::vector<double>{0, 3, 9, 20});
  }
  SECTION("invalid entries are skipped, not treated as zero") {
    in.valid = {true, false, true, true};
    MaybeSeries out = relative_transform_values(in, RelativeKind::AdjacentDiff);
    CHECK(out.valid == std::vector<bool>{true, false, true, true});
    CHECK(out.values[2] == 9);  // 109 − 100, skipping the invalid 103
  }
  SECTION("tsval minus tsecr") {
    MaybeSeries tsecr;
    tsecr.values = {90, 100, 100, 0};
    tsecr.valid = {true, true, false, true};
    MaybeSeries out =
        relative_transform_values(in, RelativeKind::TsvalMinusTsecr, &tsecr);
    CHECK(out.values[0] == 10);
    CHECK(out.values[1] == 3);
    CHECK_FALSE(out.valid[2]);  // tsecr invalid propagates
    CHECK(out.values[3] == 120);
  }
}

namespace {

// n_sessions sessions of 4 packets each, 2 classes, with one column filled by
// the caller.
FeatureMatrix series_matrix(std::size_t n_sessions, const std::string& field,
                            const std::function<double(std::size_t session,
                                                       std::size_t pkt, int cls)>& gen) {
  FeatureMatrix m;
  m.field_names = {field};
  m.label_names = {"c0", "c1"};
  for (std::size_t s = 0; s < n_sessions; ++s) {
    int cls = int(s % 2);
    for (std::size_t p = 0; p < 4; ++p) {
      m.cells.push_back({EncodedValue{gen(s, p, cls), true}});
      m.labels.push_back(cls);
      m.dataset_tags.push_back("d");
      m.session_index.push_back(s);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("delta AMI separates absolute-value artifacts from real diffs") {
  std::mt19937_64 rng(77);

  SECTION("class-coded session constant collapses under diffing") {
    // absolute value is class-coded and constant within a session; packet-to-
    // packet increments carry nothing
    auto m = series_matrix(40, "tcp.seq_raw", [&](std::size_t, std::size_t, int cls) {
      return 1e6 * (cls + 1);
    });
    DeltaAmiRecord rec = delta_ami(m, "tcp.seq_raw", RelativeKind::AdjacentDiff);
    CHECK(rec.ami_absolute >= 0.9);
    CHECK(rec.ami_relative <= 0.1);
    CHECK(rec.delta_ami >= 0.8);
  }

  SECTION("diff-encoded signal survives diffing") {
    // random per-session base, class-determined increments; the absolute
    // values are all distinct, so chance correction drives their AMI to zero,
    // while the diffed series keeps the class signal
    std::vector<double> bases(40);
    for (auto& b : bases) b = double(rng() % 1000000);
    auto m = series_matrix(40, "f", [&](std::size_t s, std::size_t p, int cls) {
      return bases[s] + double(p) * (cls ? 50.0 : 7.0);
    });
    DeltaAmiRecord rec = delta_ami(m, "f", RelativeKind::AdjacentDiff);
    CHECK(rec.ami_absolute <= 0.05);
    CHECK(rec.ami_relative >= 0.4);
    CHECK(rec.delta_ami <= 0.05);
  }

  SECTION("uninformative field has near-zero delta") {
    auto m = series_matrix(40, "f", [&](std::size_t, std::size_t, int) {
      return double(rng() % 100);
    });
    DeltaAmiRecord rec = delta_ami(m, "f", RelativeKind::AdjacentDiff);
    CHECK(std::abs(rec.delta_ami) <= 0.25);
  }

  SECTION("tsval kind requires the paired tsecr column") {
    auto m = series_matrix(4, "tcp.window_size", [](std::size_t, std::size_t, int) {
      return 1.0;
    });
    CHECK_THROWS_AS(delta_ami(m, "tcp.window_size", RelativeKind::TsvalMinusTsecr),
                    ConfigError);
  }
}

TEST_CASE("silverman bandwidth") {
  std::vector<double> s = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double h = silverman_bandwidth(s);
  CHECK(h > 0.0);
  CHECK(silverman_bandwidth({5.0, 5.0, 5.0}) == 0.0);
  CHECK(silverman_bandwidth({1.0}) == 1.0);  // n<2 fallback
}

TEST_CASE("kde recovers a standard normal") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> samples(4000);
  for (auto& v : samples) v = normal(rng);
  std::vector<double> grid = make_grid(-4.0, 4.0, 0.0, 512);
  KdeResult res = kde_density(samples, grid);
  CHECK_FALSE(res.degenerate_spike);
  // integral 1 by construction
  CHECK(trapezoid_integral(res.density, grid) == Approx(1.0).margin(1e-9));
  // peak density near 1/sqrt(2π) ≈ 0.3989, within 15%
  std::size_t mid = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (std::abs(grid[i]) < std::abs(grid[mid])) mid = i;
  CHECK(res.density[mid] == Approx(0.3989).epsilon(0.15));
}

TEST_CASE("degenerate kde is a spike") {
  std::vector<double> grid = make_grid(0.0, 10.0, 0.0, 101);
  KdeResult res = kde_density({4.0, 4.0, 4.0}, grid);
  CHECK(res.degenerate_spike);
  double total = 0;
  for (double d : res.density) total += d;
  CHECK(total > 0.0);
}

TEST_CASE("kl divergence between gaussians") {
  // analytic densities, so the only error is quadrature
  std::vector<double> grid = make_grid(-8.0, 9.0, 0.0, 2001);
  auto gauss = [&](double mu) {
    std::vector<double> d(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      d[i] = std::exp(-0.5 * (grid[i] - mu) * (grid[i] - mu)) /
             std::sqrt(2.0 * M_PI);
    return d;
  };
  auto p = gauss(0.0), q = gauss(1.0);
  // KL(N(0,1) ‖ N(1,1)) = 0.5
  CHECK(kl_divergence(p, q, grid) == Approx(0.5).margin(0.01));
  CHECK(kl_divergence(p, p, grid) == Approx(0.0).margin(1e-9));
  CHECK(kl_divergence(q, p, grid) >= 0.0);
}

namespace {

FeatureMatrix tagged_matrix(const std::string& tag, double mean_shift,
                            std::uint64_t seed, std::size_t per_class = 60) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureMatrix m;
  m.field_names = {"tcp.window_size", "len"};
  m.label_names = {"c0", "c1"};
  for (int cls = 0; cls < 2; ++cls) {
    for (std::size_t i = 0; i < per_class; ++i) {
      double w = 40.0 + 10.0 * cls + mean_shift + noise(rng);
      double l = 100.0 + 30.0 * cls + noise(rng);  // stable across tags
      m.cells.push_back({EncodedValue{w, true}, EncodedValue{l, true}});
      m.labels.push_back(cls);
      m.dataset_tags.push_back(tag);
      m.session_index.push_back(m.cells.size() - 1);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("class conditional kl orders shifted vs stable fields") {
  FeatureMatrix d1 = tagged_matrix("envA", 0.0, 1);
  FeatureMatrix d2 = tagged_matrix("envB", 8.0, 2);  // window shifted by 8σ
  KlAvgRecord shifted = class_conditional_kl("tcp.window_size", d1, d2);
  KlAvgRecord stable = class_conditional_kl("len", d1, d2);
  CHECK(shifted.kl_avg > 5.0 * stable.kl_avg);
  CHECK(shifted.per_class.size() == 2);
  CHECK(stable.kl_avg < 0.2);

  SECTION("same-distribution control is near zero") {
    FeatureMatrix d3 = tagged_matrix("envC", 0.0, 3);
    KlAvgRecord control = class_conditional_kl("tcp.window_size", d1, d3);
    CHECK(control.kl_avg < 0.1);
  }

  SECTION("symmetrized option averages both directions") {
    ClassKlOptions opt;
    opt.symmetrized = true;
    KlAvgRecord sym = class_conditional_kl("tcp.window_size", d1, d2, opt);
    CHECK(sym.symmetrized);
    CHECK(sym.kl_avg > 0.0);
  }
}

TEST_CASE("class conditional kl sample floor") {
  FeatureMatrix d1 = tagged_matrix("a", 0.0, 1, 20);  // below the 30 minimum
  FeatureMatrix d2 = tagged_matrix("b", 0.0, 2, 20);
  CHECK_THROWS_AS(class_conditional_kl("tcp.window_size", d1, d2),
                  std::domain_error);

  // mixed: one class large enough, one skipped
  FeatureMatrix big1 = tagged_matrix("a", 0.0, 1, 60);
  FeatureMatrix small2 = tagged_matrix("b", 0.0, 2, 60);
  // shrink class c1 of small2 below the floor
  FeatureMatrix pruned;
  pruned.field_names = small2.field_names;
  pruned.label_names = small2.label_names;
  std::size_t kept_c1 = 0;
  for (std::size_t r = 0; r < small2.rows(); ++r) {
    if (small2.labels[r] == 1 && ++kept_c1 > 10) continue;
    pruned.cells.push_back(small2.cells[r]);
    pruned.labels.push_back(small2.labels[r]);
    pruned.dataset_tags.push_back(small2.dataset_tags[r]);
    pruned.session_index.push_back(small2.session_index[r]);
  }
  KlAvgRecord rec = class_conditional_kl("tcp.window_size", big1, pruned);
  CHECK(rec.per_class.size() == 1);
  REQUIRE(rec.skipped_classes.size() == 1);
  CHECK(rec.skipped_classes[0] == "c1");
}

TEST_CASE("filter by tag") {
  FeatureMatrix d1 = tagged_matrix("envA", 0.0, 1, 5);
  FeatureMatrix d2 = tagged_matrix("envB", 0.0, 2, 5);
  FeatureMatrix merged = d1;
  for (std::size_t r = 0; r < d2.rows(); ++r) {
    merged.cells.push_back(d2.cells[r]);
    merged.labels.push_back(d2.labels[r]);
    merged.dataset_tags.push_back(d2.dataset_tags[r]);
    merged.session_index.push_back(d2.session_index[r]);
  }
  FeatureMatrix back = filter_by_tag(merged, "envB");
  CHECK(back.rows() == d2.rows());
  for (const auto& t : back.dataset_tags) CHECK(t == "envB");
  CHECK(filter_by_tag(merged, "nope").rows() == 0);
}
