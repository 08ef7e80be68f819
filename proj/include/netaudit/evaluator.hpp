#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "netaudit/common.hpp"
#include "netaudit/occlusion.hpp"
#include "netaudit/tree.hpp"

namespace netaudit {

struct EvalProtocol {
  std::size_t max_flows_per_class = 500;
  bool per_class_sampling = true;  // false: cap applies per dataset
  std::size_t repeats = 3;
  std::uint64_t seed = 0;
  std::size_t min_flows_per_class = 10;
  std::vector<std::size_t> depth_grid = {5, 10, 20, 0};  // 0 = unbounded
  TreeParams tree;
  unsigned threads = 1;
};

struct ClassSplitAudit {
  std::string class_name;
  std::size_t sampled = 0;
  std::size_t train = 0, val = 0, test = 0;
};

struct RepeatResult {
  double test_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::size_t chosen_depth = 0;
  std::vector<ClassSplitAudit> split_audit;
};

struct AccuracyReport {
  std::string strategy;  // "none", "zero", "relative", "random"
  std::vector<std::string> targets;
  double mean_accuracy = 0.0;
  std::vector<RepeatResult> repeats;
  std::vector<std::string> dropped_classes;  // below the per-class minimum
};

namespace detail {

inline std::vector<std::vector<std::uint8_t>> flatten_tensors(
    const std::vector<SessionTensor>& tensors,
    const std::optional<OcclusionSpec>& spec, unsigned threads) {
  std::vector<std::vector<std::uint8_t>> X(tensors.size());
  parallel_for(tensors.size(), threads, [&](std::size_t i) {
    if (spec) {
      X[i] = apply_occlusion(tensors[i], *spec).tensor.flat();
    } else {
      X[i] = tensors[i].flat();
    }
  });
  return X;
}

}  // namespace detail

// Per repeat: sample at most max_flows_per_class per class, split 8:1:1
// stratified, occlude all partitions, select depth on validation, report test
// accuracy; mean over repeats.
inline AccuracyReport evaluate_strategy(const std::vector<SessionTensor>& tensors,
                                        const std::optional<OcclusionSpec>& spec,
                                        const EvalProtocol& protocol) {
  AccuracyReport report;
  report.strategy = spec ? strategy_name(spec->strategy) : "none";
  if (spec) report.targets = spec->targets;

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    by_class[tensors[i].label].push_back(i);
  std::map<std::string, int> code_of;
  std::vector<std::string> kept_classes;
  for (auto& [cls, idx] : by_class) {
    if (idx.size() < protocol.min_flows_per_class) {
      report.dropped_classes.push_back(cls);
      continue;
    }
    code_of[cls] = int(kept_classes.size());
    kept_classes.push_back(cls);
  }
  if (kept_classes.size() < 2)
    throw std::domain_error("evaluation needs at least 2 classes");

  // occlusion is deterministic per session id, so occluded features are
  // computed once and shared by every repeat and partition
  std::vector<std::vector<std::uint8_t>> X =
      detail::flatten_tensors(tensors, spec, protocol.threads);

  for (std::size_t rep = 0; rep < protocol.repeats; ++rep) {
    std::mt19937_64 rng(derive_seed(protocol.seed, rep));
    std::vector<std::size_t> train_idx, val_idx, test_idx;
    RepeatResult rr;
    std::size_t dataset_budget = protocol.max_flows_per_class;
    for (const auto& cls : kept_classes) {
      std::vector<std::size_t> idx = by_class[cls];
      for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng() % i]);
      std::size_t cap = protocol.per_class_sampling
                            ? protocol.max_flows_per_class
                            : std::min(dataset_budget, idx.size());
      std::size_t n = std::min(idx.size(), cap);
      if (!protocol.per_class_sampling) dataset_budget -= n;
      idx.resize(n);
      std::size_t n_val = (n + 5) / 10;  // rounded tenth keeps every
      std::size_t n_test = (n + 5) / 10;  // partition within ±1 of 8:1:1
      std::size_t n_train = n - n_val - n_test;
      ClassSplitAudit audit{cls, n, n_train, n_val, n_test};
      rr.split_audit.push_back(audit);
      for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train)
          train_idx.push_back(idx[i]);
        else if (i < n_train + n_val)
          val_idx.push_back(idx[i]);
        else
          test_idx.push_back(idx[i]);
      }
    }

    auto gather = [&](const std::vector<std::size_t>& ids) {
      std::pair<std::vector<std::vector<std::uint8_t>>, std::vector<int>> out;
      for (std::size_t i : ids) {
        out.first.push_back(X[i]);
        out.second.push_back(code_of.at(tensors[i].label));
      }
      return out;
    };
    auto [Xtr, ytr] = gather(train_idx);
    auto [Xva, yva] = gather(val_idx);
    auto [Xte, yte] = gather(test_idx);

    double best_val = -1.0;
    DecisionTree best_tree;
    for (std::size_t depth : protocol.depth_grid) {
      TreeParams p = protocol.tree;
      p.max_depth = depth;
      DecisionTree tree;
      tree.train(Xtr, ytr, p);
      double va = Xva.empty() ? tree.accuracy(Xtr, ytr) : tree.accuracy(Xva, yva);
      if (va > best_val) {
        best_val = va;
        best_tree = tree;
        rr.chosen_depth = depth;
      }
    }
    rr.val_accuracy = best_val;
    rr.test_accuracy = Xte.empty() ? 0.0 : best_tree.accuracy(Xte, yte);
    report.repeats.push_back(std::move(rr));
  }

  for (const auto& rr : report.repeats) report.mean_accuracy += rr.test_accuracy;
  report.mean_accuracy /= double(report.repeats.size());
  return report;
}

}  // namespace netaudit
