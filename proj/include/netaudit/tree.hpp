#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace netaudit {

struct TreeParams {
  std::size_t max_depth = 20;  // 0 = unbounded
  std::size_t min_samples_leaf = 2;
};

// Binary CART on byte features (0..255), Gini impurity, deterministic
// tie-breaking: lowest feature index, then lowest threshold.
class DecisionTree {
 public:
  void train(const std::vector<std::vector<std::uint8_t>>& X,
             const std::vector<int>& y, const TreeParams& params) {
    if (X.empty()) throw std::invalid_argument("empty training set");
    if (X.size() != y.size()) throw std::invalid_argument("X/y size mismatch");
    dims_ = X[0].size();
    n_classes_ = 0;
    for (int c : y) n_classes_ = std::max(n_classes_, std::size_t(c) + 1);
    params_ = params;
    nodes_.clear();
    std::vector<std::size_t> idx(X.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    build(X, y, idx, 0);
  }

  int predict(const std::vector<std::uint8_t>& x) const {
    if (x.size() != dims_)
      throw std::invalid_argument("feature dimension mismatch");
    std::size_t n = 0;
    while (!nodes_[n].is_leaf)
      n = x[nodes_[n].feature] <= nodes_[n].threshold ? nodes_[n].left
                                                      : nodes_[n].right;
    return nodes_[n].klass;
  }

  double accuracy(const std::vector<std::vector<std::uint8_t>>& X,
                  const std::vector<int>& y) const {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < X.size(); ++i)
      if (predict(X[i]) == y[i]) ++hits;
    return X.empty() ? 0.0 : double(hits) / double(X.size());
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    bool is_leaf = true;
    std::size_t feature = 0;
    std::uint8_t threshold = 0;  // goes left if x[feature] <= threshold
    std::size_t left = 0, right = 0;
    int klass = 0;
  };

  std::size_t build(const std::vector<std::vector<std::uint8_t>>& X,
                    const std::vector<int>& y,
                    const std::vector<std::size_t>& idx, std::size_t depth) {
    std::size_t self = nodes_.size();
    nodes_.emplace_back();

    std::vector<std::size_t> class_count(n_classes_, 0);
    for (std::size_t i : idx) ++class_count[std::size_t(y[i])];
    // leaf majority class, ties to the lowest class code
    std::size_t best_c = 0;
    for (std::size_t c = 1; c < n_classes_; ++c)
      if (class_count[c] > class_count[best_c]) best_c = c;
    nodes_[self].klass = int(best_c);

    bool pure = class_count[best_c] == idx.size();
    bool depth_stop = params_.max_depth != 0 && depth >= params_.max_depth;
    if (pure || depth_stop || idx.size() < 2 * params_.min_samples_leaf)
      return self;

    std::size_t feat;
    std::uint8_t thr;
    if (!best_split(X, y, idx, class_count, feat, thr)) return self;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
      (X[i][feat] <= thr ? left : right).push_back(i);
    if (left.size() < params_.min_samples_leaf ||
        right.size() < params_.min_samples_leaf)
      return self;

    nodes_[self].is_leaf = false;
    nodes_[self].feature = feat;
    nodes_[self].threshold = thr;
    std::size_t l = build(X, y, left, depth + 1);
    std::size_t r = build(X, y, right, depth + 1);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  bool best_split(const std::vector<std::vector<std::uint8_t>>& X,
                  const std::vector<int>& y, const std::vector<std::size_t>& idx,
                  const std::vector<std::size_t>& total_count,
                  std::size_t& out_feat, std::uint8_t& out_thr) const {
    double n = double(idx.size());
    double parent_gini = 1.0;
    for (std::size_t c = 0; c < n_classes_; ++c) {
      double p = double(total_count[c]) / n;
      parent_gini -= p * p;
    }
    double best_gain = 1e-12;
    bool found = false;
    std::vector<std::size_t> hist(256 * n_classes_);
    std::vector<std::size_t> left_count(n_classes_);
    for (std::size_t f = 0; f < dims_; ++f) {
      std::fill(hist.begin(), hist.end(), 0);
      std::uint8_t lo = 255, hi = 0;
      for (std::size_t i : idx) {
        std::uint8_t v = X[i][f];
        ++hist[std::size_t(v) * n_classes_ + std::size_t(y[i])];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo == hi) continue;
      std::fill(left_count.begin(), left_count.end(), 0);
      double nl = 0.0;
      for (std::size_t v = lo; v < hi; ++v) {
        for (std::size_t c = 0; c < n_classes_; ++c) {
          left_count[c] += hist[v * n_classes_ + c];
          nl += double(hist[v * n_classes_ + c]);
        }
        if (nl == 0.0 || nl == n) continue;
        double gl = 1.0, gr = 1.0;
        double nr = n - nl;
        for (std::size_t c = 0; c < n_classes_; ++c) {
          double pl = double(left_count[c]) / nl;
          double pr = double(total_count[c] - left_count[c]) / nr;
          gl -= pl * pl;
          gr -= pr * pr;
        }
        double gain = parent_gini - (nl / n) * gl - (nr / n) * gr;
        if (gain > best_gain) {
          best_gain = gain;
          out_feat = f;
          out_thr = std::uint8_t(v);
          found = true;
        }
      }
    }
    return found;
  }

  std::vector<Node> nodes_;
  std::size_t dims_ = 0;
  std::size_t n_classes_ = 0;
  TreeParams params_;
};

}  // namespace netaudit
