#pragma once

// CART regression trees shared by the random forest and gradient boosting.
// Numeric splits are `x <= threshold`; categorical splits send a level
// subset left.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ews/core/random.hpp"
#include "ews/design_matrix.hpp"

namespace ews::learners {

struct TreeNode {
  int feature = -1;  // -1 for leaves
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t left_levels = 0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  int depth = 0;

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
 public:
  std::vector<TreeNode> nodes;

  template <class Row>
  int leaf_of(const Row& row) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& nd = nodes[static_cast<std::size_t>(i)];
      double v = row(nd.feature);
      bool go_left = nd.categorical ? ((nd.left_levels >> static_cast<int>(v)) & 1ULL) != 0 : v <= nd.threshold;
      i = go_left ? nd.left : nd.right;
    }
    return i;
  }

  template <class Row>
  double predict(const Row& row) const {
    return nodes[static_cast<std::size_t>(leaf_of(row))].value;
  }

  int depth() const {
    int d = 0;
    for (auto& n : nodes) d = std::max(d, n.depth);
    return d;
  }

  int leaf_count() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](auto& n) { return n.is_leaf(); }));
  }
};

struct CartOptions {
  int max_depth = -1;      // -1: unlimited
  int min_node_size = 1;   // nodes with at most this many rows become leaves
  int mtry = 0;            // features tried per split; 0 = all
};

namespace detail {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t left_levels = 0;
};

class CartBuilder {
 public:
  CartBuilder(const Eigen::MatrixXd& x, const std::vector<ColumnInfo>& columns, const Eigen::VectorXd& y,
              const CartOptions& opts, Rng* rng, std::vector<double>* importance)
      : x_(x), columns_(columns), y_(y), opts_(opts), rng_(rng), importance_(importance) {
    features_.resize(static_cast<std::size_t>(x.cols()));
    std::iota(features_.begin(), features_.end(), 0);
  }

  RegressionTree build(std::vector<Eigen::Index> rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<Eigen::Index>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    double sum = 0.0;
    for (auto r : rows) sum += y_(r);
    const double n = static_cast<double>(rows.size());
    tree_.nodes[static_cast<std::size_t>(id)].value = sum / n;
    tree_.nodes[static_cast<std::size_t>(id)].depth = depth;

    if (static_cast<int>(rows.size()) <= opts_.min_node_size || rows.size() < 2) return id;
    if (opts_.max_depth >= 0 && depth >= opts_.max_depth) return id;

    auto split = best_split(rows, sum);
    if (split.feature < 0 || !(split.gain > 1e-12 * std::max(1.0, sum * sum / n))) return id;
    if (importance_) (*importance_)[static_cast<std::size_t>(split.feature)] += split.gain;

    std::vector<Eigen::Index> left, right;
    for (auto r : rows) {
      double v = x_(r, split.feature);
      bool go_left = split.categorical ? ((split.left_levels >> static_cast<int>(v)) & 1ULL) != 0 : v <= split.threshold;
      (go_left ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    int l = grow(left, depth + 1);
    int r = grow(right, depth + 1);
    auto& nd = tree_.nodes[static_cast<std::size_t>(id)];
    nd.feature = split.feature;
    nd.categorical = split.categorical;
    nd.threshold = split.threshold;
    nd.left_levels = split.left_levels;
    nd.left = l;
    nd.right = r;
    return id;
  }

  SplitCandidate best_split(const std::vector<Eigen::Index>& rows, double total) {
    const int p = static_cast<int>(features_.size());
    int tries = opts_.mtry > 0 ? std::min(opts_.mtry, p) : p;
    if (tries < p && rng_) {
      for (int i = 0; i < tries; ++i) {
        int j = i + static_cast<int>(uniform_index(*rng_, static_cast<std::size_t>(p - i)));
        std::swap(features_[static_cast<std::size_t>(i)], features_[static_cast<std::size_t>(j)]);
      }
    }
    const double n = static_cast<double>(rows.size());
    const double parent = total * total / n;
    SplitCandidate best;
    for (int t = 0; t < tries; ++t) {
      int f = features_[static_cast<std::size_t>(t)];
      const auto& col = columns_[static_cast<std::size_t>(f)];
      if (col.kind == ColumnKind::categorical) categorical_split(rows, f, col.n_levels(), total, parent, best);
      else numeric_split(rows, f, total, parent, best);
    }
    return best;
  }

  void numeric_split(const std::vector<Eigen::Index>& rows, int f, double total, double parent, SplitCandidate& best) {
    buf_.clear();
    for (auto r : rows) buf_.push_back({x_(r, f), y_(r)});
    std::sort(buf_.begin(), buf_.end(), [](auto& a, auto& b) { return a.first < b.first; });
    const std::size_t n = buf_.size();
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += buf_[i].second;
      if (buf_[i].first == buf_[i + 1].first) continue;
      double nl = static_cast<double>(i + 1), nr = static_cast<double>(n - i - 1);
      double right_sum = total - left_sum;
      double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
      if (gain > best.gain) {
        best = {gain, f, false, 0.5 * (buf_[i].first + buf_[i + 1].first), 0};
      }
    }
  }

  void categorical_split(const std::vector<Eigen::Index>& rows, int f, int levels, double total, double parent,
                         SplitCandidate& best) {
    std::vector<double> sum(static_cast<std::size_t>(levels), 0.0), cnt(static_cast<std::size_t>(levels), 0.0);
    for (auto r : rows) {
      auto lv = static_cast<std::size_t>(x_(r, f));
      sum[lv] += y_(r);
      cnt[lv] += 1.0;
    }
    std::vector<int> present;
    for (int lv = 0; lv < levels; ++lv)
      if (cnt[static_cast<std::size_t>(lv)] > 0) present.push_back(lv);
    if (present.size() < 2) return;
    // Ordering levels by mean response makes the prefix scan optimal for
    // squared error.
    std::stable_sort(present.begin(), present.end(), [&](int a, int b) {
      return sum[static_cast<std::size_t>(a)] / cnt[static_cast<std::size_t>(a)] <
             sum[static_cast<std::size_t>(b)] / cnt[static_cast<std::size_t>(b)];
    });
    const double n = static_cast<double>(rows.size());
    double ls = 0.0, lc = 0.0;
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i + 1 < present.size(); ++i) {
      auto lv = static_cast<std::size_t>(present[i]);
      ls += sum[lv];
      lc += cnt[lv];
      mask |= 1ULL << present[i];
      double rs = total - ls, rc = n - lc;
      double gain = ls * ls / lc + rs * rs / rc - parent;
      if (gain > best.gain) best = {gain, f, true, 0.0, mask};
    }
  }

  const Eigen::MatrixXd& x_;
  const std::vector<ColumnInfo>& columns_;
  const Eigen::VectorXd& y_;
  CartOptions opts_;
  Rng* rng_;
  std::vector<double>* importance_;
  std::vector<int> features_;
  std::vector<std::pair<double, double>> buf_;
  RegressionTree tree_;
};

}  // namespace detail

// Grows a tree on `rows` (duplicates allowed, as for bootstrap samples).
// Split gains are accumulated into `importance` when given.
inline RegressionTree build_cart(const Eigen::MatrixXd& x, const std::vector<ColumnInfo>& columns,
                                 const Eigen::VectorXd& y, std::vector<Eigen::Index> rows, const CartOptions& opts,
                                 Rng* rng = nullptr, std::vector<double>* importance = nullptr) {
  detail::CartBuilder b(x, columns, y, opts, rng, importance);
  return b.build(std::move(rows));
}

}  // namespace ews::learners
