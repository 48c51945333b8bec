#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/core/random.hpp"
#include "ews/design_matrix.hpp"
#include "ews/learners/cart.hpp"

namespace ews::learners {

struct RandomForestConfig {
  int n_trees = 100;
  int mtry = 0;      // 0: ceil(p / 3)
  int min_leaf = 5;  // nodes with at most this many rows are not split
};

class RandomForestModel {
 public:
  std::vector<RegressionTree> trees;
  std::vector<double> importance;  // total SSE reduction per column
  Eigen::VectorXd oob_prediction;  // NaN where a row was never out of bag
  double oob_mse = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (auto& t : trees) s += t.predict(x.row(i));
      out(i) = s / static_cast<double>(trees.size());
    }
    return out;
  }
};

inline RandomForestModel fit_random_forest(const DesignMatrix& m, const Eigen::VectorXd& y,
                                           const RandomForestConfig& cfg, std::uint64_t seed) {
  const Eigen::Index n = m.rows(), p = m.cols();
  if (p == 0) throw ArgumentError("random forest needs at least one column");
  if (n < 10) throw ArgumentError("random forest needs at least 10 rows");
  if (cfg.n_trees < 1) throw ArgumentError("n_trees must be positive");

  CartOptions opts;
  opts.mtry = cfg.mtry > 0 ? cfg.mtry : static_cast<int>((p + 2) / 3);
  opts.min_node_size = cfg.min_leaf;

  RandomForestModel model;
  model.importance.assign(static_cast<std::size_t>(p), 0.0);
  Eigen::VectorXd oob_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd oob_cnt = Eigen::VectorXd::Zero(n);
  std::vector<char> in_bag(static_cast<std::size_t>(n));
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng = make_rng(seed, {0x7266ULL, static_cast<std::uint64_t>(t)});
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    std::fill(in_bag.begin(), in_bag.end(), 0);
    for (auto& r : rows) {
      r = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
      in_bag[static_cast<std::size_t>(r)] = 1;
    }
    model.trees.push_back(build_cart(m.values, m.columns, y, std::move(rows), opts, &rng, &model.importance));
    for (Eigen::Index i = 0; i < n; ++i)
      if (!in_bag[static_cast<std::size_t>(i)]) {
        oob_sum(i) += model.trees.back().predict(m.values.row(i));
        oob_cnt(i) += 1.0;
      }
  }
  model.oob_prediction = Eigen::VectorXd::Constant(n, std::nan(""));
  double se = 0.0;
  int counted = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (oob_cnt(i) > 0) {
      model.oob_prediction(i) = oob_sum(i) / oob_cnt(i);
      se += std::pow(model.oob_prediction(i) - y(i), 2);
      ++counted;
    }
  model.oob_mse = counted ? se / counted : std::nan("");
  return model;
}

}  // namespace ews::learners
