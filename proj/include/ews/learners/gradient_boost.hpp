#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/design_matrix.hpp"
#include "ews/learners/cart.hpp"

namespace ews::learners {

// Squared-error stagewise boosting of depth-limited trees.
struct GradientBoostConfig {
  double eta = 0.5;
  int max_depth = 4;
  int rounds = 0;  // 0: ceil(sqrt(p)) with p the encoded column count
};

inline int boosting_rounds(const GradientBoostConfig& cfg, long p) {
  if (cfg.rounds > 0) return cfg.rounds;
  return std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p)))));
}

class GradientBoostModel {
 public:
  double base = 0.0;
  double eta = 0.5;
  std::vector<RegressionTree> trees;
  std::vector<double> training_mse;  // entry 0: before any round
  std::vector<double> importance;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), base);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (auto& t : trees) out(i) += eta * t.predict(x.row(i));
    return out;
  }
};

inline GradientBoostModel fit_gradient_boost(const DesignMatrix& m, const Eigen::VectorXd& y,
                                             const GradientBoostConfig& cfg) {
  if (!m.all_numeric())
    throw ArgumentError("gradient boosting needs an all-numeric matrix; apply one_hot first");
  if (m.rows() < 1) throw ArgumentError("gradient boosting needs at least one row");
  if (!(cfg.eta > 0.0 && cfg.eta <= 1.0)) throw ArgumentError("eta must lie in (0, 1]");
  const Eigen::Index n = m.rows();

  GradientBoostModel model;
  model.eta = cfg.eta;
  model.base = y.mean();
  model.importance.assign(static_cast<std::size_t>(m.cols()), 0.0);
  Eigen::VectorXd fitted = Eigen::VectorXd::Constant(n, model.base);
  Eigen::VectorXd residual = y - fitted;
  model.training_mse.push_back(residual.squaredNorm() / static_cast<double>(n));

  CartOptions opts;
  opts.max_depth = cfg.max_depth;
  opts.min_node_size = 1;
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;

  const int rounds = boosting_rounds(cfg, m.cols());
  for (int r = 0; r < rounds; ++r) {
    auto tree = build_cart(m.values, m.columns, residual, rows, opts, nullptr, &model.importance);
    for (Eigen::Index i = 0; i < n; ++i) fitted(i) += cfg.eta * tree.predict(m.values.row(i));
    residual = y - fitted;
    model.training_mse.push_back(residual.squaredNorm() / static_cast<double>(n));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace ews::learners
