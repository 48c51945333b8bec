#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/design_matrix.hpp"

namespace ews::learners {

// Principal components regression. Components are taken in variance order;
// the first component that explains less than `var_floor` percent, or pushes
// the cumulative share past `var_cap` percent, is the last one kept.
struct PcrConfig {
  double var_floor = 1.0;
  double var_cap = 90.0;
  bool retain_all = false;
  bool scale = false;  // centre only, unless set
};

class PcrModel {
 public:
  Eigen::RowVectorXd center;
  Eigen::RowVectorXd scale;
  Eigen::VectorXd coef;  // in original (centred, scaled) column space
  double intercept = 0.0;
  int components = 0;
  Eigen::VectorXd component_variance;   // all components, descending
  Eigen::VectorXd explained_percent;    // all components

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z = (x.rowwise() - center).array().rowwise() / scale.array();
    return (z * coef).array() + intercept;
  }
};

inline int pcr_component_count(const Eigen::VectorXd& explained_percent, int rank, const PcrConfig& cfg) {
  if (cfg.retain_all) return rank;
  double total = 0.0;
  for (int j = 0; j < rank; ++j) {
    total += explained_percent(j);
    if (explained_percent(j) < cfg.var_floor || total > cfg.var_cap) return j + 1;
  }
  return rank;
}

inline PcrModel fit_pcr(const DesignMatrix& m, const Eigen::VectorXd& y, const PcrConfig& cfg = {}) {
  if (!m.all_numeric()) throw ArgumentError("PCR needs an all-numeric matrix; apply one_hot first");
  const Eigen::Index n = m.rows(), p = m.cols();
  if (n < 2 || p < 1) throw ArgumentError("PCR needs at least 2 rows and 1 column");

  PcrModel model;
  model.center = m.values.colwise().mean();
  Eigen::MatrixXd xc = m.values.rowwise() - model.center;
  model.scale = Eigen::RowVectorXd::Ones(p);
  if (cfg.scale) {
    for (Eigen::Index j = 0; j < p; ++j) {
      double sd = std::sqrt(xc.col(j).squaredNorm() / static_cast<double>(n - 1));
      model.scale(j) = sd > 0.0 ? sd : 1.0;
    }
    xc = xc.array().rowwise() / model.scale.array();
  }
  double ybar = y.mean();
  Eigen::VectorXd yc = y.array() - ybar;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  double total = s.squaredNorm();
  if (!(total > 0.0)) throw ArgumentError("PCR design has zero variance");
  int rank = 0;
  for (Eigen::Index j = 0; j < s.size(); ++j)
    if (s(j) > 1e-10 * s(0)) ++rank;
  model.component_variance = s.array().square() / static_cast<double>(n - 1);
  model.explained_percent = 100.0 * s.array().square() / total;
  model.components = pcr_component_count(model.explained_percent, rank, cfg);

  const int k = model.components;
  // Scores t_j = u_j s_j are orthogonal: gamma_j = u_j'y / s_j.
  Eigen::VectorXd gamma = (svd.matrixU().leftCols(k).transpose() * yc).array() / s.head(k).array();
  model.coef = svd.matrixV().leftCols(k) * gamma;
  model.intercept = ybar;
  return model;
}

}  // namespace ews::learners
