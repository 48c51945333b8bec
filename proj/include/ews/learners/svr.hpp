#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/design_matrix.hpp"

namespace ews::learners {

// epsilon-insensitive support vector regression with an RBF kernel, solved by
// SMO with second-order working-set selection. Inputs and targets are
// standardized internally; `epsilon` and `C` act on the standardized target.
struct SvrConfig {
  double C = 5.0;
  double epsilon = 0.1;
  double gamma = 0.0;  // 0: 1 / median squared pairwise distance
  double tolerance = 1e-3;
  long max_iterations = 0;  // 0: max(1e6, 200 n)
};

class SvrModel {
 public:
  Eigen::MatrixXd support;  // scaled training rows with nonzero coefficient
  Eigen::VectorXd coef;     // alpha - alpha*, within [-C, C]
  Eigen::VectorXd all_coef;
  double rho = 0.0;
  double gamma = 1.0;
  Eigen::RowVectorXd x_center, x_scale;
  double y_center = 0.0, y_scale = 1.0;
  double kkt_violation = 0.0;
  long iterations = 0;

  Eigen::VectorXd decision(const Eigen::MatrixXd& scaled) const {
    Eigen::VectorXd out(scaled.rows());
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < support.rows(); ++j)
        s += coef(j) * std::exp(-gamma * (scaled.row(i) - support.row(j)).squaredNorm());
      out(i) = s - rho;
    }
    return out;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z = (x.rowwise() - x_center).array().rowwise() / x_scale.array();
    return (decision(z).array() * y_scale + y_center).matrix();
  }
};

inline double median_heuristic_gamma(const Eigen::MatrixXd& z) {
  std::vector<double> d2;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) d2.push_back((z.row(i) - z.row(j)).squaredNorm());
  if (d2.empty()) return 1.0;
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  return *mid > 0.0 ? 1.0 / *mid : 1.0;
}

inline SvrModel fit_svr(const DesignMatrix& m, const Eigen::VectorXd& y, const SvrConfig& cfg = {}) {
  if (!m.all_numeric()) throw ArgumentError("SVR needs an all-numeric matrix; apply one_hot first");
  const Eigen::Index n = m.rows();
  if (n < 2) throw ArgumentError("SVR needs at least 2 rows");
  if (!(cfg.C > 0.0) || !(cfg.epsilon >= 0.0)) throw ArgumentError("SVR needs C > 0 and epsilon >= 0");

  SvrModel model;
  model.x_center = m.values.colwise().mean();
  Eigen::MatrixXd z = m.values.rowwise() - model.x_center;
  model.x_scale = Eigen::RowVectorXd::Ones(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n - 1));
    if (sd > 0.0) model.x_scale(j) = sd;
  }
  z = z.array().rowwise() / model.x_scale.array();
  model.y_center = y.mean();
  double ysd = std::sqrt((y.array() - model.y_center).square().sum() / static_cast<double>(n - 1));
  model.y_scale = ysd > 0.0 ? ysd : 1.0;
  Eigen::VectorXd t = (y.array() - model.y_center) / model.y_scale;
  model.gamma = cfg.gamma > 0.0 ? cfg.gamma : median_heuristic_gamma(z);

  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) K(i, j) = K(j, i) = std::exp(-model.gamma * (z.row(i) - z.row(j)).squaredNorm());

  // 2n-variable dual: alpha_t for t < n carries sign +1, t >= n sign -1.
  const Eigen::Index l = 2 * n;
  const double C = cfg.C;
  std::vector<double> alpha(static_cast<std::size_t>(l), 0.0), G(static_cast<std::size_t>(l));
  std::vector<int> sign(static_cast<std::size_t>(l));
  for (Eigen::Index i = 0; i < n; ++i) {
    sign[static_cast<std::size_t>(i)] = 1;
    sign[static_cast<std::size_t>(i + n)] = -1;
    G[static_cast<std::size_t>(i)] = cfg.epsilon - t(i);
    G[static_cast<std::size_t>(i + n)] = cfg.epsilon + t(i);
  }
  auto kern = [&](Eigen::Index a, Eigen::Index b) { return K(a % n, b % n); };
  auto q = [&](Eigen::Index a, Eigen::Index b) {
    return sign[static_cast<std::size_t>(a)] * sign[static_cast<std::size_t>(b)] * kern(a, b);
  };
  auto is_up = [&](Eigen::Index a) {
    auto s = static_cast<std::size_t>(a);
    return (sign[s] == 1 && alpha[s] < C) || (sign[s] == -1 && alpha[s] > 0.0);
  };
  auto is_low = [&](Eigen::Index a) {
    auto s = static_cast<std::size_t>(a);
    return (sign[s] == 1 && alpha[s] > 0.0) || (sign[s] == -1 && alpha[s] < C);
  };
  constexpr double tau = 1e-12;

  const long max_iter = cfg.max_iterations > 0 ? cfg.max_iterations : std::max<long>(1000000, 200 * n);
  long iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (;; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index a = 0; a < l; ++a)
      if (is_up(a) && -sign[static_cast<std::size_t>(a)] * G[static_cast<std::size_t>(a)] >= gmax) {
        if (-sign[static_cast<std::size_t>(a)] * G[static_cast<std::size_t>(a)] > gmax || i < 0) {
          gmax = -sign[static_cast<std::size_t>(a)] * G[static_cast<std::size_t>(a)];
          i = a;
        }
      }
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < l; ++b) {
      if (!is_low(b)) continue;
      double yg = sign[static_cast<std::size_t>(b)] * G[static_cast<std::size_t>(b)];
      gmax2 = std::max(gmax2, yg);
      if (i < 0) continue;
      double grad_diff = gmax + yg;
      if (grad_diff > 0.0) {
        double quad = kern(i, i) + kern(b, b) - 2.0 * kern(i, b);
        if (quad <= 0.0) quad = tau;
        double obj = -grad_diff * grad_diff / quad;
        if (obj <= best_obj) {
          best_obj = obj;
          j = b;
        }
      }
    }
    gap = gmax + gmax2;
    if (i < 0 || j < 0 || gap < cfg.tolerance) break;
    if (iter >= max_iter)
      throw ConvergenceError("SVR SMO did not converge in " + std::to_string(max_iter) +
                                 " iterations; KKT gap " + std::to_string(gap),
                             gap);

    auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
    double old_i = alpha[si], old_j = alpha[sj];
    double qij = q(i, j);
    if (sign[si] != sign[sj]) {
      double quad = kern(i, i) + kern(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      double delta = (-G[si] - G[sj]) / quad;
      double diff = alpha[si] - alpha[sj];
      alpha[si] += delta;
      alpha[sj] += delta;
      if (diff > 0.0) {
        if (alpha[sj] < 0.0) { alpha[sj] = 0.0; alpha[si] = diff; }
      } else {
        if (alpha[si] < 0.0) { alpha[si] = 0.0; alpha[sj] = -diff; }
      }
      if (diff > 0.0) {
        if (alpha[si] > C) { alpha[si] = C; alpha[sj] = C - diff; }
      } else {
        if (alpha[sj] > C) { alpha[sj] = C; alpha[si] = C + diff; }
      }
    } else {
      double quad = kern(i, i) + kern(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      double delta = (G[si] - G[sj]) / quad;
      double sum = alpha[si] + alpha[sj];
      alpha[si] -= delta;
      alpha[sj] += delta;
      if (sum > C) {
        if (alpha[si] > C) { alpha[si] = C; alpha[sj] = sum - C; }
      } else {
        if (alpha[sj] < 0.0) { alpha[sj] = 0.0; alpha[si] = sum; }
      }
      if (sum > C) {
        if (alpha[sj] > C) { alpha[sj] = C; alpha[si] = sum - C; }
      } else {
        if (alpha[si] < 0.0) { alpha[si] = 0.0; alpha[sj] = sum; }
      }
    }
    double di = alpha[si] - old_i, dj = alpha[sj] - old_j;
    for (Eigen::Index k = 0; k < l; ++k) G[static_cast<std::size_t>(k)] += q(i, k) * di + q(j, k) * dj;
  }
  model.iterations = iter;
  model.kkt_violation = std::isfinite(gap) ? std::max(0.0, gap) : 0.0;

  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index a = 0; a < l; ++a) {
    auto s = static_cast<std::size_t>(a);
    double yg = sign[s] * G[s];
    if (alpha[s] >= C) {
      if (sign[s] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[s] <= 0.0) {
      if (sign[s] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  model.rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

  model.all_coef.resize(n);
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i) {
    model.all_coef(i) = alpha[static_cast<std::size_t>(i)] - alpha[static_cast<std::size_t>(i + n)];
    if (model.all_coef(i) != 0.0) sv.push_back(i);
  }
  model.support.resize(static_cast<Eigen::Index>(sv.size()), z.cols());
  model.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    model.support.row(static_cast<Eigen::Index>(k)) = z.row(sv[k]);
    model.coef(static_cast<Eigen::Index>(k)) = model.all_coef(sv[k]);
  }
  return model;
}

}  // namespace ews::learners
