#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/design_matrix.hpp"

namespace ews::learners {

enum class KnnKernel { rectangular, triangular };

inline std::string kernel_name(KnnKernel k) { return k == KnnKernel::rectangular ? "rectangular" : "triangular"; }

// Weighted k-nearest neighbours under Manhattan distance on sd-scaled
// columns. Distances are normalised by the (k+1)-th neighbour distance before
// the kernel is applied. k and kernel are chosen by leave-one-out MSE unless
// `k` is fixed.
struct KnnConfig {
  int kmax = 15;
  std::optional<int> k;
  std::vector<KnnKernel> kernels{KnnKernel::rectangular, KnnKernel::triangular};
};

namespace detail {

struct Neighbour {
  double distance;
  Eigen::Index row;
};

inline double manhattan(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  double d = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) d += std::abs(a(i, c) - b(j, c));
  return d;
}

// Neighbours sorted by (distance, row order).
inline std::vector<Neighbour> sorted_neighbours(const Eigen::MatrixXd& train, const Eigen::MatrixXd& queries,
                                                Eigen::Index q, Eigen::Index exclude = -1) {
  std::vector<Neighbour> nb;
  nb.reserve(static_cast<std::size_t>(train.rows()));
  for (Eigen::Index j = 0; j < train.rows(); ++j)
    if (j != exclude) nb.push_back({manhattan(queries, q, train, j), j});
  std::stable_sort(nb.begin(), nb.end(), [](const Neighbour& a, const Neighbour& b) { return a.distance < b.distance; });
  return nb;
}

inline double kernel_estimate(const std::vector<Neighbour>& nb, const Eigen::VectorXd& y, int k, KnnKernel kernel) {
  const auto kk = static_cast<std::size_t>(k);
  double maxdist = nb.size() > kk ? nb[kk].distance : nb[kk - 1].distance;
  if (maxdist < 1e-6) maxdist = 1e-6;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < kk; ++i) {
    double w = kernel == KnnKernel::rectangular ? 1.0 : std::max(0.0, 1.0 - nb[i].distance / maxdist);
    num += w * y(nb[i].row);
    den += w;
  }
  if (den <= 0.0) {
    num = 0.0;
    for (std::size_t i = 0; i < kk; ++i) num += y(nb[i].row);
    return num / static_cast<double>(kk);
  }
  return num / den;
}

}  // namespace detail

class KnnModel {
 public:
  Eigen::MatrixXd train;  // scaled
  Eigen::VectorXd y;
  Eigen::RowVectorXd scale;
  int k = 1;
  KnnKernel kernel = KnnKernel::rectangular;
  double loo_mse = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd q = x.array().rowwise() / scale.array();
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out(i) = detail::kernel_estimate(detail::sorted_neighbours(train, q, i), y, k, kernel);
    return out;
  }
};

inline KnnModel fit_knn(const DesignMatrix& m, const Eigen::VectorXd& y, const KnnConfig& cfg = {}) {
  if (!m.all_numeric()) throw ArgumentError("KNN needs an all-numeric matrix; apply one_hot first");
  if (cfg.kernels.empty()) throw ArgumentError("KNN needs at least one kernel");
  const Eigen::Index n = m.rows();
  KnnModel model;
  model.scale = Eigen::RowVectorXd::Ones(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    double mu = m.values.col(j).mean();
    double sd = n > 1 ? std::sqrt((m.values.col(j).array() - mu).square().sum() / static_cast<double>(n - 1)) : 0.0;
    if (sd > 0.0) model.scale(j) = sd;
  }
  model.train = m.values.array().rowwise() / model.scale.array();
  model.y = y;

  if (cfg.k) {
    if (*cfg.k < 1 || *cfg.k > n)
      throw ArgumentError("k=" + std::to_string(*cfg.k) + " exceeds the " + std::to_string(n) + " training rows");
    model.k = *cfg.k;
    model.kernel = cfg.kernels.front();
    return model;
  }
  if (n < 3) throw ArgumentError("KNN leave-one-out selection needs at least 3 rows");
  const int kmax = std::min<int>(cfg.kmax, static_cast<int>(n) - 2);
  if (kmax < 1) throw ArgumentError("kmax must be positive");

  const std::size_t nk = cfg.kernels.size();
  std::vector<double> sse(static_cast<std::size_t>(kmax) * nk, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto nb = detail::sorted_neighbours(model.train, model.train, i, i);
    for (int k = 1; k <= kmax; ++k)
      for (std::size_t kk = 0; kk < nk; ++kk) {
        double e = detail::kernel_estimate(nb, y, k, cfg.kernels[kk]) - y(i);
        sse[static_cast<std::size_t>(k - 1) * nk + kk] += e * e;
      }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < sse.size(); ++c)
    if (sse[c] < sse[best]) best = c;
  model.k = static_cast<int>(best / nk) + 1;
  model.kernel = cfg.kernels[best % nk];
  model.loo_mse = sse[best] / static_cast<double>(n);
  return model;
}

}  // namespace ews::learners
