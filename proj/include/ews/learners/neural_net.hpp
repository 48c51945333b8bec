#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/core/random.hpp"
#include "ews/design_matrix.hpp"

namespace ews::learners {

// Single hidden layer (logistic) network with a linear output and L2 weight
// decay on every weight, trained by L-BFGS. (size, decay) is picked by inner
// k-fold CV on the training rows.
struct NeuralNetConfig {
  std::vector<int> sizes{4, 9};
  std::vector<double> decays{0.05, 0.5, 0.75};
  int max_iter = 500;
  int inner_folds = 5;
  double init_range = 0.7;
  double rel_tolerance = 1e-8;
};

// Flat parameter layout: W1 (hidden x p, row-major), b1 (hidden), w2 (hidden), b2.
inline Eigen::Index nn_parameter_count(Eigen::Index p, int hidden) { return hidden * (p + 1) + hidden + 1; }

// Objective sum((f - y)^2) + decay * |w|^2 and its gradient.
inline double nn_objective(const Eigen::VectorXd& w, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int hidden,
                           double decay, Eigen::VectorXd* grad) {
  const Eigen::Index p = x.cols(), h = hidden;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W1(w.data(), h, p);
  Eigen::Map<const Eigen::VectorXd> b1(w.data() + h * p, h);
  Eigen::Map<const Eigen::VectorXd> w2(w.data() + h * p + h, h);
  const double b2 = w(h * p + 2 * h);

  Eigen::MatrixXd act = (x * W1.transpose()).rowwise() + b1.transpose();
  Eigen::MatrixXd hid = (1.0 + (-act.array()).exp()).inverse().matrix();
  Eigen::VectorXd out = (hid * w2).array() + b2;
  Eigen::VectorXd resid = out - y;
  double loss = resid.squaredNorm() + decay * w.squaredNorm();
  if (grad) {
    grad->resize(w.size());
    Eigen::VectorXd r2 = 2.0 * resid;
    Eigen::MatrixXd d_act = ((r2 * w2.transpose()).array() * hid.array() * (1.0 - hid.array())).matrix();
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gW1(grad->data(), h, p);
    gW1 = d_act.transpose() * x;
    grad->segment(h * p, h) = d_act.colwise().sum().transpose();
    grad->segment(h * p + h, h) = hid.transpose() * r2;
    (*grad)(h * p + 2 * h) = r2.sum();
    *grad += 2.0 * decay * w;
  }
  return loss;
}

inline Eigen::VectorXd nn_forward(const Eigen::VectorXd& w, const Eigen::MatrixXd& x, int hidden) {
  const Eigen::Index p = x.cols(), h = hidden;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W1(w.data(), h, p);
  Eigen::Map<const Eigen::VectorXd> b1(w.data() + h * p, h);
  Eigen::Map<const Eigen::VectorXd> w2(w.data() + h * p + h, h);
  Eigen::MatrixXd act = (x * W1.transpose()).rowwise() + b1.transpose();
  Eigen::MatrixXd hid = (1.0 + (-act.array()).exp()).inverse().matrix();
  return (hid * w2).array() + w(h * p + 2 * h);
}

struct NnTrainResult {
  Eigen::VectorXd weights;
  double loss = 0.0;
  int iterations = 0;
};

// L-BFGS (memory 10) with Armijo backtracking.
inline NnTrainResult train_network(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int hidden, double decay,
                                   const NeuralNetConfig& cfg, Rng& rng) {
  const Eigen::Index dim = nn_parameter_count(x.cols(), hidden);
  Eigen::VectorXd w(dim);
  for (Eigen::Index i = 0; i < dim; ++i) w(i) = (2.0 * uniform01(rng) - 1.0) * cfg.init_range;

  Eigen::VectorXd g;
  double f = nn_objective(w, x, y, hidden, decay, &g);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    if (!std::isfinite(f)) break;
    // Two-loop recursion.
    Eigen::VectorXd qv = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(qv);
      qv -= alpha[k] * y_hist[k];
    }
    double gamma = s_hist.empty() ? 1.0 / std::max(1.0, g.norm()) : s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    Eigen::VectorXd dir = gamma * qv;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      double beta = rho_hist[k] * y_hist[k].dot(dir);
      dir += s_hist[k] * (alpha[k] - beta);
    }
    dir = -dir;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
    }
    if (slope > -1e-300) break;

    double step = 1.0;
    Eigen::VectorXd w_new, g_new;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      w_new = w + step * dir;
      f_new = nn_objective(w_new, x, y, hidden, decay, &g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    Eigen::VectorXd s = w_new - w, yk = g_new - g;
    double sy = s.dot(yk);
    if (sy > 1e-12 * s.norm() * yk.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(yk);
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > 10) s_hist.pop_front(), y_hist.pop_front(), rho_hist.pop_front();
    }
    bool small = (f - f_new) <= cfg.rel_tolerance * (std::abs(f) + cfg.rel_tolerance);
    w = std::move(w_new);
    g = std::move(g_new);
    f = f_new;
    if (small) {
      ++it;
      break;
    }
  }
  return {w, f, it};
}

struct NnGridCell {
  int size;
  double decay;
  double cv_rmse;
};

class NeuralNetModel {
 public:
  Eigen::VectorXd weights;
  int hidden = 0;
  double decay = 0.0;
  Eigen::RowVectorXd x_center, x_scale;
  double y_center = 0.0, y_scale = 1.0;
  std::vector<NnGridCell> grid;
  int iterations = 0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z = (x.rowwise() - x_center).array().rowwise() / x_scale.array();
    return (nn_forward(weights, z, hidden).array() * y_scale + y_center).matrix();
  }
};

namespace detail {

inline std::string nn_cell_tag(int size, double decay) {
  return "size=" + std::to_string(size) + ", decay=" + std::to_string(decay);
}

}  // namespace detail

inline NeuralNetModel fit_neural_net(const DesignMatrix& m, const Eigen::VectorXd& y, const NeuralNetConfig& cfg,
                                     std::uint64_t seed) {
  if (!m.all_numeric()) throw ArgumentError("neural net needs an all-numeric matrix; apply one_hot first");
  const Eigen::Index n = m.rows();
  if (n < 2) throw ArgumentError("neural net needs at least 2 rows");
  if (cfg.sizes.empty() || cfg.decays.empty()) throw ArgumentError("neural net grid is empty");

  NeuralNetModel model;
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

  auto cell_seed = [&](int size, std::size_t di, int fold) {
    return derive_seed(seed, {0x6e6eULL, static_cast<std::uint64_t>(size), di, static_cast<std::uint64_t>(fold + 1)});
  };

  std::size_t best_cell = 0;
  const bool tune = cfg.sizes.size() * cfg.decays.size() > 1;
  if (tune) {
    const int k = std::max(2, std::min<int>(cfg.inner_folds, static_cast<int>(n)));
    std::vector<int> fold(static_cast<std::size_t>(n));
    {
      std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      Rng frng = make_rng(seed, {0x666f6c64ULL});
      std::shuffle(perm.begin(), perm.end(), frng);
      for (std::size_t i = 0; i < perm.size(); ++i) fold[static_cast<std::size_t>(perm[i])] = static_cast<int>(i % k);
    }
    for (int size : cfg.sizes)
      for (std::size_t di = 0; di < cfg.decays.size(); ++di) {
        double sse = 0.0;
        for (int f = 0; f < k; ++f) {
          std::vector<Eigen::Index> tr, te;
          for (Eigen::Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
          Eigen::MatrixXd xtr(static_cast<Eigen::Index>(tr.size()), z.cols()), xte(static_cast<Eigen::Index>(te.size()), z.cols());
          Eigen::VectorXd ytr(static_cast<Eigen::Index>(tr.size())), yte(static_cast<Eigen::Index>(te.size()));
          for (std::size_t i = 0; i < tr.size(); ++i) xtr.row(static_cast<Eigen::Index>(i)) = z.row(tr[i]), ytr(static_cast<Eigen::Index>(i)) = t(tr[i]);
          for (std::size_t i = 0; i < te.size(); ++i) xte.row(static_cast<Eigen::Index>(i)) = z.row(te[i]), yte(static_cast<Eigen::Index>(i)) = t(te[i]);
          Rng rng(cell_seed(size, di, f));
          auto res = train_network(xtr, ytr, size, cfg.decays[di], cfg, rng);
          double e = (nn_forward(res.weights, xte, size) - yte).squaredNorm();
          if (!std::isfinite(e)) throw TrainingError("neural net produced NaN loss (" + detail::nn_cell_tag(size, cfg.decays[di]) + ")");
          sse += e;
        }
        model.grid.push_back({size, cfg.decays[di], std::sqrt(sse / static_cast<double>(n)) * model.y_scale});
      }
    for (std::size_t c = 1; c < model.grid.size(); ++c)
      if (model.grid[c].cv_rmse < model.grid[best_cell].cv_rmse) best_cell = c;
  } else {
    model.grid.push_back({cfg.sizes[0], cfg.decays[0], std::nan("")});
  }

  model.hidden = model.grid[best_cell].size;
  model.decay = model.grid[best_cell].decay;
  std::size_t di = static_cast<std::size_t>(
      std::find(cfg.decays.begin(), cfg.decays.end(), model.decay) - cfg.decays.begin());
  Rng rng(cell_seed(model.hidden, di, -1));
  auto res = train_network(z, t, model.hidden, model.decay, cfg, rng);
  if (!std::isfinite(res.loss)) throw TrainingError("neural net produced NaN loss (" + detail::nn_cell_tag(model.hidden, model.decay) + ")");
  model.weights = std::move(res.weights);
  model.iterations = res.iterations;
  return model;
}

}  // namespace ews::learners
