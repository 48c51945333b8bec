#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/core/random.hpp"
#include "ews/design_matrix.hpp"

namespace ews::learners {

// Multivariate adaptive regression splines: forward selection of reflected
// hinge pairs, then backward elimination scored by GCV.
struct MarsConfig {
  std::vector<int> degrees{1, 2};
  int nprune = 5;  // maximum terms kept, intercept included
  int max_terms = 21;
  double thresh = 0.001;
  int inner_folds = 5;
};

struct Hinge {
  int var;
  double knot;
  int sign;  // +1: max(0, x - knot); -1: max(0, knot - x)
};

struct MarsTerm {
  std::vector<Hinge> factors;  // empty: intercept
  int degree() const { return static_cast<int>(factors.size()); }
  bool uses(int var) const {
    return std::any_of(factors.begin(), factors.end(), [&](auto& h) { return h.var == var; });
  }
};

class MarsModel {
 public:
  std::vector<MarsTerm> terms;
  Eigen::VectorXd coef;
  int degree = 1;
  double gcv = 0.0;
  double rss = 0.0;
  int forward_terms = 0;
  std::vector<std::pair<int, double>> degree_cv;  // (degree, inner CV MSE)

  static double basis(const MarsTerm& t, const Eigen::MatrixXd& x, Eigen::Index i) {
    double v = 1.0;
    for (auto& h : t.factors) {
      double d = h.sign > 0 ? x(i, h.var) - h.knot : h.knot - x(i, h.var);
      if (d <= 0.0) return 0.0;
      v *= d;
    }
    return v;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (std::size_t k = 0; k < terms.size(); ++k) out(i) += coef(static_cast<Eigen::Index>(k)) * basis(terms[k], x, i);
    return out;
  }
};

namespace detail {

inline Eigen::VectorXd basis_column(const MarsTerm& t, const Eigen::MatrixXd& x) {
  Eigen::VectorXd c(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) c(i) = MarsModel::basis(t, x, i);
  return c;
}

// Appends the part of `v` orthogonal to `q` as a new unit column; returns
// false when `v` is (numerically) inside span(q).
inline bool extend_basis(Eigen::MatrixXd& q, Eigen::Index& rank, Eigen::VectorXd v) {
  double norm0 = v.norm();
  if (norm0 <= 0.0) return false;
  for (int pass = 0; pass < 2; ++pass)
    if (rank > 0) v -= q.leftCols(rank) * (q.leftCols(rank).transpose() * v);
  double norm = v.norm();
  if (norm <= 1e-9 * norm0) return false;
  q.col(rank++) = v / norm;
  return true;
}

inline double gcv_score(double rss, Eigen::Index n, int n_terms, double penalty) {
  double c = n_terms + penalty * (n_terms - 1) / 2.0;
  double denom = 1.0 - c / static_cast<double>(n);
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return rss / static_cast<double>(n) / (denom * denom);
}

inline double subset_rss(const Eigen::MatrixXd& b, const std::vector<int>& cols, const Eigen::VectorXd& y,
                         Eigen::VectorXd* coef = nullptr) {
  Eigen::MatrixXd a(b.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) a.col(static_cast<Eigen::Index>(k)) = b.col(cols[k]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::VectorXd beta = qr.solve(y);
  if (coef) *coef = beta;
  return (y - a * beta).squaredNorm();
}

struct ForwardResult {
  std::vector<MarsTerm> terms;
  Eigen::MatrixXd basis;
};

inline ForwardResult forward_pass(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_degree,
                                  const MarsConfig& cfg) {
  const Eigen::Index n = x.rows(), p = x.cols();
  ForwardResult fr;
  fr.terms.push_back({});
  fr.basis = Eigen::MatrixXd::Ones(n, cfg.max_terms);
  Eigen::MatrixXd q(n, cfg.max_terms + 2);
  Eigen::Index rank = 0;
  extend_basis(q, rank, Eigen::VectorXd::Ones(n));
  Eigen::VectorXd r = y - q.leftCols(rank) * (q.leftCols(rank).transpose() * y);
  const double tss = r.squaredNorm();
  if (tss <= 1e-12 * std::max(1.0, y.squaredNorm())) return fr;
  double rss = tss;

  std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(p));
  for (Eigen::Index v = 0; v < p; ++v) {
    auto& o = order[static_cast<std::size_t>(v)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a, v) > x(b, v); });
  }

  Eigen::VectorXd acc_a, acc_c;
  while (static_cast<int>(fr.terms.size()) + 2 <= cfg.max_terms) {
    double best_gain = 0.0;
    int best_parent = -1, best_var = -1;
    double best_knot = 0.0;
    const int m_count = static_cast<int>(fr.terms.size());
    for (int m = 0; m < m_count; ++m) {
      const auto& parent = fr.terms[static_cast<std::size_t>(m)];
      if (parent.degree() >= max_degree) continue;
      const Eigen::VectorXd bm = fr.basis.col(m);
      for (Eigen::Index v = 0; v < p; ++v) {
        if (parent.uses(static_cast<int>(v))) continue;
        // span{B, bm*(x-t)+, bm*(t-x)+} = span{B, bm*x, bm*(x-t)+}
        Eigen::VectorXd u = bm.array() * x.col(v).array();
        Eigen::MatrixXd e(n, rank + 1);
        e.leftCols(rank) = q.leftCols(rank);
        Eigen::Index erank = rank;
        double gain_u = 0.0;
        Eigen::VectorXd ru = r;
        if (extend_basis(e, erank, u)) {
          double c = e.col(erank - 1).dot(r);
          gain_u = c * c;
          ru -= c * e.col(erank - 1);
        }
        // Running sums over rows with x > t, for h_t = bm * (x - t)+:
        //   w'h_t = sum w*bm*x - t * sum w*bm.
        acc_a = Eigen::VectorXd::Zero(erank + 1);
        acc_c = Eigen::VectorXd::Zero(erank + 1);
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        const auto& ord = order[static_cast<std::size_t>(v)];
        std::size_t pos = 0;
        while (pos < ord.size()) {
          const double xv = x(ord[pos], v);
          // Rows at exactly xv are inactive for knot t = xv; evaluate first.
          if (pos > 0) {
            const double t = xv;
            double hh = s2 - 2.0 * t * s1 + t * t * s0;
            if (hh > 0.0) {
              double proj = 0.0;
              for (Eigen::Index k = 0; k < erank; ++k) {
                double d = acc_a(k) - t * acc_c(k);
                proj += d * d;
              }
              double den = hh - proj;
              if (den > 1e-9 * hh) {
                double num = acc_a(erank) - t * acc_c(erank);
                double gain = gain_u + num * num / den;
                if (gain > best_gain) {
                  best_gain = gain;
                  best_parent = m;
                  best_var = static_cast<int>(v);
                  best_knot = t;
                }
              }
            }
          }
          while (pos < ord.size() && x(ord[pos], v) == xv) {
            const Eigen::Index i = ord[pos++];
            const double b = bm(i);
            if (b == 0.0) continue;
            const double bx = b * xv;
            for (Eigen::Index k = 0; k < erank; ++k) {
              acc_a(k) += e(i, k) * bx;
              acc_c(k) += e(i, k) * b;
            }
            acc_a(erank) += ru(i) * bx;
            acc_c(erank) += ru(i) * b;
            s0 += b * b;
            s1 += b * bx;
            s2 += bx * bx;
          }
        }
      }
    }
    if (best_parent < 0) break;
    MarsTerm plus = fr.terms[static_cast<std::size_t>(best_parent)], minus = plus;
    plus.factors.push_back({best_var, best_knot, +1});
    minus.factors.push_back({best_var, best_knot, -1});
    const Eigen::Index at = static_cast<Eigen::Index>(fr.terms.size());
    fr.basis.col(at) = basis_column(plus, x);
    fr.basis.col(at + 1) = basis_column(minus, x);
    extend_basis(q, rank, fr.basis.col(at));
    extend_basis(q, rank, fr.basis.col(at + 1));
    fr.terms.push_back(std::move(plus));
    fr.terms.push_back(std::move(minus));
    r = y - q.leftCols(rank) * (q.leftCols(rank).transpose() * y);
    double new_rss = r.squaredNorm();
    double rsq_gain = (rss - new_rss) / tss;
    rss = new_rss;
    if (rsq_gain < cfg.thresh || 1.0 - rss / tss >= 0.999) break;
  }
  fr.basis.conservativeResize(n, static_cast<Eigen::Index>(fr.terms.size()));
  return fr;
}

inline MarsModel fit_mars_degree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int degree, const MarsConfig& cfg) {
  auto fr = forward_pass(x, y, degree, cfg);
  const double penalty = degree > 1 ? 3.0 : 2.0;
  const Eigen::Index n = x.rows();

  // Backward elimination; keep the best subset for every size.
  std::vector<int> current(fr.terms.size());
  std::iota(current.begin(), current.end(), 0);
  std::vector<std::vector<int>> best_of_size(fr.terms.size() + 1);
  std::vector<double> rss_of_size(fr.terms.size() + 1, std::numeric_limits<double>::infinity());
  double cur_rss = subset_rss(fr.basis, current, y);
  best_of_size[current.size()] = current;
  rss_of_size[current.size()] = cur_rss;
  while (current.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t drop = 0;
    for (std::size_t k = 1; k < current.size(); ++k) {  // intercept stays
      auto trial = current;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
      double rs = subset_rss(fr.basis, trial, y);
      if (rs < best) best = rs, drop = k;
    }
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(drop));
    best_of_size[current.size()] = current;
    rss_of_size[current.size()] = best;
  }

  std::size_t chosen = 1;
  double best_gcv = std::numeric_limits<double>::infinity();
  const std::size_t cap = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.nprune)), fr.terms.size());
  for (std::size_t s = 1; s <= cap; ++s) {
    double g = gcv_score(rss_of_size[s], n, static_cast<int>(s), penalty);
    if (g < best_gcv) best_gcv = g, chosen = s;
  }

  MarsModel model;
  model.degree = degree;
  model.forward_terms = static_cast<int>(fr.terms.size());
  for (int c : best_of_size[chosen]) model.terms.push_back(fr.terms[static_cast<std::size_t>(c)]);
  model.rss = subset_rss(fr.basis, best_of_size[chosen], y, &model.coef);
  model.gcv = best_gcv;
  return model;
}

}  // namespace detail

inline MarsModel fit_mars(const DesignMatrix& m, const Eigen::VectorXd& y, const MarsConfig& cfg, std::uint64_t seed) {
  if (!m.all_numeric()) throw ArgumentError("MARS needs an all-numeric matrix; apply one_hot first");
  const Eigen::Index n = m.rows();
  if (n < 20) throw ArgumentError("MARS needs at least 20 rows");
  if (cfg.degrees.empty()) throw ArgumentError("MARS needs at least one degree");
  for (int d : cfg.degrees)
    if (d < 1) throw ArgumentError("MARS degree must be positive");
  if (cfg.max_terms < 1) throw ArgumentError("MARS term cap must be positive");

  int degree = cfg.degrees.front();
  std::vector<std::pair<int, double>> scores;
  if (cfg.degrees.size() > 1) {
    const int k = std::max(2, std::min<int>(cfg.inner_folds, static_cast<int>(n)));
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = make_rng(seed, {0x6d617273ULL});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < perm.size(); ++i) fold[static_cast<std::size_t>(perm[i])] = static_cast<int>(i % k);
    double best = std::numeric_limits<double>::infinity();
    for (int d : cfg.degrees) {
      double sse = 0.0;
      for (int f = 0; f < k; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        Eigen::MatrixXd xtr(static_cast<Eigen::Index>(tr.size()), m.cols()), xte(static_cast<Eigen::Index>(te.size()), m.cols());
        Eigen::VectorXd ytr(static_cast<Eigen::Index>(tr.size())), yte(static_cast<Eigen::Index>(te.size()));
        for (std::size_t i = 0; i < tr.size(); ++i) xtr.row(static_cast<Eigen::Index>(i)) = m.values.row(tr[i]), ytr(static_cast<Eigen::Index>(i)) = y(tr[i]);
        for (std::size_t i = 0; i < te.size(); ++i) xte.row(static_cast<Eigen::Index>(i)) = m.values.row(te[i]), yte(static_cast<Eigen::Index>(i)) = y(te[i]);
        auto fit = detail::fit_mars_degree(xtr, ytr, d, cfg);
        sse += (fit.predict(xte) - yte).squaredNorm();
      }
      double mse = sse / static_cast<double>(n);
      scores.emplace_back(d, mse);
      if (mse < best) best = mse, degree = d;
    }
  }
  auto model = detail::fit_mars_degree(m.values, y, degree, cfg);
  model.degree_cv = std::move(scores);
  return model;
}

}  // namespace ews::learners
