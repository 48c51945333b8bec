#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/core/random.hpp"
#include "ews/design_matrix.hpp"

namespace ews::learners {

// Bayesian additive regression trees: Gibbs backfitting with grow / prune /
// change proposals, integrated leaf likelihood and a conjugate sigma^2 draw.
struct BartConfig {
  int n_trees = 100;
  int burn_in = 400;
  int post_draws = 1000;
  double alpha = 0.95;
  double beta = 2.0;
  double k = 2.0;
  double q = 0.9;
  double nu = 3.0;
  int max_cutpoints = 100;
};

namespace detail {

struct BartNode {
  int var = -1;  // -1: leaf
  int cut = 0;   // index into the variable's cutpoints; left when x < cutpoints[var][cut]
  int left = -1, right = -1, parent = -1;
  int depth = 0;
  double mu = 0.0;
  bool leaf() const { return var < 0; }
};

struct BartTree {
  std::vector<BartNode> nodes{BartNode{}};
  std::vector<int> free_slots;

  int add(const BartNode& n) {
    if (!free_slots.empty()) {
      int id = free_slots.back();
      free_slots.pop_back();
      nodes[static_cast<std::size_t>(id)] = n;
      return id;
    }
    nodes.push_back(n);
    return static_cast<int>(nodes.size()) - 1;
  }
  void remove(int id) {
    nodes[static_cast<std::size_t>(id)] = BartNode{};
    nodes[static_cast<std::size_t>(id)].depth = -1;
    free_slots.push_back(id);
  }
  bool alive(int id) const { return nodes[static_cast<std::size_t>(id)].depth >= 0; }
};

// One posterior draw: every tree flattened into a shared node array.
struct FlatNode {
  int var;
  double cut;  // cutpoint value
  int left, right;
  double mu;
};

}  // namespace detail

class BartModel {
 public:
  std::vector<std::vector<detail::FlatNode>> draws;  // per kept draw: concatenated trees
  std::vector<std::vector<int>> roots;                // per kept draw: root offsets
  std::vector<double> sigma_draws;                    // kept draws, response units
  std::vector<double> sigma2_chain;                   // every iteration, scaled units
  double y_min = 0.0, y_range = 0.0;                  // y = (s + 0.5) * range + min
  double acceptance_rate = 0.0;
  bool constant = false;
  double constant_value = 0.0;

  // Posterior draws of f(x), response units; rows = queries, cols = draws.
  Eigen::MatrixXd draw_matrix(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(draws.size()));
    if (constant) return out.setConstant(constant_value);
    for (std::size_t d = 0; d < draws.size(); ++d) {
      const auto& nodes = draws[d];
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (int r : roots[d]) {
          int at = r;
          while (nodes[static_cast<std::size_t>(at)].var >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(at)];
            at = x(i, nd.var) < nd.cut ? nd.left : nd.right;
          }
          s += nodes[static_cast<std::size_t>(at)].mu;
        }
        out(i, static_cast<Eigen::Index>(d)) = (s + 0.5) * y_range + y_min;
      }
    }
    return out;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    if (constant) return Eigen::VectorXd::Constant(x.rows(), constant_value);
    return draw_matrix(x).rowwise().mean();
  }

  // Posterior predictive interval: quantiles of the mixture over draws of
  // N(f_d(x), sigma_d^2).
  Eigen::MatrixXd interval(const Eigen::MatrixXd& x, double level) const {
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("interval level must lie in (0, 1)");
    Eigen::MatrixXd out(x.rows(), 2);
    if (constant) {
      out.col(0).setConstant(constant_value);
      out.col(1).setConstant(constant_value);
      return out;
    }
    Eigen::MatrixXd f = draw_matrix(x);
    const double lo_p = 0.5 * (1.0 - level), hi_p = 1.0 - lo_p;
    const boost::math::normal std_normal;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      auto cdf = [&](double t) {
        double s = 0.0;
        for (Eigen::Index d = 0; d < f.cols(); ++d)
          s += boost::math::cdf(std_normal, (t - f(i, d)) / sigma_draws[static_cast<std::size_t>(d)]);
        return s / static_cast<double>(f.cols());
      };
      double smax = *std::max_element(sigma_draws.begin(), sigma_draws.end());
      double a0 = f.row(i).minCoeff() - 10.0 * smax, b0 = f.row(i).maxCoeff() + 10.0 * smax;
      for (int side = 0; side < 2; ++side) {
        double target = side == 0 ? lo_p : hi_p, a = a0, b = b0;
        for (int it = 0; it < 100 && b - a > 1e-9 * (1.0 + std::abs(a)); ++it) {
          double mid = 0.5 * (a + b);
          (cdf(mid) < target ? a : b) = mid;
        }
        out(i, side) = 0.5 * (a + b);
      }
    }
    return out;
  }
};

namespace detail {

class BartSampler {
 public:
  BartSampler(const Eigen::MatrixXd& x, const Eigen::VectorXd& ys, const BartConfig& cfg, double lambda, Rng& rng)
      : x_(x), y_(ys), cfg_(cfg), lambda_(lambda), rng_(rng), n_(x.rows()), p_(x.cols()) {
    build_cutpoints();
    tau_ = 0.5 / (cfg.k * std::sqrt(static_cast<double>(cfg.n_trees)));
    trees_.assign(static_cast<std::size_t>(cfg.n_trees), BartTree{});
    leaf_of_.assign(static_cast<std::size_t>(cfg.n_trees), std::vector<int>(static_cast<std::size_t>(n_), 0));
    tree_fit_.assign(static_cast<std::size_t>(cfg.n_trees), Eigen::VectorXd::Zero(n_));
    total_fit_ = Eigen::VectorXd::Zero(n_);
    resid_.resize(n_);
  }

  void run(BartModel& model) {
    const int total = cfg_.burn_in + cfg_.post_draws;
    long proposed = 0, accepted = 0;
    double sigma2 = lambda_;
    model.sigma2_chain.reserve(static_cast<std::size_t>(total));
    for (int it = 0; it < total; ++it) {
      for (int t = 0; t < cfg_.n_trees; ++t) {
        auto st = static_cast<std::size_t>(t);
        resid_ = y_ - (total_fit_ - tree_fit_[st]);
        int moved = step(st, sigma2);
        if (it >= cfg_.burn_in && moved >= 0) {
          ++proposed;
          accepted += moved;
        }
        draw_leaves(st, sigma2);
        total_fit_ = y_ - resid_ + tree_fit_[st];
      }
      double sse = (y_ - total_fit_).squaredNorm();
      std::chi_squared_distribution<double> chi(cfg_.nu + static_cast<double>(n_));
      sigma2 = (cfg_.nu * lambda_ + sse) / chi(rng_);
      model.sigma2_chain.push_back(sigma2);
      if (it >= cfg_.burn_in) {
        keep_draw(model);
        model.sigma_draws.push_back(std::sqrt(sigma2) * model.y_range);
      }
    }
    model.acceptance_rate = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  }

 private:
  void build_cutpoints() {
    cuts_.resize(static_cast<std::size_t>(p_));
    for (Eigen::Index j = 0; j < p_; ++j) {
      std::vector<double> u(x_.col(j).data(), x_.col(j).data() + n_);
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      std::vector<double> c(u.begin() + (u.empty() ? 0 : 1), u.end());
      if (static_cast<int>(c.size()) > cfg_.max_cutpoints) {
        std::vector<double> thin;
        for (int k = 0; k < cfg_.max_cutpoints; ++k)
          thin.push_back(c[static_cast<std::size_t>(k) * (c.size() - 1) / static_cast<std::size_t>(cfg_.max_cutpoints - 1)]);
        thin.erase(std::unique(thin.begin(), thin.end()), thin.end());
        c = std::move(thin);
      }
      cuts_[static_cast<std::size_t>(j)] = std::move(c);
    }
  }

  double split_prob(int depth) const { return cfg_.alpha * std::pow(1.0 + depth, -cfg_.beta); }

  // Log marginal likelihood of a leaf holding residual sum s over n rows,
  // dropping terms that cancel in every ratio.
  double leaf_loglik(double n, double s, double sigma2) const {
    double t2 = tau_ * tau_;
    return -0.5 * std::log(1.0 + n * t2 / sigma2) + t2 * s * s / (2.0 * sigma2 * (sigma2 + n * t2));
  }

  // Allowed cut-index range [lo, hi] for `var` at `node`, from ancestor splits.
  std::pair<int, int> cut_range(const BartTree& tr, int node, int var) const {
    int lo = 0, hi = static_cast<int>(cuts_[static_cast<std::size_t>(var)].size()) - 1;
    int child = node, at = tr.nodes[static_cast<std::size_t>(node)].parent;
    while (at >= 0) {
      const auto& a = tr.nodes[static_cast<std::size_t>(at)];
      if (a.var == var) {
        if (a.left == child) hi = std::min(hi, a.cut - 1);
        else lo = std::max(lo, a.cut + 1);
      }
      child = at;
      at = a.parent;
    }
    return {lo, hi};
  }

  bool draw_rule(const BartTree& tr, int node, int& var, int& cut) {
    std::vector<int> vars;
    for (int j = 0; j < static_cast<int>(p_); ++j) {
      auto [lo, hi] = cut_range(tr, node, j);
      if (lo <= hi) vars.push_back(j);
    }
    if (vars.empty()) return false;
    var = vars[uniform_index(rng_, vars.size())];
    auto [lo, hi] = cut_range(tr, node, var);
    cut = lo + static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(hi - lo + 1)));
    return true;
  }

  void children_stats(std::size_t t, int node, int var, int cut, double& nl, double& sl, double& nr, double& sr) const {
    nl = sl = nr = sr = 0.0;
    const double c = cuts_[static_cast<std::size_t>(var)][static_cast<std::size_t>(cut)];
    const auto& lo = leaf_of_[t];
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (!in_subtree(trees_[t], lo[static_cast<std::size_t>(i)], node)) continue;
      if (x_(i, var) < c) nl += 1.0, sl += resid_(i);
      else nr += 1.0, sr += resid_(i);
    }
  }

  static bool in_subtree(const BartTree& tr, int leaf, int node) {
    for (int at = leaf; at >= 0; at = tr.nodes[static_cast<std::size_t>(at)].parent)
      if (at == node) return true;
    return false;
  }

  std::vector<int> leaves(const BartTree& tr) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(tr.nodes.size()); ++i)
      if (tr.alive(i) && tr.nodes[static_cast<std::size_t>(i)].leaf()) out.push_back(i);
    return out;
  }

  std::vector<int> nog_nodes(const BartTree& tr) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(tr.nodes.size()); ++i) {
      if (!tr.alive(i)) continue;
      const auto& nd = tr.nodes[static_cast<std::size_t>(i)];
      if (!nd.leaf() && tr.nodes[static_cast<std::size_t>(nd.left)].leaf() &&
          tr.nodes[static_cast<std::size_t>(nd.right)].leaf())
        out.push_back(i);
    }
    return out;
  }

  // Returns 1 if a proposal was accepted, 0 if rejected, -1 if none possible.
  int step(std::size_t t, double sigma2) {
    auto& tr = trees_[t];
    auto lv = leaves(tr);
    const bool root_only = lv.size() == 1;
    constexpr double pg = 2.5 / 9.0, pp = 2.5 / 9.0;
    double u = uniform01(rng_);
    if (root_only || u < pg) return grow(t, lv, root_only ? 1.0 : pg, sigma2);
    if (u < pg + pp) return prune(t, lv, pp, sigma2);
    return change(t, sigma2);
  }

  int grow(std::size_t t, const std::vector<int>& lv, double p_grow, double sigma2) {
    auto& tr = trees_[t];
    int node = lv[uniform_index(rng_, lv.size())];
    int var, cut;
    if (!draw_rule(tr, node, var, cut)) return 0;
    double nl, sl, nr, sr;
    children_stats(t, node, var, cut, nl, sl, nr, sr);
    if (nl < 1.0 || nr < 1.0) return 0;
    const int d = tr.nodes[static_cast<std::size_t>(node)].depth;
    const double pd = split_prob(d), pd1 = split_prob(d + 1);
    double log_prior = std::log(pd) + 2.0 * std::log(1.0 - pd1) - std::log(1.0 - pd);
    double log_lik = leaf_loglik(nl, sl, sigma2) + leaf_loglik(nr, sr, sigma2) - leaf_loglik(nl + nr, sl + sr, sigma2);
    // Reverse move: prune one of the nog nodes of the grown tree.
    auto nogs = nog_nodes(tr);
    int n_nog_after = static_cast<int>(nogs.size()) + 1;
    int par = tr.nodes[static_cast<std::size_t>(node)].parent;
    if (par >= 0) {
      const auto& pn = tr.nodes[static_cast<std::size_t>(par)];
      int sib = pn.left == node ? pn.right : pn.left;
      if (tr.nodes[static_cast<std::size_t>(sib)].leaf()) --n_nog_after;  // parent stops being nog
    }
    double log_prop = std::log(2.5 / 9.0) - std::log(static_cast<double>(n_nog_after)) - std::log(p_grow) +
                      std::log(static_cast<double>(lv.size()));
    if (std::log(uniform01(rng_)) >= log_prior + log_lik + log_prop) return 0;

    BartNode l, r;
    l.parent = r.parent = node;
    l.depth = r.depth = d + 1;
    int li = tr.add(l), ri = tr.add(r);
    auto& nd = tr.nodes[static_cast<std::size_t>(node)];
    nd.var = var;
    nd.cut = cut;
    nd.left = li;
    nd.right = ri;
    const double c = cuts_[static_cast<std::size_t>(var)][static_cast<std::size_t>(cut)];
    auto& lo = leaf_of_[t];
    for (Eigen::Index i = 0; i < n_; ++i)
      if (lo[static_cast<std::size_t>(i)] == node) lo[static_cast<std::size_t>(i)] = x_(i, var) < c ? li : ri;
    return 1;
  }

  int prune(std::size_t t, const std::vector<int>& lv, double p_prune, double sigma2) {
    auto& tr = trees_[t];
    auto nogs = nog_nodes(tr);
    if (nogs.empty()) return 0;
    int node = nogs[uniform_index(rng_, nogs.size())];
    const auto nd = tr.nodes[static_cast<std::size_t>(node)];
    double nl = 0, sl = 0, nr = 0, sr = 0;
    const auto& lo = leaf_of_[t];
    for (Eigen::Index i = 0; i < n_; ++i) {
      int at = lo[static_cast<std::size_t>(i)];
      if (at == nd.left) nl += 1.0, sl += resid_(i);
      else if (at == nd.right) nr += 1.0, sr += resid_(i);
    }
    const double pd = split_prob(nd.depth), pd1 = split_prob(nd.depth + 1);
    double log_prior = -(std::log(pd) + 2.0 * std::log(1.0 - pd1) - std::log(1.0 - pd));
    double log_lik = leaf_loglik(nl + nr, sl + sr, sigma2) - leaf_loglik(nl, sl, sigma2) - leaf_loglik(nr, sr, sigma2);
    // Reverse move: grow at the merged leaf among lv.size() - 1 leaves.
    double n_leaves_after = static_cast<double>(lv.size()) - 1.0;
    double p_grow_after = n_leaves_after <= 1.0 ? 1.0 : 2.5 / 9.0;
    double log_prop = std::log(p_grow_after) - std::log(n_leaves_after) - std::log(p_prune) +
                      std::log(static_cast<double>(nogs.size()));
    if (std::log(uniform01(rng_)) >= log_prior + log_lik + log_prop) return 0;

    auto& lo_mut = leaf_of_[t];
    for (auto& a : lo_mut)
      if (a == nd.left || a == nd.right) a = node;
    tr.remove(nd.left);
    tr.remove(nd.right);
    auto& m = tr.nodes[static_cast<std::size_t>(node)];
    m.var = -1;
    m.left = m.right = -1;
    return 1;
  }

  int change(std::size_t t, double sigma2) {
    auto& tr = trees_[t];
    auto nogs = nog_nodes(tr);
    if (nogs.empty()) return 0;
    int node = nogs[uniform_index(rng_, nogs.size())];
    const auto nd = tr.nodes[static_cast<std::size_t>(node)];
    int var, cut;
    if (!draw_rule(tr, node, var, cut)) return 0;
    double nl, sl, nr, sr;
    children_stats(t, node, var, cut, nl, sl, nr, sr);
    if (nl < 1.0 || nr < 1.0) return 0;
    double ol = 0, osl = 0, orr = 0, osr = 0;
    const auto& lo = leaf_of_[t];
    for (Eigen::Index i = 0; i < n_; ++i) {
      int at = lo[static_cast<std::size_t>(i)];
      if (at == nd.left) ol += 1.0, osl += resid_(i);
      else if (at == nd.right) orr += 1.0, osr += resid_(i);
    }
    double log_lik = leaf_loglik(nl, sl, sigma2) + leaf_loglik(nr, sr, sigma2) - leaf_loglik(ol, osl, sigma2) -
                     leaf_loglik(orr, osr, sigma2);
    if (std::log(uniform01(rng_)) >= log_lik) return 0;
    auto& m = tr.nodes[static_cast<std::size_t>(node)];
    m.var = var;
    m.cut = cut;
    const double c = cuts_[static_cast<std::size_t>(var)][static_cast<std::size_t>(cut)];
    auto& lo_mut = leaf_of_[t];
    for (Eigen::Index i = 0; i < n_; ++i) {
      int& at = lo_mut[static_cast<std::size_t>(i)];
      if (at == nd.left || at == nd.right) at = x_(i, var) < c ? nd.left : nd.right;
    }
    return 1;
  }

  void draw_leaves(std::size_t t, double sigma2) {
    auto& tr = trees_[t];
    std::vector<double> cnt(tr.nodes.size(), 0.0), sum(tr.nodes.size(), 0.0);
    const auto& lo = leaf_of_[t];
    for (Eigen::Index i = 0; i < n_; ++i) {
      auto a = static_cast<std::size_t>(lo[static_cast<std::size_t>(i)]);
      cnt[a] += 1.0;
      sum[a] += resid_(i);
    }
    std::normal_distribution<double> z(0.0, 1.0);
    const double t2 = tau_ * tau_;
    for (std::size_t a = 0; a < tr.nodes.size(); ++a) {
      if (!tr.alive(static_cast<int>(a)) || !tr.nodes[a].leaf()) continue;
      double prec = cnt[a] / sigma2 + 1.0 / t2;
      double mean = (sum[a] / sigma2) / prec;
      tr.nodes[a].mu = mean + z(rng_) / std::sqrt(prec);
    }
    auto& fit = tree_fit_[t];
    for (Eigen::Index i = 0; i < n_; ++i) fit(i) = tr.nodes[static_cast<std::size_t>(lo[static_cast<std::size_t>(i)])].mu;
  }

  void keep_draw(BartModel& model) const {
    std::vector<FlatNode> flat;
    std::vector<int> roots;
    for (const auto& tr : trees_) {
      const int base = static_cast<int>(flat.size());
      roots.push_back(base);
      // Compact the tree in depth-first order.
      std::vector<int> stack{0}, remap(tr.nodes.size(), -1);
      std::vector<int> order;
      while (!stack.empty()) {
        int at = stack.back();
        stack.pop_back();
        remap[static_cast<std::size_t>(at)] = base + static_cast<int>(order.size());
        order.push_back(at);
        const auto& nd = tr.nodes[static_cast<std::size_t>(at)];
        if (!nd.leaf()) {
          stack.push_back(nd.right);
          stack.push_back(nd.left);
        }
      }
      for (int at : order) {
        const auto& nd = tr.nodes[static_cast<std::size_t>(at)];
        if (nd.leaf()) flat.push_back({-1, 0.0, -1, -1, nd.mu});
        else
          flat.push_back({nd.var, cuts_[static_cast<std::size_t>(nd.var)][static_cast<std::size_t>(nd.cut)],
                          remap[static_cast<std::size_t>(nd.left)], remap[static_cast<std::size_t>(nd.right)], 0.0});
      }
    }
    model.draws.push_back(std::move(flat));
    model.roots.push_back(std::move(roots));
  }

  const Eigen::MatrixXd& x_;
  Eigen::VectorXd y_;
  BartConfig cfg_;
  double lambda_;
  Rng& rng_;
  Eigen::Index n_, p_;
  double tau_ = 0.0;
  std::vector<std::vector<double>> cuts_;
  std::vector<BartTree> trees_;
  std::vector<std::vector<int>> leaf_of_;
  std::vector<Eigen::VectorXd> tree_fit_;
  Eigen::VectorXd total_fit_, resid_;
};

// Residual variance of a least-squares fit (or the response variance when
// the design leaves too few degrees of freedom).
inline double sigma_overestimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows(), p = x.cols();
  double var_y = (y.array() - y.mean()).square().sum() / static_cast<double>(n - 1);
  if (p >= n - 1) return var_y;
  Eigen::MatrixXd a(n, p + 1);
  a.col(0).setOnes();
  a.rightCols(p) = x;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::VectorXd beta = qr.solve(y);
  Eigen::Index df = n - qr.rank();
  if (df <= 0) return var_y;
  double v = (y - a * beta).squaredNorm() / static_cast<double>(df);
  return v > 0.0 ? v : var_y;
}

}  // namespace detail

inline BartModel fit_bart(const DesignMatrix& m, const Eigen::VectorXd& y, const BartConfig& cfg, std::uint64_t seed) {
  if (!m.all_numeric()) throw ArgumentError("BART needs an all-numeric matrix; apply one_hot first");
  const Eigen::Index n = m.rows();
  if (n < 20) throw ArgumentError("BART needs at least 20 rows");
  if (!y.allFinite()) throw ArgumentError("BART response contains non-finite values");
  if (cfg.n_trees < 1 || cfg.post_draws < 1 || cfg.burn_in < 0) throw ArgumentError("invalid BART chain settings");

  BartModel model;
  double lo = y.minCoeff(), hi = y.maxCoeff();
  if (hi - lo <= 0.0 || m.cols() == 0) {
    model.constant = true;
    model.constant_value = m.cols() == 0 ? y.mean() : lo;
    return model;
  }
  model.y_min = lo;
  model.y_range = hi - lo;
  Eigen::VectorXd ys = (y.array() - lo) / model.y_range - 0.5;

  double sigma2_hat = detail::sigma_overestimate(m.values, ys);
  boost::math::chi_squared chi(cfg.nu);
  double lambda = sigma2_hat * boost::math::quantile(chi, 1.0 - cfg.q) / cfg.nu;

  Rng rng = make_rng(seed, {0x62617274ULL});
  detail::BartSampler sampler(m.values, ys, cfg, lambda, rng);
  sampler.run(model);
  return model;
}

}  // namespace ews::learners
