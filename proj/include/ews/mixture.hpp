#pragma once

// Gaussian mixture clustering of fine-grained activity: EM under six
// covariance families, BIC-maximising model selection, per-stage memberships.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/core/random.hpp"
#include "ews/staging.hpp"

namespace ews {

enum class CovarianceFamily { spherical_equal, spherical_varying, diagonal_equal, diagonal_varying, full_equal, full_varying };

inline const std::vector<CovarianceFamily>& all_covariance_families() {
  static const std::vector<CovarianceFamily> v{
      CovarianceFamily::spherical_equal, CovarianceFamily::spherical_varying, CovarianceFamily::diagonal_equal,
      CovarianceFamily::diagonal_varying, CovarianceFamily::full_equal,       CovarianceFamily::full_varying};
  return v;
}

inline std::string family_name(CovarianceFamily f) {
  switch (f) {
    case CovarianceFamily::spherical_equal: return "spherical-equal";
    case CovarianceFamily::spherical_varying: return "spherical-varying";
    case CovarianceFamily::diagonal_equal: return "diagonal-equal";
    case CovarianceFamily::diagonal_varying: return "diagonal-varying";
    case CovarianceFamily::full_equal: return "full-equal";
    case CovarianceFamily::full_varying: return "full-varying";
  }
  return "?";
}

inline CovarianceFamily parse_family(std::string_view s) {
  for (auto f : all_covariance_families())
    if (family_name(f) == s) return f;
  throw ArgumentError("unknown covariance family '" + std::string(s) + "'");
}

inline bool is_full(CovarianceFamily f) {
  return f == CovarianceFamily::full_equal || f == CovarianceFamily::full_varying;
}
inline bool is_equal(CovarianceFamily f) {
  return f == CovarianceFamily::spherical_equal || f == CovarianceFamily::diagonal_equal ||
         f == CovarianceFamily::full_equal;
}

// Free parameters: means + mixing weights + covariance.
inline long mixture_parameter_count(int k, long d, CovarianceFamily f) {
  long cov = 0;
  switch (f) {
    case CovarianceFamily::spherical_equal: cov = 1; break;
    case CovarianceFamily::spherical_varying: cov = k; break;
    case CovarianceFamily::diagonal_equal: cov = d; break;
    case CovarianceFamily::diagonal_varying: cov = k * d; break;
    case CovarianceFamily::full_equal: cov = d * (d + 1) / 2; break;
    case CovarianceFamily::full_varying: cov = k * d * (d + 1) / 2; break;
  }
  return k * d + (k - 1) + cov;
}

struct EmOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-8;
  int restarts = 10;
  double covariance_floor = 1e-6;
  // Consecutive M-steps with a floored eigenvalue before declaring collapse.
  int floor_patience = 3;
};

struct ClusterInput {
  Eigen::MatrixXd x;  // standardized, n x d
  std::vector<std::string> columns;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::vector<std::string> dropped;  // constant columns
};

// Column-standardizes `raw` (sample sd), dropping constant columns.
inline ClusterInput standardize(const Eigen::MatrixXd& raw, const std::vector<std::string>& names) {
  ClusterInput in;
  const Eigen::Index n = raw.rows();
  std::vector<Eigen::Index> keep;
  std::vector<double> means, sds;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    double mu = raw.col(j).mean();
    double ss = (raw.col(j).array() - mu).square().sum();
    double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (sd <= 1e-12 * std::max(1.0, std::abs(mu))) {
      in.dropped.push_back(names[static_cast<std::size_t>(j)]);
      continue;
    }
    keep.push_back(j);
    means.push_back(mu);
    sds.push_back(sd);
  }
  in.x.resize(n, static_cast<Eigen::Index>(keep.size()));
  in.mean.resize(static_cast<Eigen::Index>(keep.size()));
  in.sd.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    auto cc = static_cast<Eigen::Index>(c);
    in.x.col(cc) = (raw.col(keep[c]).array() - means[c]) / sds[c];
    in.mean(cc) = means[c];
    in.sd(cc) = sds[c];
    in.columns.push_back(names[static_cast<std::size_t>(keep[c])]);
  }
  return in;
}

// Per-folder per-week weekday and Sunday counts up to the stage.
inline ClusterInput cluster_input(const std::vector<StudentRecord>& cohort, const CourseSchedule& schedule, Stage stage) {
  if (stage.index < 1) throw ArgumentError("clustering needs activity data; stage '" + stage.label() + "' has none");
  auto cells = activity_cells(schedule, stage.last_activity_week());
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(cohort.size()), static_cast<Eigen::Index>(cells.size()));
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    names.push_back(activity_column_name(cells[c].folder, cells[c].week, cells[c].day));
    for (std::size_t i = 0; i < cohort.size(); ++i)
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          cohort[i].activity.at(cells[c].folder, cells[c].week, cells[c].day);
  }
  return standardize(raw, names);
}

struct MixtureModel {
  int k = 0;
  CovarianceFamily family = CovarianceFamily::spherical_equal;
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;                 // K x d
  std::vector<Eigen::VectorXd> variances;  // spherical/diagonal: per component, length d
  std::vector<Eigen::MatrixXd> full_covariances;  // full families
  double loglik = 0.0;
  double bic = 0.0;
  long n_params = 0;
  Eigen::MatrixXd memberships;  // n x K
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;

  long dims() const { return means.cols(); }

  Eigen::MatrixXd covariance(int c) const {
    if (is_full(family)) return full_covariances[static_cast<std::size_t>(c)];
    return variances[static_cast<std::size_t>(c)].asDiagonal();
  }

  std::vector<int> hard_labels() const {
    std::vector<int> out(static_cast<std::size_t>(memberships.rows()));
    for (Eigen::Index i = 0; i < memberships.rows(); ++i) {
      Eigen::Index arg = 0;
      memberships.row(i).maxCoeff(&arg);
      out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
  }
};

namespace detail {

// Precomputed per-component density evaluator.
struct ComponentDensity {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd inv_sd;  // diagonal families
  Eigen::MatrixXd whiten;     // full families: rows of Lambda^{-1/2} V^T
  double log_norm = 0.0;      // -0.5 * (d log 2pi + log det)
  bool full = false;

  void log_density(const Eigen::MatrixXd& x, Eigen::Ref<Eigen::VectorXd> out) const {
    if (full) {
      Eigen::MatrixXd centered = x.rowwise() - mean;
      Eigen::MatrixXd z = centered * whiten.transpose();
      out = (log_norm - 0.5 * z.rowwise().squaredNorm().array()).matrix();
    } else {
      Eigen::MatrixXd z = ((x.rowwise() - mean).array().rowwise() * inv_sd.array()).matrix();
      out = (log_norm - 0.5 * z.rowwise().squaredNorm().array()).matrix();
    }
  }
};

inline std::vector<ComponentDensity> make_densities(const MixtureModel& m) {
  const double d = static_cast<double>(m.dims());
  const double log2pi = std::log(2.0 * std::numbers::pi);
  std::vector<ComponentDensity> out(static_cast<std::size_t>(m.k));
  for (int c = 0; c < m.k; ++c) {
    auto& cd = out[static_cast<std::size_t>(c)];
    cd.mean = m.means.row(c);
    if (is_full(m.family)) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.full_covariances[static_cast<std::size_t>(c)]);
      Eigen::VectorXd ev = es.eigenvalues();
      cd.full = true;
      cd.whiten = ev.array().rsqrt().matrix().asDiagonal() * es.eigenvectors().transpose();
      cd.log_norm = -0.5 * (d * log2pi + ev.array().log().sum());
    } else {
      const auto& v = m.variances[static_cast<std::size_t>(c)];
      cd.inv_sd = v.array().rsqrt().matrix().transpose();
      cd.log_norm = -0.5 * (d * log2pi + v.array().log().sum());
    }
  }
  return out;
}

// E-step. Fills responsibilities and returns the log-likelihood.
inline double e_step(const MixtureModel& m, const Eigen::MatrixXd& x, Eigen::MatrixXd& resp) {
  const Eigen::Index n = x.rows();
  auto dens = make_densities(m);
  resp.resize(n, m.k);
  for (int c = 0; c < m.k; ++c) {
    dens[static_cast<std::size_t>(c)].log_density(x, resp.col(c));
    resp.col(c).array() += std::log(m.weights(c));
  }
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = resp.row(i).maxCoeff();
    double s = (resp.row(i).array() - mx).exp().sum();
    double lse = mx + std::log(s);
    ll += lse;
    resp.row(i) = (resp.row(i).array() - lse).exp();
  }
  return ll;
}

// Returns true when a floor was applied.
inline bool floor_vector(Eigen::VectorXd& v, double floor) {
  bool hit = false;
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (!(v(j) >= floor)) {
      v(j) = floor;
      hit = true;
    }
  return hit;
}

inline bool floor_matrix(Eigen::MatrixXd& s, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  Eigen::VectorXd ev = es.eigenvalues();
  bool hit = floor_vector(ev, floor);
  s = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  s = 0.5 * (s + s.transpose()).eval();
  return hit;
}

// Constrained M-step; eigenvalues clipped at the floor.
inline bool m_step(MixtureModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp, double floor) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const int k = m.k;
  Eigen::VectorXd nk = resp.colwise().sum().transpose();
  for (int c = 0; c < k; ++c)
    if (nk(c) / static_cast<double>(n) < 1.0 / (10.0 * static_cast<double>(n)))
      throw CollapseError("component weight vanished (K=" + std::to_string(k) + ", family=" + family_name(m.family) + ")");
  // A component-specific variance needs at least two supporting rows; a
  // singleton component otherwise buys unbounded likelihood.
  if (!is_equal(m.family))
    for (int c = 0; c < k; ++c)
      if (nk(c) < 2.0)
        throw CollapseError("component supported by fewer than 2 rows (K=" + std::to_string(k) +
                            ", family=" + family_name(m.family) + ")");
  m.weights = nk / static_cast<double>(n);
  m.means = (resp.transpose() * x).array().colwise() / nk.array();

  bool hit = false;
  m.variances.assign(is_full(m.family) ? 0 : static_cast<std::size_t>(k), Eigen::VectorXd());
  m.full_covariances.assign(is_full(m.family) ? static_cast<std::size_t>(k) : 0, Eigen::MatrixXd());

  if (is_full(m.family)) {
    Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
    for (int c = 0; c < k; ++c) {
      Eigen::MatrixXd centered = x.rowwise() - m.means.row(c);
      Eigen::MatrixXd weighted = centered.array().colwise() * resp.col(c).array();
      Eigen::MatrixXd scatter = weighted.transpose() * centered;
      if (m.family == CovarianceFamily::full_varying) {
        Eigen::MatrixXd s = scatter / nk(c);
        hit |= floor_matrix(s, floor);
        m.full_covariances[static_cast<std::size_t>(c)] = std::move(s);
      } else {
        pooled += scatter;
      }
    }
    if (m.family == CovarianceFamily::full_equal) {
      pooled /= static_cast<double>(n);
      hit |= floor_matrix(pooled, floor);
      for (int c = 0; c < k; ++c) m.full_covariances[static_cast<std::size_t>(c)] = pooled;
    }
    return hit;
  }

  // Per-component diagonal scatter.
  std::vector<Eigen::VectorXd> diag(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    Eigen::MatrixXd sq = (x.rowwise() - m.means.row(c)).array().square();
    diag[static_cast<std::size_t>(c)] = sq.transpose() * resp.col(c);
  }
  switch (m.family) {
    case CovarianceFamily::spherical_equal: {
      double total = 0.0;
      for (auto& v : diag) total += v.sum();
      Eigen::VectorXd v = Eigen::VectorXd::Constant(d, total / static_cast<double>(n * d));
      hit |= floor_vector(v, floor);
      for (int c = 0; c < k; ++c) m.variances[static_cast<std::size_t>(c)] = v;
      break;
    }
    case CovarianceFamily::spherical_varying:
      for (int c = 0; c < k; ++c) {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(d, diag[static_cast<std::size_t>(c)].sum() / (nk(c) * static_cast<double>(d)));
        hit |= floor_vector(v, floor);
        m.variances[static_cast<std::size_t>(c)] = v;
      }
      break;
    case CovarianceFamily::diagonal_equal: {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
      for (auto& dv : diag) v += dv;
      v /= static_cast<double>(n);
      hit |= floor_vector(v, floor);
      for (int c = 0; c < k; ++c) m.variances[static_cast<std::size_t>(c)] = v;
      break;
    }
    case CovarianceFamily::diagonal_varying:
      for (int c = 0; c < k; ++c) {
        Eigen::VectorXd v = diag[static_cast<std::size_t>(c)] / nk(c);
        hit |= floor_vector(v, floor);
        m.variances[static_cast<std::size_t>(c)] = v;
      }
      break;
    default: break;
  }
  return hit;
}

// k-means++ seeding followed by a few Lloyd iterations; returns hard labels.
inline std::vector<int> kmeanspp_partition(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> centers{static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)))};
  Eigen::VectorXd dist2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
    } else {
      double u = uniform01(rng) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        if (u < dist2(pick)) break;
        u -= dist2(pick);
      }
    }
    centers.push_back(pick);
    dist2 = dist2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }
  Eigen::MatrixXd c(k, x.cols());
  for (int j = 0; j < k; ++j) c.row(j) = x.row(centers[static_cast<std::size_t>(j)]);
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < 10; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (c.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
      cnt(labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int j = 0; j < k; ++j)
      if (cnt(j) > 0) c.row(j) = sum.row(j) / cnt(j);
    if (!changed && it > 0) break;
  }
  return labels;
}

// Ward agglomerative clustering cut at k groups (Lance-Williams updates on
// squared Euclidean distances). Deterministic; ties go to the lower index.
inline std::vector<int> ward_partition(const Eigen::MatrixXd& x, int k) {
  const Eigen::Index n = x.rows();
  std::vector<int> group(static_cast<std::size_t>(n));
  std::iota(group.begin(), group.end(), 0);
  if (k >= n) return group;
  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) dist(i, j) = (x.row(i) - x.row(j)).squaredNorm();
  std::vector<double> size(static_cast<std::size_t>(n), 1.0);
  std::vector<char> alive(static_cast<std::size_t>(n), 1);
  for (Eigen::Index clusters = n; clusters > k; --clusters) {
    Eigen::Index a = -1, b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!alive[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = i + 1; j < n; ++j)
        if (alive[static_cast<std::size_t>(j)] && dist(i, j) < best) best = dist(i, j), a = i, b = j;
    }
    if (a < 0 || b < 0) break;  // non-finite distances only
    const double na = size[static_cast<std::size_t>(a)], nb = size[static_cast<std::size_t>(b)];
    for (Eigen::Index c = 0; c < n; ++c) {
      if (!alive[static_cast<std::size_t>(c)] || c == a || c == b) continue;
      const double nc = size[static_cast<std::size_t>(c)];
      double v = ((na + nc) * dist(a, c) + (nb + nc) * dist(b, c) - nc * dist(a, b)) / (na + nb + nc);
      dist(a, c) = dist(c, a) = v;
    }
    size[static_cast<std::size_t>(a)] = na + nb;
    alive[static_cast<std::size_t>(b)] = 0;
    for (auto& g : group)
      if (g == b) g = static_cast<int>(a);
  }
  // Relabel 0..k-1 in order of first appearance.
  std::map<int, int> relabel;
  for (auto& g : group) {
    auto it = relabel.emplace(g, static_cast<int>(relabel.size())).first;
    g = it->second;
  }
  return group;
}

inline void finalize(MixtureModel& m, Eigen::Index n) {
  m.n_params = mixture_parameter_count(m.k, m.dims(), m.family);
  m.bic = 2.0 * m.loglik - static_cast<double>(m.n_params) * std::log(static_cast<double>(n));
}

}  // namespace detail

inline double log_likelihood(const MixtureModel& m, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd resp;
  return detail::e_step(m, x, resp);
}

inline Eigen::MatrixXd responsibilities(const MixtureModel& m, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd resp;
  detail::e_step(m, x, resp);
  return resp;
}

// Reorders components: new component j is old component perm[j].
inline MixtureModel permute_components(const MixtureModel& m, const std::vector<int>& perm) {
  MixtureModel out = m;
  for (int j = 0; j < m.k; ++j) {
    int o = perm[static_cast<std::size_t>(j)];
    out.weights(j) = m.weights(o);
    out.means.row(j) = m.means.row(o);
    if (is_full(m.family)) out.full_covariances[static_cast<std::size_t>(j)] = m.full_covariances[static_cast<std::size_t>(o)];
    else out.variances[static_cast<std::size_t>(j)] = m.variances[static_cast<std::size_t>(o)];
    out.memberships.col(j) = m.memberships.col(o);
  }
  return out;
}

// EM for one (K, family); best of a Ward start plus `restarts` k-means++ starts.
inline MixtureModel fit_em(const ClusterInput& data, int k, CovarianceFamily family, std::uint64_t seed,
                           const EmOptions& opts = {}) {
  const Eigen::MatrixXd& x = data.x;
  const Eigen::Index n = x.rows(), d = x.cols();
  const std::string tag = "K=" + std::to_string(k) + ", family=" + family_name(family);
  if (k < 1) throw ArgumentError("K must be at least 1");
  if (n <= k) throw ArgumentError("need more rows than components (" + tag + ")");
  if (d < 1) throw ArgumentError("cluster input has no non-constant columns");
  // A full covariance estimated from fewer points than dimensions is
  // singular, so the eigenvalue floor would bind on every iteration.
  if (family == CovarianceFamily::full_equal && n - k <= d)
    throw CollapseError("too few rows for a pooled full covariance (" + tag + ")");
  if (family == CovarianceFamily::full_varying && n / k <= d + 1)
    throw CollapseError("too few rows per component for full covariances (" + tag + ")");

  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(family)});
  std::optional<MixtureModel> best;
  std::string last_error;
  const int restarts = k == 1 ? 1 : std::max(1, opts.restarts);
  // Start 0 is the Ward hierarchy cut at K; the rest are k-means++ draws.
  for (int r = 0; r <= restarts; ++r) {
    if (r == 0 && k == 1) continue;
    try {
      auto labels = r == 0 ? detail::ward_partition(x, k) : detail::kmeanspp_partition(x, k, rng);
      MixtureModel m;
      m.k = k;
      m.family = family;
      Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
      for (Eigen::Index i = 0; i < n; ++i) resp(i, labels[static_cast<std::size_t>(i)]) = 1.0;
      int floor_streak = 0;
      auto m_step = [&] {
        bool hit = detail::m_step(m, x, resp, opts.covariance_floor);
        floor_streak = hit ? floor_streak + 1 : 0;
        if (floor_streak >= opts.floor_patience)
          throw CollapseError("covariance floor hit repeatedly (" + tag + ")");
      };
      m_step();
      double prev = -std::numeric_limits<double>::infinity();
      for (int it = 0; it < opts.max_iterations; ++it) {
        double ll = detail::e_step(m, x, resp);
        if (!std::isfinite(ll)) throw CollapseError("non-finite log-likelihood (" + tag + ")");
        m.loglik_trace.push_back(ll);
        m.loglik = ll;
        m.iterations = it + 1;
        if (it > 0 && std::abs(ll - prev) <= opts.relative_tolerance * std::abs(ll)) {
          m.converged = true;
          break;
        }
        prev = ll;
        m_step();
      }
      // Parameters from the last M-step must match the stored memberships.
      if (!m.converged) m.loglik = detail::e_step(m, x, resp), m.loglik_trace.push_back(m.loglik);
      m.memberships = resp;
      if (!best || m.loglik > best->loglik) best = std::move(m);
    } catch (const CollapseError& e) {
      last_error = e.what();
    }
  }
  if (!best) throw CollapseError(last_error.empty() ? "all restarts collapsed (" + tag + ")" : last_error);
  detail::finalize(*best, n);
  return *best;
}

struct BicEntry {
  int k;
  CovarianceFamily family;
  std::optional<double> bic;  // empty when the fit collapsed
  long n_params;
  std::string error;
};

struct ModelSelection {
  MixtureModel best;
  std::vector<BicEntry> table;
};

inline ModelSelection select_model(const ClusterInput& data, int k_max = 9,
                                   const std::vector<CovarianceFamily>& families = all_covariance_families(),
                                   std::uint64_t seed = 0, const EmOptions& opts = {}) {
  if (data.x.cols() < 1)
    throw SelectionError("no non-constant activity columns to cluster (" + std::to_string(data.dropped.size()) +
                         " constant columns dropped)");
  ModelSelection sel;
  std::optional<MixtureModel> best;
  for (int k = 1; k <= k_max; ++k) {
    if (data.x.rows() <= k) break;
    for (auto fam : families) {
      BicEntry e{k, fam, std::nullopt, mixture_parameter_count(k, data.x.cols(), fam), ""};
      try {
        auto m = fit_em(data, k, fam, seed, opts);
        e.bic = m.bic;
        bool better = !best || m.bic > best->bic ||
                      (m.bic == best->bic && (m.n_params < best->n_params ||
                                              (m.n_params == best->n_params && m.k < best->k)));
        if (better) best = std::move(m);
      } catch (const CollapseError& err) {
        e.error = err.what();
      }
      sel.table.push_back(std::move(e));
    }
  }
  if (!best) throw SelectionError("every (K, family) fit collapsed");
  sel.best = std::move(*best);
  return sel;
}

struct StageClustering {
  ClusterMembership membership;
  MixtureModel model;
  ClusterInput input;
  std::vector<BicEntry> table;
};

// Components are relabelled by decreasing weight so labels are stable.
inline StageClustering memberships_at_stage(const std::vector<StudentRecord>& cohort, const CourseSchedule& schedule,
                                            Stage stage, std::uint64_t seed, int k_max = 9,
                                            const EmOptions& opts = {}) {
  StageClustering out;
  out.input = cluster_input(cohort, schedule, stage);
  auto sel = select_model(out.input, k_max, all_covariance_families(), seed, opts);
  std::vector<int> perm(static_cast<std::size_t>(sel.best.k));
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return sel.best.weights(a) > sel.best.weights(b); });
  out.model = permute_components(sel.best, perm);
  out.table = std::move(sel.table);
  out.membership.soft = out.model.memberships;
  out.membership.labels = out.model.hard_labels();
  return out;
}

}  // namespace ews
