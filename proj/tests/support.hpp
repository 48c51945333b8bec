#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "ews/ews.hpp"

namespace ews::testing {

inline DesignMatrix numeric_matrix(const Eigen::MatrixXd& x, const std::string& prefix = "x") {
  DesignMatrix m;
  m.values = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) m.columns.push_back({prefix + std::to_string(j + 1), ColumnKind::numeric, {}, {}});
  return m;
}

inline Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index n, Eigen::Index p, double lo = 0.0, double hi = 1.0) {
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = lo + (hi - lo) * uniform01(rng);
  return x;
}

inline double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    cb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double s = 0, sa = 0, sb = 0;
  for (auto& [k, v] : joint) s += c2(v);
  for (auto& [k, v] : ra) sa += c2(v);
  for (auto& [k, v] : cb) sb += c2(v);
  double expected = sa * sb / c2(static_cast<double>(a.size()));
  double top = (sa + sb) / 2;
  if (top == expected) return 1.0;
  return (s - expected) / (top - expected);
}

inline std::vector<StudentRecord> default_cohort(std::uint64_t seed = 1) {
  CohortGenConfig cfg;
  cfg.seed = seed;
  return generate_cohort(cfg, default_schedule()).records;
}

}  // namespace ews::testing
