#include <gtest/gtest.h>

#include <numbers>

#include "support.hpp"

using namespace ews;
using namespace ews::testing;

namespace {

ClusterInput raw_input(const Eigen::MatrixXd& x) {
  ClusterInput in;
  in.x = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) in.columns.push_back("v" + std::to_string(j));
  in.mean = Eigen::VectorXd::Zero(x.cols());
  in.sd = Eigen::VectorXd::Ones(x.cols());
  return in;
}

Eigen::MatrixXd blobs(Rng& rng, const std::vector<Eigen::VectorXd>& centres, int per, double sd,
                      std::vector<int>* labels = nullptr) {
  const Eigen::Index d = centres.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(centres.size()) * per, d);
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < centres.size(); ++c)
    for (int i = 0; i < per; ++i, ++r) {
      for (Eigen::Index j = 0; j < d; ++j) x(r, j) = centres[c](j) + sd * normal(rng);
      if (labels) labels->push_back(static_cast<int>(c));
    }
  return x;
}

// Free-parameter count by enumerating what each family estimates.
long counted_parameters(int k, int d, CovarianceFamily f) {
  long m = 0;
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) ++m;  // means
  m += k - 1;                         // weights
  int blocks = is_equal(f) ? 1 : k;
  for (int b = 0; b < blocks; ++b) {
    switch (f) {
      case CovarianceFamily::spherical_equal:
      case CovarianceFamily::spherical_varying: ++m; break;
      case CovarianceFamily::diagonal_equal:
      case CovarianceFamily::diagonal_varying:
        for (int j = 0; j < d; ++j) ++m;
        break;
      default:
        for (int i = 0; i < d; ++i)
          for (int j = 0; j <= i; ++j) ++m;
    }
  }
  return m;
}

}  // namespace

TEST(Mixture, ParameterCountsMatchEnumeration) {
  for (auto f : all_covariance_families())
    for (int k = 1; k <= 3; ++k)
      for (int d = 1; d <= 4; ++d) EXPECT_EQ(mixture_parameter_count(k, d, f), counted_parameters(k, d, f));
  EXPECT_EQ(mixture_parameter_count(2, 3, CovarianceFamily::spherical_equal), 2 * 3 + 1 + 1);
  EXPECT_EQ(mixture_parameter_count(2, 3, CovarianceFamily::full_varying), 2 * 3 + 1 + 2 * 6);
}

TEST(Mixture, SingleComponentIsGaussianMle) {
  Rng rng = make_rng(3);
  Eigen::MatrixXd x(60, 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double a = normal(rng), b = normal(rng);
    x.row(i) << a, 0.5 * a + b, 2.0 * normal(rng) + 1.0;
  }
  auto in = raw_input(x);
  const double n = 60, d = 3;
  Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::MatrixXd xc = x.rowwise() - mu;
  Eigen::MatrixXd cov = xc.transpose() * xc / n;

  auto full = fit_em(in, 1, CovarianceFamily::full_varying, 1);
  EXPECT_LT((full.means.row(0) - mu).norm(), 1e-10);
  double ll = -0.5 * n * (d * std::log(2 * std::numbers::pi) + std::log(cov.determinant()) + d);
  EXPECT_NEAR(full.loglik, ll, 1e-8);
  EXPECT_NEAR(full.bic, 2 * ll - mixture_parameter_count(1, 3, CovarianceFamily::full_varying) * std::log(n), 1e-8);

  auto diag = fit_em(in, 1, CovarianceFamily::diagonal_equal, 1);
  double lld = -0.5 * n * (d * std::log(2 * std::numbers::pi) + std::log(cov.diagonal().prod()) + d);
  EXPECT_NEAR(diag.loglik, lld, 1e-8);

  auto sph = fit_em(in, 1, CovarianceFamily::spherical_equal, 1);
  double s2 = cov.trace() / d;
  double lls = -0.5 * n * d * (std::log(2 * std::numbers::pi * s2) + 1);
  EXPECT_NEAR(sph.loglik, lls, 1e-8);
  EXPECT_NEAR(sph.bic, 2 * lls - 4 * std::log(n), 1e-8);  // 3 means + 1 variance
}

TEST(Mixture, SeparatedBlobsRecoveredExactly) {
  Rng rng = make_rng(8);
  std::vector<int> truth;
  auto x = blobs(rng, {Eigen::Vector2d(0, 0), Eigen::Vector2d(8, 8)}, 40, 1.0, &truth);
  for (auto f : all_covariance_families()) {
    auto m = fit_em(raw_input(x), 2, f, 5);
    EXPECT_DOUBLE_EQ(adjusted_rand_index(m.hard_labels(), truth), 1.0) << family_name(f);
  }
}

TEST(Mixture, DeterministicGivenSeed) {
  Rng rng = make_rng(9);
  auto x = blobs(rng, {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(3, 0, 1), Eigen::Vector3d(0, 4, 0)}, 25, 1.0);
  auto a = fit_em(raw_input(x), 3, CovarianceFamily::diagonal_varying, 77);
  auto b = fit_em(raw_input(x), 3, CovarianceFamily::diagonal_varying, 77);
  EXPECT_EQ(a.loglik, b.loglik);
  EXPECT_TRUE(a.memberships == b.memberships);
  EXPECT_TRUE(a.means == b.means);
}

// property: structural invariants on random fits
TEST(Mixture, FittedModelInvariants) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    Rng rng = make_rng(seed, {1});
    auto x = blobs(rng, {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(2, 2, 0)}, 30, 1.0);
    auto fam = all_covariance_families()[seed % 6];
    int k = 1 + static_cast<int>(seed % 3);
    MixtureModel m;
    try {
      m = fit_em(raw_input(x), k, fam, seed);
    } catch (const CollapseError&) {
      continue;
    }
    EXPECT_NEAR(m.weights.sum(), 1.0, 1e-9);
    for (Eigen::Index i = 0; i < m.memberships.rows(); ++i) {
      EXPECT_NEAR(m.memberships.row(i).sum(), 1.0, 1e-9);
      Eigen::Index arg;
      m.memberships.row(i).maxCoeff(&arg);
      EXPECT_EQ(m.hard_labels()[static_cast<std::size_t>(i)], arg);
    }
    for (int c = 0; c < m.k; ++c) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.covariance(c));
      EXPECT_GE(es.eigenvalues().minCoeff(), 1e-6 * (1 - 1e-9));
    }
    EXPECT_NEAR(m.bic, 2 * m.loglik - m.n_params * std::log(60.0), 1e-9);
    for (std::size_t t = 1; t < m.loglik_trace.size(); ++t)
      EXPECT_GE(m.loglik_trace[t], m.loglik_trace[t - 1] - 1e-10 * std::abs(m.loglik_trace[t - 1]));
  }
}

TEST(Mixture, LabelPermutationInvariance) {
  Rng rng = make_rng(10);
  auto x = blobs(rng, {Eigen::Vector2d(0, 0), Eigen::Vector2d(5, 0), Eigen::Vector2d(0, 5)}, 20, 1.0);
  auto in = raw_input(x);
  auto m = fit_em(in, 3, CovarianceFamily::full_varying, 2);
  auto p = permute_components(m, {2, 0, 1});
  EXPECT_NEAR(log_likelihood(p, in.x), log_likelihood(m, in.x), 1e-9);
  EXPECT_DOUBLE_EQ(p.bic, m.bic);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(p.hard_labels(), m.hard_labels()), 1.0);
}

TEST(Mixture, RejectsBadArguments) {
  Rng rng = make_rng(1);
  auto in = raw_input(uniform_matrix(rng, 5, 2));
  EXPECT_THROW(fit_em(in, 0, CovarianceFamily::spherical_equal, 1), ArgumentError);
  EXPECT_THROW(fit_em(in, 5, CovarianceFamily::spherical_equal, 1), ArgumentError);
}

TEST(Mixture, TinyComponentCollapses) {
  // 39 points in a blob plus one far outlier: a K=2 varying fit would put a
  // component on a single row.
  Rng rng = make_rng(12);
  auto x = blobs(rng, {Eigen::Vector2d(0, 0)}, 39, 1.0);
  x.conservativeResize(40, 2);
  x.row(39) << 50, 50;
  EXPECT_THROW(fit_em(raw_input(x), 2, CovarianceFamily::diagonal_varying, 1), CollapseError);
}

TEST(Select, SingleGaussianPicksOneComponent) {
  int ones = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng = make_rng(seed, {0x5e1});
    Eigen::MatrixXd x(80, 3);
    for (Eigen::Index i = 0; i < 80; ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = normal(rng);
    auto in = standardize(x, {"a", "b", "c"});
    ones += select_model(in, 4, all_covariance_families(), seed).best.k == 1;
  }
  EXPECT_GE(ones, 18);
}

TEST(Select, IdenticalPointsFailCleanly) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(3, 2, 4.0);
  auto in = standardize(x, {"a", "b"});
  EXPECT_EQ(in.dropped.size(), 2u);
  try {
    auto sel = select_model(in);
    EXPECT_EQ(sel.best.k, 1);
  } catch (const SelectionError&) {
  }
}

TEST(Select, TiesPreferFewerParameters) {
  Rng rng = make_rng(21);
  auto in = raw_input(blobs(rng, {Eigen::Vector2d(0, 0)}, 50, 1.0));
  auto sel = select_model(in, 1);
  // every K=1 family scores; the winner has the best bic
  double best = -std::numeric_limits<double>::infinity();
  for (auto& e : sel.table)
    if (e.bic) best = std::max(best, *e.bic);
  EXPECT_EQ(sel.best.bic, best);
  EXPECT_EQ(sel.table.size(), 6u);
}

TEST(Standardize, ZeroMeanUnitSd) {
  auto in = cluster_input(default_cohort(), default_schedule(), Stage{4});
  for (Eigen::Index j = 0; j < in.x.cols(); ++j) {
    EXPECT_NEAR(in.x.col(j).mean(), 0.0, 1e-9);
    double sd = std::sqrt(in.x.col(j).squaredNorm() / static_cast<double>(in.x.rows() - 1));
    EXPECT_NEAR(sd, 1.0, 1e-9);
  }
}

TEST(Stage, InitialStageIsArgumentError) {
  EXPECT_THROW(memberships_at_stage(default_cohort(), default_schedule(), Stage{0}, 1), ArgumentError);
}

TEST(Stage, Week1UsesWeek1ColumnsOnly) {
  auto sc = memberships_at_stage(default_cohort(), default_schedule(), Stage{1}, 1, 4);
  ASSERT_FALSE(sc.input.columns.empty());
  for (auto& c : sc.input.columns) EXPECT_NE(c.find("_W1_"), std::string::npos) << c;
  EXPECT_GE(sc.model.k, 1);
}

TEST(Stage, AllZeroActivitySurfacesSelectionError) {
  auto cohort = default_cohort();
  for (auto& r : cohort) r.activity = ActivityGrid{};
  EXPECT_THROW(memberships_at_stage(cohort, default_schedule(), Stage{5}, 1), SelectionError);
}

TEST(Stage, Week5RecoversPlantedArchetypes) {
  auto sched = default_schedule();
  auto g = generate_cohort(CohortGenConfig{}, sched);
  auto sc = memberships_at_stage(g.records, sched, Stage{5}, 1);
  ASSERT_EQ(sc.model.k, 3);
  EXPECT_GE(adjusted_rand_index(sc.membership.labels, g.archetype), 0.9);
  // relabelled by decreasing weight: 0.51, 0.45, 0.04
  EXPECT_NEAR(sc.model.weights(0), 0.51, 0.03);
  EXPECT_NEAR(sc.model.weights(1), 0.45, 0.03);
  EXPECT_NEAR(sc.model.weights(2), 0.04, 0.02);
}

TEST(Stage, DeterministicUnderSeed) {
  auto cohort = default_cohort(4);
  auto a = memberships_at_stage(cohort, default_schedule(), Stage{3}, 9, 4);
  auto b = memberships_at_stage(cohort, default_schedule(), Stage{3}, 9, 4);
  EXPECT_EQ(a.membership.labels, b.membership.labels);
  EXPECT_EQ(a.model.bic, b.model.bic);
}
