#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rocsurf/asymptotics.hpp"
#include "rocsurf/simlab.hpp"

using namespace rocsurf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset s1_sample(std::size_t n, std::uint64_t rep) {
  StudyConfig c = default_config(Study::s1);
  c.n = n;
  return generate(c, rep);
}

}  // namespace

TEST(EstimatingStack, VanishesAtTheEstimate) {
  const Dataset ds = s1_sample(250, 21);
  for (Link link : {Link::logit, Link::probit}) {
    ModelSpec spec;
    spec.link = link;
    const NuisanceFits fits = fit_nuisance(ds, kCorrectedMethods, spec);
    for (Method m : kCorrectedMethods) {
      const AlphaHat a = alpha_hat(m, ds, CutPair(2, 4), fits);
      const MatrixXd g = estimating_stack(a, ds, fits);
      ASSERT_EQ(g.cols(), a.size());
      EXPECT_LE(g.colwise().mean().lpNorm<Eigen::Infinity>(), 1e-6) << to_string(m);
    }
  }
}

TEST(EstimatingStack, ImputationRows) {
  const Dataset ds = s1_sample(100, 22);
  const NuisanceFits fits = fit_nuisance(ds, kCorrectedMethods, {});
  AlphaHat fi = alpha_hat(Method::fi, ds, CutPair(2, 4), fits);
  const MatrixXd g_fi = estimating_stack(fi, ds, fits);
  AlphaHat msi = alpha_hat(Method::msi, ds, CutPair(2, 4), fits);
  msi.values[0] = 0.4;
  const MatrixXd g_msi = estimating_stack(msi, ds, fits);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    EXPECT_NEAR(g_fi(r, 0), fits.disease->probs.rho(r, 0) - fi.values[0], 1e-14);
    if (ds[i].v && ds[i].d == 1) EXPECT_NEAR(g_msi(r, 0), 0.6, 1e-15);
  }
}

TEST(JacobianStack, ThetaDiagonal) {
  const Dataset ds = s1_sample(200, 23);
  const NuisanceFits fits = fit_nuisance(ds, kCorrectedMethods, {});
  const double n = static_cast<double>(ds.size());
  for (Method m : {Method::fi, Method::msi, Method::spe}) {
    const MatrixXd b = jacobian_stack(alpha_hat(m, ds, CutPair(2, 4), fits), ds, fits);
    EXPECT_DOUBLE_EQ(b(0, 0), -n) << to_string(m);
  }
  const MatrixXd b = jacobian_stack(alpha_hat(Method::ipw, ds, CutPair(2, 4), fits), ds, fits);
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds[i].v) sum += 1.0 / fits.verification->probs.pi[static_cast<Eigen::Index>(i)];
  }
  EXPECT_NEAR(b(0, 0), -sum, 1e-10 * sum);
}

class StackOracle : public ::testing::TestWithParam<int> {};

TEST_P(StackOracle, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(3000 + static_cast<std::uint64_t>(GetParam()));
  oracle::RandomDataOptions opt;
  opt.n = 30;
  opt.p = 1;
  const Dataset ds = oracle::random_dataset(rng, opt);
  ModelSpec spec;
  spec.link = GetParam() % 2 == 0 ? Link::logit : Link::probit;
  spec.glm.fail_on_separation = false;
  NuisanceFits fits;
  try {
    fits = fit_nuisance(ds, kCorrectedMethods, spec);
  } catch (const NumericalError&) {
    GTEST_SKIP() << "working models do not converge on this draw";
  }
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  const double c1 = u(rng);
  const CutPair cut(c1, c1 + 0.4 + std::abs(u(rng)));
  for (Method m : kCorrectedMethods) {
    const AlphaHat a = alpha_hat(m, ds, cut, fits);
    const MatrixXd fd = oracle::fd_jacobian(
        [&](const VectorXd& x) {
          AlphaHat b = a;
          b.values = x;
          return VectorXd(estimating_stack(b, ds, fits).colwise().sum().transpose());
        },
        a.values);
    EXPECT_LE(oracle::relative_error(jacobian_stack(a, ds, fits), fd), 1e-6) << to_string(m);
  }
}

INSTANTIATE_TEST_SUITE_P(Random, StackOracle, ::testing::Range(0, 10));

TEST(Sandwich, BinomialVarianceOfAMean) {
  const Dataset ds = oracle::with_labels({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {1, 1, 1, 1, 2, 2, 2, 3, 3, 3},
                                         std::vector<int>(10, 1));
  const AlphaHat a = alpha_hat(Method::full, ds, CutPair(4.5, 7.5), {});
  const SandwichCov s = sandwich(a, ds, {});
  EXPECT_NEAR(s.sigma(0, 0), 0.4 * 0.6, 1e-14);
  EXPECT_NEAR(s.sigma(1, 1), 0.3 * 0.7, 1e-14);
}

TEST(Sandwich, SymmetricPositiveSemidefinite) {
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    const Dataset ds = s1_sample(250, 30 + rep);
    const NuisanceFits fits = fit_nuisance(ds, kCorrectedMethods, {});
    for (Method m : kCorrectedMethods) {
      const SandwichCov s = sandwich(alpha_hat(m, ds, CutPair(2, 4), fits), ds, fits);
      EXPECT_LE((s.sigma - s.sigma.transpose()).cwiseAbs().maxCoeff(), 1e-10 * s.sigma.cwiseAbs().maxCoeff());
      const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s.sigma);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * eig.eigenvalues().cwiseAbs().maxCoeff());
      const TcfCov c = tcf_covariance(m, ds, CutPair(2, 4), fits);
      EXPECT_TRUE((c.xi.diagonal().array() >= 0.0).all());
    }
  }
}

TEST(Sandwich, PerfectSeparationHasNoVariance) {
  const Dataset ds = oracle::with_labels({1, 2, 3, 4, 5, 6}, {1, 1, 2, 2, 3, 3}, std::vector<int>(6, 1));
  const TcfCov c = tcf_covariance(Method::full, ds, CutPair(2.5, 4.5), {});
  EXPECT_LE(c.xi.diagonal().cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Sandwich, LocationEquivariance) {
  const Dataset ds = s1_sample(250, 41);
  std::vector<Subject> moved(ds.begin(), ds.end());
  for (auto& s : moved) s.t += 3.0;
  const Dataset shifted(std::move(moved));
  const NuisanceFits a = fit_nuisance(ds, kCorrectedMethods, {});
  const NuisanceFits b = fit_nuisance(shifted, kCorrectedMethods, {});
  for (Method m : kCorrectedMethods) {
    const TcfEstimate ea = estimate_tcf_with_sd(m, ds, CutPair(2, 4), a);
    const TcfEstimate eb = estimate_tcf_with_sd(m, shifted, CutPair(5, 7), b);
    EXPECT_LE((ea.tcf - eb.tcf).lpNorm<Eigen::Infinity>(), 1e-8) << to_string(m);
    EXPECT_LE((*ea.asy_sd - *eb.asy_sd).lpNorm<Eigen::Infinity>(), 1e-8) << to_string(m);
  }
}

TEST(DeltaMethod, HandEvaluatedEntries) {
  AlphaHat a;
  a.values = VectorXd::Zero(6);
  a.values << 0.5, 0.3, 0.25, 0.2, 0.2, 0.1;
  const MatrixXd dh = h_gradient(a);
  EXPECT_DOUBLE_EQ(dh(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(dh(0, 2), -2.0);
  EXPECT_DOUBLE_EQ(dh(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(dh(2, 0), dh(2, 1));
}

TEST(DeltaMethod, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.05, 0.4);
  for (int rep = 0; rep < 20; ++rep) {
    AlphaHat a;
    a.dims.rho = 4;
    a.values = VectorXd::NullaryExpr(10, [&] { return u(rng); });
    const MatrixXd fd = oracle::fd_jacobian(
        [&](const VectorXd& x) {
          AlphaHat b = a;
          b.values = x;
          return VectorXd(h_value(b));
        },
        a.values, 1e-5);
    EXPECT_LE(oracle::relative_error(h_gradient(a), fd), 1e-8);
  }
}

TEST(DeltaMethod, DegenerateThetaIsReported) {
  AlphaHat a;
  a.values = VectorXd::Zero(6);
  a.values << 0.0, 0.3, 0.0, 0.2, 0.1, 0.1;
  EXPECT_THROW(h_gradient(a), DegenerateTheta);
}

TEST(Wald, NinetyFivePercent) {
  EXPECT_NEAR(wald_multiplier(0.95), 1.959963984540054, 1e-12);
  const auto iv = wald_intervals(Eigen::Vector3d(0.5, 0.5, 0.5), Eigen::Vector3d(0.1, 0, 0.2), 0.95);
  EXPECT_NEAR(iv[0].lo, 0.5 - 0.1959963984540054, 1e-12);
  EXPECT_EQ(iv[1].lo, iv[1].hi);
  EXPECT_THROW(wald_multiplier(1.0), ContractError);
}

TEST(Ellipse, IdentityRadius) {
  const Ellipse e = confidence_region(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.3, 0.6), 0.95);
  EXPECT_NEAR(e.radius2, 5.991464547107979, 1e-9);
  EXPECT_TRUE(e.contains(e.center));
  EXPECT_EQ(e.polygon.size(), 100u);
}

TEST(Ellipse, AxesFollowCovariance) {
  Eigen::Matrix2d cov;
  cov << 4, 0, 0, 1;
  const Ellipse e = confidence_region(cov, Eigen::Vector2d::Zero(), 0.95);
  EXPECT_NEAR(e.semi_axes[0] / e.semi_axes[1], 2.0, 1e-12);
  for (const auto& p : e.polygon) EXPECT_NEAR(p.dot(e.shape * p), e.radius2, 1e-9);
}

TEST(Ellipse, PolygonSurroundsCenterForAnyPositiveDefiniteInput) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::Matrix2d l;
    l << z(rng), 0, z(rng), z(rng);
    const Eigen::Matrix2d cov = l * l.transpose() + 1e-3 * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d c(z(rng), z(rng));
    const Ellipse e = confidence_region(cov, c, 0.9);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : e.polygon) mean += p;
    mean /= static_cast<double>(e.polygon.size());
    EXPECT_TRUE(e.contains(mean));
    EXPECT_LE((mean - c).norm(), 1e-9 * (1 + e.semi_axes[0]));
  }
}

TEST(Ellipse, SingularCovarianceIsRejected) {
  Eigen::Matrix2d cov;
  cov << 1, 1, 1, 1;
  EXPECT_THROW(confidence_region(cov, Eigen::Vector2d::Zero(), 0.95), SingularCovariance);
}
