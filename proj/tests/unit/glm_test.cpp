#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rocsurf/distributions.hpp"
#include "rocsurf/glm.hpp"
#include "rocsurf/simlab.hpp"

using namespace rocsurf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DesignSpec intercept_only() {
  DesignSpec d;
  d.columns.emplace();
  d.use_t = false;
  return d;
}

Dataset counts_dataset(int n1, int n2, int n3, int unverified) {
  std::vector<double> t;
  std::vector<int> d, v;
  auto add = [&](int k, int count, int verified) {
    for (int i = 0; i < count; ++i) {
      t.push_back(static_cast<double>(t.size()));
      d.push_back(k);
      v.push_back(verified);
    }
  };
  add(1, n1, 1);
  add(2, n2, 1);
  add(3, n3, 1);
  add(1, unverified, 0);
  return oracle::with_labels(t, d, v);
}

Dataset s1_sample(std::size_t n = 250, std::uint64_t rep = 11) {
  StudyConfig c = default_config(Study::s1);
  c.n = n;
  return generate(c, rep);
}

VectorXd total_score(const GlmFit& fit, const Dataset& ds) {
  VectorXd g = VectorXd::Zero(fit.tau.size());
  for (const auto& s : ds) g += subject_score(fit, s);
  return g;
}

}  // namespace

TEST(DiseaseModel, EqualCountsGiveZeroIntercepts) {
  const GlmFit fit = fit_disease(counts_dataset(10, 10, 10, 5), intercept_only());
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(fit.tau[0], 0.0, 1e-10);
  EXPECT_NEAR(fit.tau[1], 0.0, 1e-10);
}

TEST(DiseaseModel, SaturatedInterceptsAreLogOdds) {
  const GlmFit fit = fit_disease(counts_dataset(20, 10, 10, 0), intercept_only());
  EXPECT_NEAR(fit.tau[0], std::log(2.0), 1e-10);
  EXPECT_NEAR(fit.tau[1], 0.0, 1e-10);
}

TEST(DiseaseModel, MatchesGradientAscentOracle) {
  const Dataset ds = s1_sample();
  const GlmFit fit = fit_disease(ds);
  const VectorXd ref = oracle::gradient_ascent_multinomial(ds, {});
  ASSERT_EQ(fit.tau.size(), ref.size());
  for (Eigen::Index j = 0; j < ref.size(); ++j) EXPECT_NEAR(fit.tau[j], ref[j], 1e-6) << "coefficient " << j;
}

TEST(DiseaseModel, ConvergedScoreVanishes) {
  const Dataset ds = s1_sample();
  const GlmFit fit = fit_disease(ds);
  EXPECT_LE(total_score(fit, ds).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(DiseaseModel, RowOrderDoesNotMatter) {
  const Dataset ds = s1_sample(150);
  std::vector<Subject> rev(ds.begin(), ds.end());
  std::reverse(rev.begin(), rev.end());
  const GlmFit a = fit_disease(ds);
  const GlmFit b = fit_disease(Dataset(rev));
  EXPECT_LE((a.tau - b.tau).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(DiseaseModel, ProbabilitiesSumToOne) {
  const Dataset ds = s1_sample();
  const DiseaseProbs p = predict_disease(fit_disease(ds), ds);
  EXPECT_GT(p.clipped, 0u);
  for (Eigen::Index i = 0; i < p.rho.rows(); ++i) {
    EXPECT_NEAR(p.rho.row(i).sum(), 1.0, 1e-12);
    // renormalizing a clipped row can pull the floor down by at most 1 / (1 + 2 eps)
    EXPECT_GE(p.rho.row(i).minCoeff(), kProbabilityFloor / (1 + 2 * kProbabilityFloor));
  }
}

TEST(DiseaseModel, ZeroCoefficientsGiveUniformRows) {
  const Dataset ds = s1_sample(20);
  GlmFit fit;
  fit.family = Family::multinomial3;
  fit.tau = VectorXd::Zero(6);
  const DiseaseProbs p = predict_disease(fit, ds);
  for (Eigen::Index i = 0; i < p.rho.rows(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(p.rho(i, k), 1.0 / 3.0);
  }
}

TEST(DiseaseModel, SeparatedClassesAreReported) {
  const Dataset ds = oracle::with_labels({1, 2, 3, 4, 5, 6, 7}, {1, 1, 2, 2, 3, 3, 1}, {1, 1, 1, 1, 1, 1, 0});
  EXPECT_THROW(fit_disease(ds), SeparationError);
  GlmOptions lenient;
  lenient.fail_on_separation = false;
  EXPECT_TRUE(fit_disease(ds, {}, lenient).separated);
}

TEST(DiseaseModel, NeedsEveryClassVerified) {
  const Dataset ds = oracle::with_labels({1, 2, 3, 4}, {1, 1, 2, 2}, {1, 1, 1, 1});
  EXPECT_THROW(fit_disease(ds), ValidationError);
}

TEST(VerificationModel, LogitInterceptIsLogOdds) {
  std::vector<double> t(100);
  std::iota(t.begin(), t.end(), 0.0);
  std::vector<int> d(100, 1), v(100, 0);
  for (int i = 0; i < 30; ++i) v[static_cast<std::size_t>(i * 3)] = 1;
  const Dataset ds = oracle::with_labels(t, d, v);
  const GlmFit fit = fit_verification(ds, Link::logit, intercept_only());
  EXPECT_NEAR(fit.tau[0], std::log(0.3 / 0.7), 1e-10);
}

TEST(VerificationModel, ProbitInterceptAtHalf) {
  std::vector<double> t(100);
  std::iota(t.begin(), t.end(), 0.0);
  std::vector<int> d(100, 1), v(100, 0);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(2 * i)] = 1;
  const GlmFit fit = fit_verification(oracle::with_labels(t, d, v), Link::probit, intercept_only());
  EXPECT_NEAR(fit.tau[0], 0.0, 1e-10);
}

TEST(VerificationModel, RecoversGeneratingCoefficients) {
  const Dataset ds = s1_sample(250, 4);
  const GlmFit fit = fit_verification(ds, Link::logit);
  const ScoreBlocks sb = score_and_jacobian(fit, ds);
  const MatrixXd hinv = sb.jacobian_sum.inverse();
  const MatrixXd cov = hinv * (sb.scores.transpose() * sb.scores) * hinv.transpose();
  const Eigen::Vector3d truth(0.5, -0.3, 0.75);
  for (int j = 0; j < 3; ++j) {
    EXPECT_LE(std::abs(fit.tau[j] - truth[j]), 3.0 * std::sqrt(cov(j, j))) << "coefficient " << j;
  }
}

TEST(VerificationModel, ZeroCoefficientsGiveHalf) {
  const Dataset ds = s1_sample(10);
  GlmFit fit;
  fit.family = Family::binary_logit;
  fit.tau = VectorXd::Zero(3);
  const VerificationProbs p = predict_verification(fit, ds);
  for (Eigen::Index i = 0; i < p.pi.size(); ++i) EXPECT_DOUBLE_EQ(p.pi[i], 0.5);
}

TEST(VerificationModel, ExtremePredictorsAreClippedBelowOnly) {
  const Dataset ds = oracle::with_labels({1, -1}, {1, 1}, {1, 0});
  GlmFit fit;
  fit.family = Family::binary_logit;
  fit.design.use_t = true;
  fit.design.columns.emplace();
  fit.tau = Eigen::Vector2d(0.0, 40.0);
  const VerificationProbs p = predict_verification(fit, ds);
  EXPECT_DOUBLE_EQ(p.pi[0], 1.0);
  EXPECT_DOUBLE_EQ(p.pi[1], kProbabilityFloor);
  EXPECT_EQ(p.clipped, 1u);
}

TEST(Scores, UnverifiedSubjectContributesNothingToDiseaseScore) {
  const Dataset ds = s1_sample(60);
  const GlmFit fit = fit_disease(ds);
  for (const auto& s : ds) {
    if (s.v) continue;
    EXPECT_TRUE(subject_score(fit, s).isZero(0.0));
    EXPECT_TRUE(subject_score_jacobian(fit, s).isZero(0.0));
  }
}

TEST(Scores, ProbitInterceptScoreAtZero) {
  const Dataset ds = oracle::with_labels({0.3, 0.7}, {1, 1}, {1, 0});
  GlmFit fit;
  fit.family = Family::binary_probit;
  fit.design = intercept_only();
  fit.tau = VectorXd::Zero(1);
  const double two_phi0 = 2.0 * normal_pdf(0.0);
  EXPECT_NEAR(subject_score(fit, ds[0])[0], two_phi0, 1e-15);
  EXPECT_NEAR(subject_score(fit, ds[1])[0], -two_phi0, 1e-15);
  EXPECT_NEAR(two_phi0, 0.7979, 1e-4);
}

class ScoreOracle : public ::testing::TestWithParam<int> {};

TEST_P(ScoreOracle, ScoresAreLikelihoodGradients) {
  std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(GetParam()));
  oracle::RandomDataOptions opt;
  opt.n = 20 + static_cast<std::size_t>(GetParam()) % 30;
  opt.p = 1 + static_cast<std::size_t>(GetParam()) % 2;
  const Dataset ds = oracle::random_dataset(rng, opt);
  std::normal_distribution<double> z(0.0, 0.5);

  GlmFit rho;
  rho.family = Family::multinomial3;
  rho.tau = VectorXd::NullaryExpr(static_cast<Eigen::Index>(2 * (2 + opt.p)), [&] { return z(rng); });
  const MatrixXd grad_rho = oracle::fd_jacobian(
      [&](const VectorXd& x) { return VectorXd::Constant(1, oracle::multinomial_loglik(ds, {}, x)); }, rho.tau);
  EXPECT_LE(oracle::relative_error(total_score(rho, ds).transpose(), grad_rho), 1e-6);

  for (Link link : {Link::logit, Link::probit}) {
    GlmFit pi;
    pi.family = link == Link::logit ? Family::binary_logit : Family::binary_probit;
    pi.tau = VectorXd::NullaryExpr(static_cast<Eigen::Index>(2 + opt.p), [&] { return z(rng); });
    const MatrixXd grad_pi = oracle::fd_jacobian(
        [&](const VectorXd& x) { return VectorXd::Constant(1, oracle::binary_loglik(ds, link, {}, x)); }, pi.tau);
    EXPECT_LE(oracle::relative_error(total_score(pi, ds).transpose(), grad_pi), 1e-6) << to_string(link);
  }
}

TEST_P(ScoreOracle, ScoreJacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(2000 + static_cast<std::uint64_t>(GetParam()));
  oracle::RandomDataOptions opt;
  opt.n = 20;
  opt.p = 1 + static_cast<std::size_t>(GetParam()) % 2;
  const Dataset ds = oracle::random_dataset(rng, opt);
  std::normal_distribution<double> z(0.0, 0.5);

  std::vector<GlmFit> fits(3);
  fits[0].family = Family::multinomial3;
  fits[0].tau = VectorXd::NullaryExpr(static_cast<Eigen::Index>(2 * (2 + opt.p)), [&] { return z(rng); });
  fits[1].family = Family::binary_logit;
  fits[2].family = Family::binary_probit;
  for (int f = 1; f < 3; ++f) {
    fits[static_cast<std::size_t>(f)].tau =
        VectorXd::NullaryExpr(static_cast<Eigen::Index>(2 + opt.p), [&] { return z(rng); });
  }
  for (const GlmFit& fit : fits) {
    for (const auto& s : ds) {
      const MatrixXd fd = oracle::fd_jacobian(
          [&](const VectorXd& x) {
            GlmFit g = fit;
            g.tau = x;
            return subject_score(g, s);
          },
          fit.tau);
      const MatrixXd analytic = subject_score_jacobian(fit, s);
      if (fd.isZero(0.0)) {
        EXPECT_TRUE(analytic.isZero(0.0));
        continue;
      }
      EXPECT_LE(oracle::relative_error(analytic, fd), 1e-6) << to_string(fit.family);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Random, ScoreOracle, ::testing::Range(0, 8));

TEST(ProbabilityGradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(77);
  const Dataset ds = oracle::random_dataset(rng, {});
  const GlmFit rho = fit_disease(ds);
  for (Link link : {Link::logit, Link::probit}) {
    const GlmFit pi = fit_verification(ds, link);
    for (const auto& s : ds) {
      const VectorXd u = design_row(s, {});
      const MatrixXd fd_rho = oracle::fd_jacobian(
          [&](const VectorXd& x) {
            GlmFit g = rho;
            g.tau = x;
            Eigen::Vector3d r = disease_probabilities(g, u);
            clip_disease_row(r);
            return VectorXd(r);
          },
          rho.tau);
      EXPECT_LE(oracle::relative_error(clipped_disease_prob_gradient(rho, u), fd_rho), 1e-6);
      const MatrixXd fd_pi = oracle::fd_jacobian(
          [&](const VectorXd& x) {
            GlmFit g = pi;
            g.tau = x;
            return VectorXd::Constant(1, 1.0 / std::max(verification_probability(g, u), kProbabilityFloor));
          },
          pi.tau);
      EXPECT_LE(oracle::relative_error(inverse_pi_gradient(pi, u), fd_pi), 1e-6);
    }
  }
}
