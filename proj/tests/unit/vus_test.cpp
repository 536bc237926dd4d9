#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rocsurf/simlab.hpp"
#include "rocsurf/vus.hpp"

using namespace rocsurf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<double> t_of(const Dataset& ds) {
  std::vector<double> t;
  for (const auto& s : ds) t.push_back(s.t);
  return t;
}

MatrixXd random_weights(std::mt19937_64& rng, Eigen::Index n, bool signed_weights) {
  std::uniform_real_distribution<double> u(signed_weights ? -0.5 : 0.0, 1.5);
  return MatrixXd::NullaryExpr(n, 3, [&] { return u(rng); });
}

std::vector<double> random_t(std::mt19937_64& rng, std::size_t n, int levels) {
  std::normal_distribution<double> z;
  std::vector<double> t(n);
  for (auto& x : t) x = levels > 0 ? std::round(z(rng) * levels / 3.0) : z(rng);
  return t;
}

// V = 1 for everyone and a verification fit whose probabilities are exactly 1.
struct CompleteCase {
  Dataset ds;
  NuisanceFits fits;
};

CompleteCase complete_case(std::mt19937_64& rng, std::size_t n) {
  oracle::RandomDataOptions opt;
  opt.n = n;
  Dataset raw = oracle::random_dataset(rng, opt);
  std::vector<Subject> subjects(raw.begin(), raw.end());
  std::uniform_int_distribution<int> cls(1, 3);
  for (auto& s : subjects) {
    if (!s.v) s.d = cls(rng);
    s.v = true;
  }
  CompleteCase c{Dataset(std::move(subjects)), {}};
  GlmFit rho = fit_disease(c.ds);
  DiseaseProbs rp = predict_disease(rho, c.ds);
  c.fits.disease = DiseaseModel{rho, rp};
  GlmFit pi;
  pi.family = Family::binary_logit;
  pi.design.columns.emplace();
  pi.design.use_t = false;
  pi.tau = VectorXd::Constant(1, 40.0);
  VerificationProbs pp = predict_verification(pi, c.ds);
  c.fits.verification = VerificationModel{pi, pp};
  return c;
}

}  // namespace

TEST(Kernel, TiePatterns) {
  EXPECT_EQ(triple_kernel(1, 2, 3), 1.0);
  EXPECT_EQ(triple_kernel(1, 2, 2), 0.5);
  EXPECT_EQ(triple_kernel(2, 2, 3), 0.5);
  EXPECT_EQ(triple_kernel(2, 2, 2), 1.0 / 6.0);
  EXPECT_EQ(triple_kernel(3, 2, 1), 0.0);
  EXPECT_EQ(triple_kernel(1, 3, 2), 0.0);
  EXPECT_EQ(triple_kernel(2, 1, 3), 0.0);
}

TEST(VusPoint, OrderedClassesGiveOne) {
  const Dataset ds = oracle::with_labels({1, 2, 3, 4, 5, 6, 7}, {1, 1, 2, 2, 3, 3, 3}, std::vector<int>(7, 1));
  EXPECT_EQ(vus_point(Method::full, ds, {}).mu, 1.0);
}

TEST(VusPoint, AllTiedGivesOneSixth) {
  for (std::size_t n : {9u, 31u, 100u}) {
    std::vector<int> d(n), ones(n, 1);
    for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<int>(i * 7 % 3) + 1;
    const Dataset ds = oracle::with_labels(std::vector<double>(n, 2.5), d, ones);
    EXPECT_EQ(vus_point(Method::full, ds, {}, VusEngine::fast).mu, 1.0 / 6.0) << n;
    EXPECT_EQ(vus_point(Method::full, ds, {}, VusEngine::naive).mu, 1.0 / 6.0) << n;
  }
}

TEST(VusPoint, NoClassTriplesIsDegenerate) {
  const Dataset ds = oracle::with_labels({1, 2, 3}, {1, 1, 3}, {1, 1, 1});
  EXPECT_THROW(vus_point(Method::full, ds, {}), DegenerateDenominator);
}

class EngineOracle : public ::testing::TestWithParam<int> {};

TEST_P(EngineOracle, FastEqualsNaive) {
  std::mt19937_64 rng(4000 + static_cast<std::uint64_t>(GetParam()));
  const std::size_t n = 3 + static_cast<std::size_t>(GetParam()) * 97 % 98;
  const int levels = GetParam() % 3 == 0 ? 0 : (GetParam() % 3 == 1 ? 2 : 6);
  const std::vector<double> t = random_t(rng, n, levels);
  const MatrixXd w = random_weights(rng, static_cast<Eigen::Index>(n), GetParam() % 2 == 1);
  const VusSums fast = vus_sums(t, w, VusEngine::fast);
  const VusSums naive = vus_sums(t, w, VusEngine::naive);
  const oracle::TripleSums ref = oracle::triple_sums(t, w);
  const double scale = std::max(1.0, std::abs(ref.denominator));
  EXPECT_LE(std::abs(fast.numerator - ref.numerator), 1e-12 * scale);
  EXPECT_LE(std::abs(fast.denominator - ref.denominator), 1e-12 * scale);
  EXPECT_LE(std::abs(naive.numerator - ref.numerator), 1e-12 * scale);
  EXPECT_NO_THROW(vus_sums(t, w, VusEngine::checked));
}

TEST_P(EngineOracle, SymmetricTermsMatchBruteForce) {
  std::mt19937_64 rng(5000 + static_cast<std::uint64_t>(GetParam()));
  const std::size_t n = 4 + static_cast<std::size_t>(GetParam()) * 37 % 50;
  const std::vector<double> t = random_t(rng, n, GetParam() % 2 == 0 ? 3 : 0);
  const MatrixXd w = random_weights(rng, static_cast<Eigen::Index>(n), true);
  const double mu = 0.4;
  const VusProjections pr = vus_projections(t, w);
  const VectorXd fast =
      (w.cwiseProduct(pr.f - mu * pr.g)).rowwise().sum() / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
  const VectorXd ref = oracle::symmetric_triple_terms(t, w, mu);
  EXPECT_LE(oracle::relative_error(fast, ref), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Random, EngineOracle, ::testing::Range(0, 30));

class InfluenceOracle : public ::testing::TestWithParam<int> {};

TEST_P(InfluenceOracle, EstimatingGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6000 + static_cast<std::uint64_t>(GetParam()));
  oracle::RandomDataOptions opt;
  opt.n = 30 + static_cast<std::size_t>(GetParam()) % 30;
  opt.tie_levels = GetParam() % 3 == 0 ? 6 : 0;
  const Dataset ds = oracle::random_dataset(rng, opt);
  ModelSpec spec;
  spec.link = GetParam() % 2 == 0 ? Link::logit : Link::probit;
  spec.glm.fail_on_separation = false;
  const NuisanceFits fits = fit_nuisance(ds, kCorrectedMethods, spec);
  for (Method m : kCorrectedMethods) {
    const double mu = vus_point(m, ds, fits).mu;
    const TauDims dims = tau_dims(m, fits);
    VectorXd tau(dims.total());
    if (dims.rho) tau.head(dims.rho) = fits.disease->fit.tau;
    if (dims.pi) tau.tail(dims.pi) = fits.verification->fit.tau;
    const MatrixXd fd = oracle::fd_jacobian(
        [&](const VectorXd& x) {
          NuisanceFits f = fits;
          if (dims.rho) f.disease->fit.tau = x.head(dims.rho);
          if (dims.pi) f.verification->fit.tau = x.tail(dims.pi);
          return VectorXd::Constant(1, vus_estimating_function(m, ds, f, mu));
        },
        tau);
    EXPECT_LE(oracle::relative_error(vus_estimating_gradient(m, ds, fits, mu), fd), 1e-6) << to_string(m);
  }
}

TEST_P(InfluenceOracle, QMatchesBruteForce) {
  std::mt19937_64 rng(7000 + static_cast<std::uint64_t>(GetParam()));
  oracle::RandomDataOptions opt;
  opt.n = 25 + static_cast<std::size_t>(GetParam()) % 20;
  const Dataset ds = oracle::random_dataset(rng, opt);
  ModelSpec spec;
  spec.glm.fail_on_separation = false;
  const NuisanceFits fits = fit_nuisance(ds, kCorrectedMethods, spec);
  const std::vector<double> t = t_of(ds);
  const double norm = static_cast<double>(ds.size() - 1) * static_cast<double>(ds.size() - 2);
  for (Method m : kCorrectedMethods) {
    const double mu = vus_point(m, ds, fits).mu;
    VectorXd ref = oracle::symmetric_triple_terms(t, vus_weights(m, ds, fits), mu);
    auto correct = [&](const GlmFit& fit, bool is_rho) {
      const MatrixXd fd = oracle::fd_jacobian(
          [&](const VectorXd& x) {
            NuisanceFits f = fits;
            (is_rho ? f.disease->fit.tau : f.verification->fit.tau) = x;
            return VectorXd::Constant(1, vus_estimating_function(m, ds, f, mu));
          },
          fit.tau);
      MatrixXd hessian = MatrixXd::Zero(fit.tau.size(), fit.tau.size());
      MatrixXd scores(static_cast<Eigen::Index>(ds.size()), fit.tau.size());
      for (std::size_t i = 0; i < ds.size(); ++i) {
        scores.row(static_cast<Eigen::Index>(i)) = subject_score(fit, ds[i]).transpose();
        hessian += subject_score_jacobian(fit, ds[i]);
      }
      ref -= scores * hessian.inverse().transpose() * fd.transpose() / norm;
    };
    if (needs_disease_model(m)) correct(fits.disease->fit, true);
    if (needs_verification_model(m)) correct(fits.verification->fit, false);
    EXPECT_LE(oracle::relative_error(vus_influence(m, ds, fits, mu), ref), 1e-6) << to_string(m);
  }
}

INSTANTIATE_TEST_SUITE_P(Random, InfluenceOracle, ::testing::Range(0, 8));

TEST(VusReduction, CompleteVerificationMatchesFull) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    const CompleteCase c = complete_case(rng, 60);
    const double full = vus_point(Method::full, c.ds, c.fits).mu;
    for (Method m : {Method::msi, Method::ipw, Method::spe}) {
      EXPECT_LE(std::abs(vus_point(m, c.ds, c.fits).mu - full), 1e-12) << to_string(m);
    }
  }
}

TEST(VusInvariance, MonotoneTransformOfT) {
  std::mt19937_64 rng(44);
  for (int rep = 0; rep < 10; ++rep) {
    const std::vector<double> t = random_t(rng, 80, rep % 2 == 0 ? 4 : 0);
    std::vector<double> moved(t.size());
    std::transform(t.begin(), t.end(), moved.begin(), [](double x) { return std::exp(x) + x * x * x; });
    const MatrixXd w = random_weights(rng, 80, true);
    const VusSums a = vus_sums(t, w);
    const VusSums b = vus_sums(moved, w);
    EXPECT_EQ(a.numerator, b.numerator);
    EXPECT_EQ(a.denominator, b.denominator);
  }
}

TEST(VusInvariance, PermutationOfSubjects) {
  StudyConfig cfg = default_config(Study::vus3);
  cfg.n = 120;
  const Dataset ds = generate(cfg, 2);
  std::vector<Subject> shuffled(ds.begin(), ds.end());
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const Dataset pds(std::move(shuffled));
  const ModelSpec spec = working_models(cfg);
  const NuisanceFits a = fit_nuisance(ds, kCorrectedMethods, spec);
  const NuisanceFits b = fit_nuisance(pds, kCorrectedMethods, spec);
  for (Method m : kCorrectedMethods) {
    const VusEstimate ea = estimate_vus(m, ds, a);
    const VusEstimate eb = estimate_vus(m, pds, b);
    EXPECT_NEAR(ea.mu, eb.mu, 1e-12) << to_string(m);
    EXPECT_NEAR(*ea.asy_var, *eb.asy_var, 1e-12) << to_string(m);
    EXPECT_GE(*ea.asy_var, 0.0);
  }
}

TEST(VusVariance, FullDataHasNoCorrection) {
  std::mt19937_64 rng(12);
  const CompleteCase c = complete_case(rng, 40);
  const double mu = vus_point(Method::full, c.ds, {}).mu;
  const VectorXd q = vus_influence(Method::full, c.ds, {}, mu);
  const VectorXd ref = oracle::symmetric_triple_terms(t_of(c.ds), vus_weights(Method::full, c.ds, {}), mu);
  EXPECT_LE(oracle::relative_error(q, ref), 1e-12);
}

TEST(VusVariance, NeedsFourSubjects) {
  const Dataset ds = oracle::with_labels({1, 2, 3}, {1, 2, 3}, {1, 1, 1});
  EXPECT_THROW(estimate_vus(Method::full, ds, {}), ContractError);
}
