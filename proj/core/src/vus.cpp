#include "rocsurf/vus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace rocsurf {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kHalf = 0.5;
constexpr double kSixth = 1.0 / 6.0;
constexpr double kDenominatorFloor = 1e-8;
constexpr double kEngineTolerance = 1e-10;

void check_shape(std::span<const double> t, const MatrixXd& w) {
  if (static_cast<Index>(t.size()) != w.rows() || w.cols() != 3) {
    throw ContractError("VUS weights must be n x 3 and aligned with the test values");
  }
}

VusSums naive_sums(std::span<const double> t, const MatrixXd& w) {
  const std::size_t n = t.size();
  VusSums s;
  for (std::size_t i = 0; i < n; ++i) {
    const double w1 = w(static_cast<Index>(i), 0);
    if (w1 == 0.0) continue;
    for (std::size_t l = 0; l < n; ++l) {
      if (l == i) continue;
      const double w12 = w1 * w(static_cast<Index>(l), 1);
      if (w12 == 0.0) continue;
      for (std::size_t r = 0; r < n; ++r) {
        if (r == i || r == l) continue;
        const double prod = w12 * w(static_cast<Index>(r), 2);
        s.numerator += prod * triple_kernel(t[i], t[l], t[r]);
        s.denominator += prod;
      }
    }
  }
  return s;
}

}  // namespace

double triple_kernel(double ti, double tl, double tr) noexcept {
  if (ti < tl) {
    if (tl < tr) return 1.0;
    if (tl == tr) return kHalf;
    return 0.0;
  }
  if (ti == tl) {
    if (tl < tr) return kHalf;
    if (tl == tr) return kSixth;
  }
  return 0.0;
}

VusProjections vus_projections(std::span<const double> t, const MatrixXd& w) {
  check_shape(t, w);
  const std::size_t n = t.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });

  // Tie blocks in ascending order of t.
  std::vector<std::size_t> block_of(n);
  struct Block {
    double w1 = 0, w2 = 0, w3 = 0;     // class weight sums
    double p12 = 0, p13 = 0, p23 = 0;  // same-subject cross products
  };
  std::vector<Block> blocks;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = order[j];
    if (j == 0 || t[i] != t[order[j - 1]]) blocks.emplace_back();
    block_of[i] = blocks.size() - 1;
    Block& b = blocks.back();
    const auto ii = static_cast<Index>(i);
    const double a1 = w(ii, 0), a2 = w(ii, 1), a3 = w(ii, 2);
    b.w1 += a1;
    b.w2 += a2;
    b.w3 += a3;
    b.p12 += a1 * a2;
    b.p13 += a1 * a3;
    b.p23 += a2 * a3;
  }
  const std::size_t nb = blocks.size();

  // below1[b] = sum of w1 over blocks < b; above3[b] = sum of w3 over blocks > b.
  std::vector<double> below1(nb, 0.0), above3(nb, 0.0);
  for (std::size_t b = 1; b < nb; ++b) below1[b] = below1[b - 1] + blocks[b - 1].w1;
  for (std::size_t b = nb - 1; b-- > 0;) above3[b] = above3[b + 1] + blocks[b + 1].w3;

  // Position 1 tails over blocks > b; position 3 heads over blocks < b.
  std::vector<double> tail_pairs(nb, 0.0), tail_p23(nb, 0.0);
  for (std::size_t b = nb - 1; b-- > 0;) {
    const Block& nx = blocks[b + 1];
    tail_pairs[b] = tail_pairs[b + 1] + nx.w2 * above3[b + 1] + kHalf * nx.w2 * nx.w3;
    tail_p23[b] = tail_p23[b + 1] + nx.p23;
  }
  std::vector<double> head_pairs(nb, 0.0), head_p12(nb, 0.0);
  for (std::size_t b = 1; b < nb; ++b) {
    const Block& pv = blocks[b - 1];
    head_pairs[b] = head_pairs[b - 1] + pv.w2 * below1[b - 1] + kHalf * pv.w1 * pv.w2;
    head_p12[b] = head_p12[b - 1] + pv.p12;
  }

  double s1 = 0, s2 = 0, s3 = 0, sp12 = 0, sp13 = 0, sp23 = 0;
  for (const Block& b : blocks) {
    s1 += b.w1;
    s2 += b.w2;
    s3 += b.w3;
    sp12 += b.p12;
    sp13 += b.p13;
    sp23 += b.p23;
  }

  VusProjections out{MatrixXd(static_cast<Index>(n), 3), MatrixXd(static_cast<Index>(n), 3)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Index>(i);
    const std::size_t b = block_of[i];
    const Block& B = blocks[b];
    const double a1 = w(ii, 0), a2 = w(ii, 1), a3 = w(ii, 2);

    // Sum over all companion pairs, then remove coincident indices:
    // distinct = all - (l = r) - (companion = i, twice) + 2 (all equal).
    const double all1 = tail_pairs[b] + kHalf * B.w2 * above3[b] + kSixth * B.w2 * B.w3;
    const double f1 = all1 - (kHalf * tail_p23[b] + kSixth * B.p23) - a2 * (kHalf * above3[b] + kSixth * B.w3) -
                      a3 * kSixth * B.w2 + 2.0 * kSixth * a2 * a3;

    const double all2 = below1[b] * above3[b] + kHalf * below1[b] * B.w3 + kHalf * B.w1 * above3[b] +
                        kSixth * B.w1 * B.w3;
    const double f2 = all2 - kSixth * B.p13 - a1 * (kHalf * above3[b] + kSixth * B.w3) -
                      a3 * (kHalf * below1[b] + kSixth * B.w1) + 2.0 * kSixth * a1 * a3;

    const double all3 = head_pairs[b] + kHalf * B.w2 * below1[b] + kSixth * B.w1 * B.w2;
    const double f3 = all3 - (kHalf * head_p12[b] + kSixth * B.p12) - a1 * kSixth * B.w2 -
                      a2 * (kHalf * below1[b] + kSixth * B.w1) + 2.0 * kSixth * a1 * a2;

    out.f(ii, 0) = f1;
    out.f(ii, 1) = f2;
    out.f(ii, 2) = f3;
    out.g(ii, 0) = s2 * s3 - sp23 - a2 * s3 - a3 * s2 + 2.0 * a2 * a3;
    out.g(ii, 1) = s1 * s3 - sp13 - a1 * s3 - a3 * s1 + 2.0 * a1 * a3;
    out.g(ii, 2) = s1 * s2 - sp12 - a1 * s2 - a2 * s1 + 2.0 * a1 * a2;
  }
  return out;
}

VusSums vus_sums(std::span<const double> t, const MatrixXd& w, VusEngine engine) {
  check_shape(t, w);
  if (engine == VusEngine::naive) return naive_sums(t, w);
  const VusProjections pr = vus_projections(t, w);
  VusSums s;
  s.numerator = w.col(0).dot(pr.f.col(0));
  s.denominator = w.col(0).dot(pr.g.col(0));
  if (engine == VusEngine::checked) {
    const VusSums ref = naive_sums(t, w);
    const double scale = std::max(1.0, std::abs(ref.denominator));
    if (std::abs(ref.numerator - s.numerator) > kEngineTolerance * scale ||
        std::abs(ref.denominator - s.denominator) > kEngineTolerance * scale) {
      throw InternalError("VUS engines disagree: fast (" + std::to_string(s.numerator) + ", " +
                          std::to_string(s.denominator) + ") vs naive (" + std::to_string(ref.numerator) + ", " +
                          std::to_string(ref.denominator) + ")");
    }
  }
  return s;
}

namespace {

std::vector<double> test_values(const Dataset& ds) {
  std::vector<double> t;
  t.reserve(ds.size());
  for (const auto& s : ds) t.push_back(s.t);
  return t;
}

const GlmFit* rho_fit_of(Method m, const NuisanceFits& fits) {
  return needs_disease_model(m) && fits.disease ? &fits.disease->fit : nullptr;
}
const GlmFit* pi_fit_of(Method m, const NuisanceFits& fits) {
  return needs_verification_model(m) && fits.verification ? &fits.verification->fit : nullptr;
}

struct WeightsAndTheta {
  MatrixXd w;
  Eigen::Vector3d theta;
};

WeightsAndTheta weights_and_theta(Method m, const Dataset& ds, const NuisanceFits& fits) {
  require_prerequisites(m, ds, fits);
  const GlmFit* rf = rho_fit_of(m, fits);
  const GlmFit* pf = pi_fit_of(m, fits);
  WeightsAndTheta out{MatrixXd(static_cast<Index>(ds.size()), 3), Eigen::Vector3d::Zero()};
  double omega = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const PseudoRow r = pseudo_row(m, ds[i], rf, pf, false);
    out.w.row(static_cast<Index>(i)) = r.dtilde.transpose();
    out.theta += r.dtilde;
    omega += r.omega;
  }
  out.theta /= omega;
  return out;
}

}  // namespace

MatrixXd vus_weights(Method m, const Dataset& ds, const NuisanceFits& fits) {
  return weights_and_theta(m, ds, fits).w;
}

VusEstimate vus_point(Method m, const Dataset& ds, const NuisanceFits& fits, VusEngine engine) {
  const WeightsAndTheta wt = weights_and_theta(m, ds, fits);
  const std::vector<double> t = test_values(ds);
  const VusSums s = vus_sums(t, wt.w, engine);
  if (!(std::abs(s.denominator) > kDenominatorFloor)) {
    throw DegenerateDenominator(to_string(m) + ": VUS denominator (weighted count of class triples) is numerically zero");
  }
  VusEstimate est;
  est.method = m;
  // A single tie block makes every kernel value 1/6.
  const bool all_tied = std::adjacent_find(t.begin(), t.end(), std::not_equal_to<>()) == t.end();
  est.mu = all_tied ? kSixth : s.numerator / s.denominator;
  est.theta = wt.theta;
  return est;
}

double vus_estimating_function(Method m, const Dataset& ds, const NuisanceFits& fits, double mu) {
  const WeightsAndTheta wt = weights_and_theta(m, ds, fits);
  const VusSums s = vus_sums(test_values(ds), wt.w, VusEngine::fast);
  return s.numerator - mu * s.denominator;
}

namespace {

// Per-subject projection residuals r(i, p) = f(i, p) - mu g(i, p).
MatrixXd residuals(const VusProjections& pr, double mu) { return pr.f - mu * pr.g; }

Eigen::RowVectorXd gradient_from(Method m, const Dataset& ds, const NuisanceFits& fits, const MatrixXd& res) {
  const GlmFit* rf = rho_fit_of(m, fits);
  const GlmFit* pf = pi_fit_of(m, fits);
  const TauDims dims = tau_dims(m, fits);
  Eigen::RowVectorXd grad = Eigen::RowVectorXd::Zero(dims.total());
  if (dims.total() == 0) return grad;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const PseudoRow r = pseudo_row(m, ds[i], rf, pf, true);
    grad += res.row(static_cast<Index>(i)) * r.d_dtilde;
  }
  return grad;
}

}  // namespace

Eigen::RowVectorXd vus_estimating_gradient(Method m, const Dataset& ds, const NuisanceFits& fits, double mu) {
  const WeightsAndTheta wt = weights_and_theta(m, ds, fits);
  const VusProjections pr = vus_projections(test_values(ds), wt.w);
  return gradient_from(m, ds, fits, residuals(pr, mu));
}

namespace {

VectorXd influence_from(Method m, const Dataset& ds, const NuisanceFits& fits, const MatrixXd& w, double mu) {
  const std::size_t n = ds.size();
  if (n < 4) throw ContractError("VUS variance needs at least 4 subjects");
  const VusProjections pr = vus_projections(test_values(ds), w);
  const MatrixXd res = residuals(pr, mu);
  const double norm = static_cast<double>(n - 1) * static_cast<double>(n - 2);

  VectorXd q = (w.cwiseProduct(res)).rowwise().sum() / norm;

  const TauDims dims = tau_dims(m, fits);
  if (dims.total() == 0) return q;
  const Eigen::RowVectorXd c = gradient_from(m, ds, fits, res) / norm;

  auto correct = [&](const GlmFit& fit, Eigen::Index offset, Eigen::Index dim) {
    const ScoreBlocks sb = score_and_jacobian(fit, ds);
    Eigen::FullPivLU<MatrixXd> lu(sb.jacobian_sum);
    if (!lu.isInvertible()) throw SingularBread(to_string(fit.family) + " score Jacobian is singular");
    // a = c_block H^{-1} (H is symmetric); Q_i -= a g_i
    const Eigen::RowVectorXd a = lu.solve(c.segment(offset, dim).transpose()).transpose();
    q -= sb.scores * a.transpose();
  };
  if (dims.rho > 0) correct(fits.disease->fit, 0, dims.rho);
  if (dims.pi > 0) correct(fits.verification->fit, dims.rho, dims.pi);
  return q;
}

}  // namespace

Eigen::VectorXd vus_influence(Method m, const Dataset& ds, const NuisanceFits& fits, double mu) {
  return influence_from(m, ds, fits, weights_and_theta(m, ds, fits).w, mu);
}

double vus_variance(Method m, const Dataset& ds, const NuisanceFits& fits, double mu) {
  const WeightsAndTheta wt = weights_and_theta(m, ds, fits);
  const VectorXd q = influence_from(m, ds, fits, wt.w, mu);
  const double n = static_cast<double>(ds.size());
  const double prod = wt.theta.prod();
  if (!(std::abs(prod) > 1e-12)) throw DegenerateTheta("a class prevalence estimate is numerically zero");
  return q.squaredNorm() / (n - 1.0) / (prod * prod) / n;
}

VusEstimate estimate_vus(Method m, const Dataset& ds, const NuisanceFits& fits, VusEngine engine) {
  VusEstimate est = vus_point(m, ds, fits, engine);
  est.asy_var = vus_variance(m, ds, fits, est.mu);
  return est;
}

}  // namespace rocsurf
