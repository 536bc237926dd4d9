#include "rocsurf/asymptotics.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "rocsurf/distributions.hpp"

namespace rocsurf {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kThetaFloor = 1e-8;

// Working models carrying the coefficients stored in alpha.
struct ModelsAt {
  std::optional<GlmFit> rho;
  std::optional<GlmFit> pi;
};

ModelsAt models_at(const AlphaHat& alpha, const NuisanceFits& fits) {
  if (alpha.values.size() != alpha.size()) throw ContractError("alpha has the wrong dimension");
  ModelsAt out;
  if (alpha.dims.rho > 0) {
    if (!fits.disease || fits.disease->fit.tau.size() != alpha.dims.rho) {
      throw ContractError("disease model does not match the parameter layout");
    }
    out.rho = fits.disease->fit;
    out.rho->tau = alpha.values.segment(alpha.rho_offset(), alpha.dims.rho);
  }
  if (alpha.dims.pi > 0) {
    if (!fits.verification || fits.verification->fit.tau.size() != alpha.dims.pi) {
      throw ContractError("verification model does not match the parameter layout");
    }
    out.pi = fits.verification->fit;
    out.pi->tau = alpha.values.segment(alpha.pi_offset(), alpha.dims.pi);
  }
  if ((needs_disease_model(alpha.method) && !out.rho) || (needs_verification_model(alpha.method) && !out.pi)) {
    throw ContractError(to_string(alpha.method) + " parameter layout lacks a required model block");
  }
  return out;
}

struct BetaSpec {
  int cut;    // 0 -> c1, 1 -> c2
  int klass;  // 0-based
};
constexpr BetaSpec kBeta[4] = {{0, 0}, {0, 1}, {1, 1}, {1, 2}};

double cut_of(const CutPair& c, int which) { return which == 0 ? c.c1 : c.c2; }

}  // namespace

AlphaHat alpha_hat(Method m, const Dataset& ds, const CutPair& cut, const NuisanceFits& fits) {
  const TcfEstimate est = estimate_tcf(m, ds, cut, fits);
  AlphaHat a;
  a.method = m;
  a.cut = cut;
  a.dims = tau_dims(m, fits);
  a.values.resize(a.size());
  a.values << est.tb.theta[0], est.tb.theta[1], est.tb.b11, est.tb.b12, est.tb.b22, est.tb.b23,
      VectorXd::Zero(a.dims.total());
  if (a.dims.rho > 0) a.values.segment(a.rho_offset(), a.dims.rho) = fits.disease->fit.tau;
  if (a.dims.pi > 0) a.values.segment(a.pi_offset(), a.dims.pi) = fits.verification->fit.tau;
  return a;
}

MatrixXd estimating_stack(const AlphaHat& alpha, const Dataset& ds, const NuisanceFits& fits) {
  const ModelsAt models = models_at(alpha, fits);
  const GlmFit* rf = models.rho ? &*models.rho : nullptr;
  const GlmFit* pf = models.pi ? &*models.pi : nullptr;
  const auto& a = alpha.values;
  MatrixXd g(static_cast<Index>(ds.size()), alpha.size());
  for (std::size_t ii = 0; ii < ds.size(); ++ii) {
    const Subject& s = ds[ii];
    const auto i = static_cast<Index>(ii);
    const PseudoRow r = pseudo_row(alpha.method, s, rf, pf, false);
    g(i, 0) = r.dtilde[0] - a[0] * r.omega;
    g(i, 1) = r.dtilde[1] - a[1] * r.omega;
    for (int b = 0; b < 4; ++b) {
      const double ind = s.t >= cut_of(alpha.cut, kBeta[b].cut) ? 1.0 : 0.0;
      g(i, 2 + b) = ind * r.dtilde[kBeta[b].klass] - a[2 + b] * r.omega;
    }
    if (rf) g.block(i, alpha.rho_offset(), 1, alpha.dims.rho) = subject_score(*rf, s).transpose();
    if (pf) g.block(i, alpha.pi_offset(), 1, alpha.dims.pi) = subject_score(*pf, s).transpose();
  }
  return g;
}

MatrixXd jacobian_stack(const AlphaHat& alpha, const Dataset& ds, const NuisanceFits& fits) {
  const ModelsAt models = models_at(alpha, fits);
  const GlmFit* rf = models.rho ? &*models.rho : nullptr;
  const GlmFit* pf = models.pi ? &*models.pi : nullptr;
  const auto& a = alpha.values;
  const Index dim = alpha.size();
  const Index td = alpha.dims.total();
  MatrixXd jac = MatrixXd::Zero(dim, dim);
  for (std::size_t ii = 0; ii < ds.size(); ++ii) {
    const Subject& s = ds[ii];
    const PseudoRow r = pseudo_row(alpha.method, s, rf, pf, true);
    for (int k = 0; k < 2; ++k) {
      jac(k, k) -= r.omega;
      if (td > 0) jac.block(k, AlphaHat::kCore, 1, td) += r.d_dtilde.row(k) - a[k] * r.d_omega;
    }
    for (int b = 0; b < 4; ++b) {
      const double ind = s.t >= cut_of(alpha.cut, kBeta[b].cut) ? 1.0 : 0.0;
      jac(2 + b, 2 + b) -= r.omega;
      if (td > 0) {
        jac.block(2 + b, AlphaHat::kCore, 1, td) += ind * r.d_dtilde.row(kBeta[b].klass) - a[2 + b] * r.d_omega;
      }
    }
    if (rf) {
      jac.block(alpha.rho_offset(), alpha.rho_offset(), alpha.dims.rho, alpha.dims.rho) +=
          subject_score_jacobian(*rf, s);
    }
    if (pf) {
      jac.block(alpha.pi_offset(), alpha.pi_offset(), alpha.dims.pi, alpha.dims.pi) +=
          subject_score_jacobian(*pf, s);
    }
  }
  return jac;
}

SandwichCov sandwich(const AlphaHat& alpha, const Dataset& ds, const NuisanceFits& fits) {
  SandwichCov out;
  const MatrixXd g = estimating_stack(alpha, ds, fits);
  out.bread = jacobian_stack(alpha, ds, fits);
  out.meat = g.transpose() * g;
  Eigen::JacobiSVD<MatrixXd> svd(out.bread, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smin = sv[sv.size() - 1];
  out.condition = smin > 0.0 ? sv[0] / smin : std::numeric_limits<double>::infinity();
  if (!(out.condition <= kMaxCondition)) {
    throw SingularBread(to_string(alpha.method) + ": estimating-equation Jacobian is singular (condition " +
                        std::to_string(out.condition) + ")");
  }
  const MatrixXd binv = svd.solve(MatrixXd::Identity(alpha.size(), alpha.size()));
  const double n = static_cast<double>(ds.size());
  MatrixXd sigma = n * binv * out.meat * binv.transpose();
  out.sigma = 0.5 * (sigma + sigma.transpose());
  return out;
}

Eigen::Vector3d h_value(const AlphaHat& alpha) {
  ThetaBeta tb;
  tb.theta << alpha.values[0], alpha.values[1], 1.0 - alpha.values[0] - alpha.values[1];
  tb.b11 = alpha.values[2];
  tb.b12 = alpha.values[3];
  tb.b22 = alpha.values[4];
  tb.b23 = alpha.values[5];
  return tb.tcf();
}

MatrixXd h_gradient(const AlphaHat& alpha) {
  const auto& a = alpha.values;
  const double t1 = a[0];
  const double t2 = a[1];
  const double t3 = 1.0 - t1 - t2;
  for (double t : {t1, t2, t3}) {
    if (!(std::abs(t) > kThetaFloor)) throw DegenerateTheta("a class prevalence estimate is numerically zero");
  }
  MatrixXd dh = MatrixXd::Zero(3, alpha.size());
  dh(0, 0) = a[2] / (t1 * t1);
  dh(0, 2) = -1.0 / t1;
  dh(1, 1) = -(a[3] - a[4]) / (t2 * t2);
  dh(1, 3) = 1.0 / t2;
  dh(1, 4) = -1.0 / t2;
  dh(2, 0) = a[5] / (t3 * t3);
  dh(2, 1) = a[5] / (t3 * t3);
  dh(2, 5) = 1.0 / t3;
  return dh;
}

TcfCov tcf_covariance(Method m, const Dataset& ds, const CutPair& cut, const NuisanceFits& fits) {
  TcfCov out;
  out.alpha = alpha_hat(m, ds, cut, fits);
  const MatrixXd dh = h_gradient(out.alpha);
  out.sandwich = sandwich(out.alpha, ds, fits);
  const MatrixXd xi = dh * out.sandwich.sigma * dh.transpose();
  out.xi = 0.5 * (xi + xi.transpose());
  const double n = static_cast<double>(ds.size());
  for (int k = 0; k < 3; ++k) out.asy_sd[k] = std::sqrt(std::max(out.xi(k, k), 0.0) / n);
  return out;
}

TcfEstimate estimate_tcf_with_sd(Method m, const Dataset& ds, const CutPair& cut, const NuisanceFits& fits) {
  TcfEstimate est = estimate_tcf(m, ds, cut, fits);
  const TcfCov cov = tcf_covariance(m, ds, cut, fits);
  est.cov = cov.xi / static_cast<double>(ds.size());
  est.asy_sd = cov.asy_sd;
  return est;
}

double wald_multiplier(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ContractError("confidence level must lie in (0, 1)");
  return normal_quantile(0.5 + 0.5 * level);
}

std::array<Interval, 3> wald_intervals(const Eigen::Vector3d& est, const Eigen::Vector3d& sd, double level) {
  const double z = wald_multiplier(level);
  std::array<Interval, 3> out;
  for (int k = 0; k < 3; ++k) out[k] = {est[k] - z * sd[k], est[k] + z * sd[k]};
  return out;
}

Ellipse confidence_region(const Eigen::Matrix2d& cov, const Eigen::Vector2d& center, double level, int points) {
  if (!(level > 0.0 && level < 1.0)) throw ContractError("confidence level must lie in (0, 1)");
  if (points < 3) throw ContractError("ellipse polygon needs at least 3 points");
  if (!cov.allFinite() || std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    throw SingularCovariance("covariance must be finite and symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Eigen::Vector2d lambda = eig.eigenvalues();  // ascending
  if (!(lambda[0] > 1e-14 * std::max(lambda[1], 0.0)) || !(lambda[0] > 0.0)) {
    throw SingularCovariance("covariance is not positive definite");
  }
  Ellipse e;
  e.center = center;
  e.shape = eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  e.radius2 = chi_square_quantile(level, 2.0);
  const double r = std::sqrt(e.radius2);
  e.semi_axes << r * std::sqrt(lambda[1]), r * std::sqrt(lambda[0]);
  const Eigen::Matrix2d axes = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
  e.polygon.reserve(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j) {
    const double phi = 2.0 * std::numbers::pi * j / points;
    e.polygon.push_back(center + r * axes * Eigen::Vector2d(std::cos(phi), std::sin(phi)));
  }
  return e;
}

}  // namespace rocsurf
