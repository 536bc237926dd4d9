#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "rocsurf/dataset.hpp"
#include "rocsurf/tcf.hpp"

namespace rocsurf {

/// Stacked parameter (theta1, theta2, b11, b12, b22, b23, tau_rho, tau_pi).
/// tau blocks are present only for the methods that use them.
struct AlphaHat {
  Method method = Method::full;
  CutPair cut;
  TauDims dims;
  Eigen::VectorXd values;

  static constexpr Eigen::Index kCore = 6;
  Eigen::Index size() const noexcept { return kCore + dims.total(); }
  Eigen::Index rho_offset() const noexcept { return kCore; }
  Eigen::Index pi_offset() const noexcept { return kCore + dims.rho; }
};

AlphaHat alpha_hat(Method m, const Dataset& ds, const CutPair& cut, const NuisanceFits& fits);

/// n x dim matrix; row i = g_i(alpha). The fits provide families and designs;
/// every coefficient is read from alpha.
Eigen::MatrixXd estimating_stack(const AlphaHat& alpha, const Dataset& ds, const NuisanceFits& fits);
/// sum_i d g_i / d alpha, analytic.
Eigen::MatrixXd jacobian_stack(const AlphaHat& alpha, const Dataset& ds, const NuisanceFits& fits);

inline constexpr double kMaxCondition = 1e12;

struct SandwichCov {
  Eigen::MatrixXd sigma;   ///< n B^{-1} M B^{-T}
  Eigen::MatrixXd bread;   ///< B = sum_i dg_i/dalpha
  Eigen::MatrixXd meat;    ///< M = sum_i g_i g_i^T
  double condition = 0.0;
};

/// Throws SingularBread when cond(B) exceeds kMaxCondition.
SandwichCov sandwich(const AlphaHat& alpha, const Dataset& ds, const NuisanceFits& fits);

/// h(alpha) = (TCF1, TCF2, TCF3).
Eigen::Vector3d h_value(const AlphaHat& alpha);
/// 3 x dim; tau columns are zero. Throws DegenerateTheta when a theta_k
/// (theta3 = 1 - theta1 - theta2) is within 1e-8 of zero.
Eigen::MatrixXd h_gradient(const AlphaHat& alpha);

struct TcfCov {
  AlphaHat alpha;
  SandwichCov sandwich;
  Eigen::Matrix3d xi;       ///< dh Sigma dh^T
  Eigen::Vector3d asy_sd;   ///< sqrt(diag(xi) / n)
};

TcfCov tcf_covariance(Method m, const Dataset& ds, const CutPair& cut, const NuisanceFits& fits);

/// estimate_tcf plus cov (= xi / n) and asy_sd.
TcfEstimate estimate_tcf_with_sd(Method m, const Dataset& ds, const CutPair& cut, const NuisanceFits& fits);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Two-sided normal quantile z_{(1+level)/2}.
double wald_multiplier(double level);
std::array<Interval, 3> wald_intervals(const Eigen::Vector3d& est, const Eigen::Vector3d& sd, double level);

struct Ellipse {
  Eigen::Vector2d center;
  Eigen::Matrix2d shape;          ///< inverse covariance
  double radius2 = 0.0;           ///< chi-square quantile with 2 df
  Eigen::Vector2d semi_axes;      ///< major, minor
  std::vector<Eigen::Vector2d> polygon;

  bool contains(const Eigen::Vector2d& x) const {
    const Eigen::Vector2d d = x - center;
    return d.dot(shape * d) <= radius2;
  }
};

/// {x : (x - center)^T cov^{-1} (x - center) <= chi2_{level,2}}.
/// Throws SingularCovariance unless cov is positive definite.
Ellipse confidence_region(const Eigen::Matrix2d& cov, const Eigen::Vector2d& center, double level,
                          int points = 100);

}  // namespace rocsurf
