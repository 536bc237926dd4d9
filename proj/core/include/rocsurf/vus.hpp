#pragma once

#include <cmath>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "rocsurf/dataset.hpp"
#include "rocsurf/tcf.hpp"

namespace rocsurf {

/// I(ti < tl < tr) + I(ti < tl = tr)/2 + I(ti = tl < tr)/2 + I(ti = tl = tr)/6.
double triple_kernel(double ti, double tl, double tr) noexcept;

/// naive: O(n^3) loop over distinct triples. fast: sorted tie blocks and
/// prefix sums, O(n log n). checked: both, throws InternalError if they
/// disagree by more than 1e-10.
enum class VusEngine { naive, fast, checked };

struct VusSums {
  double numerator = 0.0;    ///< sum over distinct (i, l, r) of w1i w2l w3r I_ilr
  double denominator = 0.0;  ///< same with I_ilr replaced by 1
};

/// w is n x 3 (class weights per subject).
VusSums vus_sums(std::span<const double> t, const Eigen::MatrixXd& w, VusEngine engine = VusEngine::fast);

/// Per-subject partial sums with subject i fixed in position p (column p-1):
/// f(i, p) = sum over distinct companions of the other two weights times the
/// kernel, g(i, p) the same without the kernel.
struct VusProjections {
  Eigen::MatrixXd f;
  Eigen::MatrixXd g;
};

VusProjections vus_projections(std::span<const double> t, const Eigen::MatrixXd& w);

struct VusEstimate {
  Method method = Method::full;
  double mu = 0.0;
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
  std::optional<double> asy_var;  ///< variance of sqrt(n)(mu_hat - mu) divided by n
  std::optional<double> boot_sd;

  std::optional<double> asy_sd() const {
    if (!asy_var) return std::nullopt;
    return std::sqrt(*asy_var);
  }
};

/// Pseudo-disease weights used by the VUS estimator, evaluated at the
/// coefficients stored in the fits.
Eigen::MatrixXd vus_weights(Method m, const Dataset& ds, const NuisanceFits& fits);

/// Point estimate. Throws DegenerateDenominator when the weighted triple count
/// is within 1e-8 of zero.
VusEstimate vus_point(Method m, const Dataset& ds, const NuisanceFits& fits,
                      VusEngine engine = VusEngine::fast);

/// G(mu, tau) = sum over distinct triples of w1i w2l w3r (I_ilr - mu).
double vus_estimating_function(Method m, const Dataset& ds, const NuisanceFits& fits, double mu);
/// dG/d(tau_rho, tau_pi), analytic.
Eigen::RowVectorXd vus_estimating_gradient(Method m, const Dataset& ds, const NuisanceFits& fits, double mu);

/// Influence terms Q_i(mu_hat, tau_hat).
Eigen::VectorXd vus_influence(Method m, const Dataset& ds, const NuisanceFits& fits, double mu);

/// (1/(n-1)) sum Q_i^2 / (theta1 theta2 theta3)^2, divided by n. Needs n >= 4.
double vus_variance(Method m, const Dataset& ds, const NuisanceFits& fits, double mu);

/// vus_point plus asy_var.
VusEstimate estimate_vus(Method m, const Dataset& ds, const NuisanceFits& fits,
                         VusEngine engine = VusEngine::fast);

}  // namespace rocsurf
