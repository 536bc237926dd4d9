#include "rocsurf/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rocsurf/errors.hpp"

namespace rocsurf {

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ContractError("normal quantile requires p in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double chi_square_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw ContractError("chi-square quantile requires p in (0, 1)");
  if (!(df > 0.0)) throw ContractError("chi-square quantile requires df > 0");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), p);
}

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol) {
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, 15, abs_tol, &error, &l1);
  if (!std::isfinite(value) || error > abs_tol * std::max(1.0, l1)) {
    throw QuadratureError("adaptive quadrature did not reach the requested tolerance");
  }
  return value;
}

}  // namespace rocsurf
