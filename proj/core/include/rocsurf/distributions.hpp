#pragma once

#include <functional>

namespace rocsurf {

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;
/// Upper tail 1 - Phi(x) without cancellation.
double normal_sf(double x) noexcept;
double normal_quantile(double p);
double chi_square_quantile(double p, double df);

/// Adaptive Gauss-Kronrod integral of f over [a, b]; either bound may be
/// infinite. Throws QuadratureError if the error estimate exceeds abs_tol.
double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol = 1e-10);

}  // namespace rocsurf
