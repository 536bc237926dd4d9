#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rocsurf/dataset.hpp"
#include "rocsurf/glm.hpp"

namespace rocsurf {

enum class Method { full, fi, msi, ipw, spe };

inline constexpr std::array<Method, 5> kAllMethods{Method::full, Method::fi, Method::msi, Method::ipw,
                                                   Method::spe};
inline constexpr std::array<Method, 4> kCorrectedMethods{Method::fi, Method::msi, Method::ipw, Method::spe};

std::string to_string(Method m);  ///< upper-case tag, e.g. "SPE"
Method parse_method(const std::string& s);  ///< case-insensitive

/// Imputation flag m: 0 for FI, 1 for MSI, absent otherwise.
std::optional<int> imputation_flag(Method m) noexcept;
bool needs_disease_model(Method m) noexcept;
bool needs_verification_model(Method m) noexcept;

/// Working-model specification shared by every method.
struct ModelSpec {
  DesignSpec disease;
  DesignSpec verification;
  Link link = Link::logit;
  GlmOptions glm;
};

struct DiseaseModel {
  GlmFit fit;
  DiseaseProbs probs;
};

struct VerificationModel {
  GlmFit fit;
  VerificationProbs probs;
};

struct NuisanceFits {
  std::optional<DiseaseModel> disease;
  std::optional<VerificationModel> verification;
};

/// Fits the working models needed by any of `methods`.
NuisanceFits fit_nuisance(const Dataset& ds, std::span<const Method> methods, const ModelSpec& spec);
NuisanceFits fit_nuisance(const Dataset& ds, Method method, const ModelSpec& spec);

/// Throws ValidationError for FULL on partially verified data and
/// ContractError when a required working model is missing.
void require_prerequisites(Method m, const Dataset& ds, const NuisanceFits& fits);

/// n x 3 matrix of pseudo-disease weights.
Eigen::MatrixXd pseudo_disease(Method m, const Dataset& ds, const DiseaseProbs* rho,
                               const VerificationProbs* pi);
Eigen::MatrixXd pseudo_disease(Method m, const Dataset& ds, const NuisanceFits& fits);

/// Pseudo-disease weights of one subject evaluated at the coefficients held
/// in the fits, with derivatives with respect to (tau_rho, tau_pi). A block
/// is present only when the method uses that model; rho_fit / pi_fit may be
/// null for methods that do not need them.
struct PseudoRow {
  Eigen::Vector3d dtilde = Eigen::Vector3d::Zero();
  double omega = 1.0;              ///< V/pi for IPW, 1 otherwise
  Eigen::MatrixXd d_dtilde;        ///< 3 x (rho_dim + pi_dim)
  Eigen::RowVectorXd d_omega;      ///< 1 x (rho_dim + pi_dim)
};

/// Coefficient dimensions that enter the estimating equations of a method.
struct TauDims {
  Eigen::Index rho = 0;
  Eigen::Index pi = 0;
  Eigen::Index total() const noexcept { return rho + pi; }
};
TauDims tau_dims(Method m, const NuisanceFits& fits);

PseudoRow pseudo_row(Method m, const Subject& s, const GlmFit* rho_fit, const GlmFit* pi_fit,
                     bool with_gradient);

/// Per-subject normalizing weight: V/pi for IPW, 1 otherwise.
Eigen::VectorXd normalizing_weights(Method m, const Dataset& ds, const NuisanceFits& fits);

struct ThetaBeta {
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
  double b11 = 0, b12 = 0, b22 = 0, b23 = 0;

  /// (1 - b11/theta1, (b12 - b22)/theta2, b23/theta3). theta3 is the directly
  /// summed class share, which equals 1 - theta1 - theta2 up to rounding.
  Eigen::Vector3d tcf() const;
};

/// Sorted view of (T, D-tilde, omega) that evaluates theta/beta at any cut in
/// O(log n). Every TCF in the library goes through this type, so surface points
/// and single-cut calls agree bit for bit.
class TcfEvaluator {
 public:
  /// Throws DegenerateDenominator(k) when |sum_i dtilde(i, k-1)| <= 1e-8.
  TcfEvaluator(const Dataset& ds, const Eigen::MatrixXd& dtilde, const Eigen::VectorXd& omega);

  /// Cut values are not validated; c1 == c2 is allowed (single-cut projections).
  ThetaBeta at(double c1, double c2) const;

 private:
  std::vector<double> t_;                    // ascending
  std::vector<Eigen::Vector3d> suffix_;      // suffix_[j] = sum of dtilde over sorted rows j..n-1
  Eigen::Vector3d total_;
  double omega_total_ = 0.0;

  Eigen::Vector3d tail(double c) const;      // sum over T >= c
};

struct TcfEstimate {
  CutPair cut;
  Method method = Method::full;
  Eigen::Vector3d tcf = Eigen::Vector3d::Zero();
  ThetaBeta tb;
  std::optional<Eigen::Matrix3d> cov;        ///< Xi / n
  std::optional<Eigen::Vector3d> asy_sd;
  std::optional<Eigen::Vector3d> boot_sd;
  std::optional<std::string> flag;           ///< set on surface points that could not be estimated

  /// TCFs clamped into [0, 1] for plotting.
  Eigen::Vector3d clipped() const { return tcf.cwiseMax(0.0).cwiseMin(1.0); }
};

TcfEstimate estimate_tcf(Method m, const Dataset& ds, const CutPair& cut, const NuisanceFits& fits);

/// Empirical quantile (linear interpolation between order statistics).
double empirical_quantile(std::vector<double> sorted, double level);

/// Pairs (c1 < c2) from the T quantiles at 0.01, ..., 0.99.
std::vector<CutPair> quantile_grid(const Dataset& ds, int levels = 99);
/// Every pair of distinct observed T values with c1 < c2.
std::vector<CutPair> distinct_value_grid(const Dataset& ds);

/// One estimate per grid pair, in grid order. Degenerate points carry a flag
/// and NaN TCFs instead of being dropped.
std::vector<TcfEstimate> roc_surface(Method m, const Dataset& ds, std::span<const CutPair> grid,
                                     const NuisanceFits& fits, unsigned threads = 1);

enum class ClassPair { p12, p23, p13 };
ClassPair parse_class_pair(const std::string& s);
std::string to_string(ClassPair p);

struct ProjectionPoint {
  double cut = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// (1,2): (TCF1, TCF2) at (c, +inf); (2,3): (TCF2, TCF3) at (-inf, c);
/// (1,3): (TCF1, TCF3) with c used as both cut points.
std::vector<ProjectionPoint> roc_projection(Method m, const Dataset& ds, ClassPair pair,
                                            std::span<const double> cuts, const NuisanceFits& fits);
/// Observed distinct T values plus both infinite sentinels.
std::vector<double> default_projection_cuts(const Dataset& ds);

}  // namespace rocsurf
