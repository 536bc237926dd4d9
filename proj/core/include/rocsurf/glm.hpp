#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "rocsurf/dataset.hpp"
#include "rocsurf/errors.hpp"

namespace rocsurf {

enum class Family { multinomial3, binary_logit, binary_probit };
enum class Link { logit, probit };

std::string to_string(Family f);
std::string to_string(Link l);
Link parse_link(const std::string& s);

/// Lower bound applied to fitted probabilities (positivity assumption).
inline constexpr double kProbabilityFloor = 1e-3;

struct GlmOptions {
  double tolerance = 1e-8;  ///< on the sup-norm of the total score
  int max_iterations = 100;
  /// A fit that stops without converging with |linear predictor| above this
  /// bound is reported as separation. Converged fits are separately checked
  /// for coefficients still drifting along a separating direction.
  double separation_bound = 30.0;
  /// When false, a separated fit is returned with `separated` set instead of
  /// throwing SeparationError.
  bool fail_on_separation = true;
};

/// Fitted disease (multinomial, reference class 3) or verification model.
/// For multinomial3, tau stacks (tau_rho1, tau_rho2), each of design width.
struct GlmFit {
  Family family = Family::binary_logit;
  DesignSpec design;
  Eigen::VectorXd tau;
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
  bool separated = false;

  std::size_t width() const noexcept {
    return family == Family::multinomial3 ? static_cast<std::size_t>(tau.size()) / 2
                                          : static_cast<std::size_t>(tau.size());
  }
};

class NonConvergence : public NumericalError {
 public:
  NonConvergence(const std::string& what, GlmFit last)
      : NumericalError(what), last_(std::move(last)) {}
  const GlmFit& last_iterate() const noexcept { return last_; }

 private:
  GlmFit last_;
};

/// rho(i, k-1) = Pr(D_k = 1 | T_i, A_i), clipped and row-renormalized.
struct DiseaseProbs {
  Eigen::MatrixXd rho;
  std::size_t clipped = 0;
};

/// pi(i) = Pr(V_i = 1 | T_i, A_i), clipped into [floor, 1].
struct VerificationProbs {
  Eigen::VectorXd pi;
  std::size_t clipped = 0;
};

/// Multinomial logistic model for D fitted on the verified subjects.
GlmFit fit_disease(const Dataset& ds, const DesignSpec& design = {}, const GlmOptions& opts = {});
/// Binary model for V fitted on all subjects.
GlmFit fit_verification(const Dataset& ds, Link link, const DesignSpec& design = {},
                        const GlmOptions& opts = {});

DiseaseProbs predict_disease(const GlmFit& fit, const Dataset& ds);
VerificationProbs predict_verification(const GlmFit& fit, const Dataset& ds);

/// Unclipped class probabilities (rho_1, rho_2, rho_3) at design row u.
Eigen::Vector3d disease_probabilities(const GlmFit& fit, const Eigen::VectorXd& u);
/// Unclipped verification probability at design row u.
double verification_probability(const GlmFit& fit, const Eigen::VectorXd& u);

/// 3 x dim(tau) matrix of d rho_k / d tau for the unclipped model.
/// Rows 1-2 follow the multinomial derivative pattern; row 3 is minus their sum.
Eigen::MatrixXd disease_prob_gradient(const GlmFit& fit, const Eigen::VectorXd& u);
/// Clip into [floor, 1 - floor] and renormalize; returns true when any entry moved.
bool clip_disease_row(Eigen::Vector3d& rho);
/// Gradient of the clipped, renormalized probabilities reported by predict_disease.
Eigen::MatrixXd clipped_disease_prob_gradient(const GlmFit& fit, const Eigen::VectorXd& u);
/// d(1/pi)/d tau. Zero where the probability sits on the clip floor.
Eigen::RowVectorXd inverse_pi_gradient(const GlmFit& fit, const Eigen::VectorXd& u);

/// Per-subject score g_i^tau and its derivative with respect to tau.
Eigen::VectorXd subject_score(const GlmFit& fit, const Subject& s);
Eigen::MatrixXd subject_score_jacobian(const GlmFit& fit, const Subject& s);

struct ScoreBlocks {
  Eigen::MatrixXd scores;         ///< n x dim(tau), row i = g_i^tau
  Eigen::MatrixXd jacobian_sum;   ///< sum_i d g_i^tau / d tau
};

ScoreBlocks score_and_jacobian(const GlmFit& fit, const Dataset& ds);

}  // namespace rocsurf
