#include "rocsurf/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rocsurf/distributions.hpp"

namespace rocsurf {

std::string to_string(Family f) {
  switch (f) {
    case Family::multinomial3: return "multinomial3";
    case Family::binary_logit: return "binary-logit";
    case Family::binary_probit: return "binary-probit";
  }
  return "?";
}

std::string to_string(Link l) { return l == Link::logit ? "logit" : "probit"; }

Link parse_link(const std::string& s) {
  if (s == "logit") return Link::logit;
  if (s == "probit") return Link::probit;
  throw ContractError("unknown link '" + s + "' (expected logit or probit)");
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double logistic(double eta) {
  return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

// (rho_1, rho_2, rho_3) from the two linear predictors, reference class 3.
Eigen::Vector3d softmax3(double eta1, double eta2) {
  const double m = std::max({0.0, eta1, eta2});
  const double e1 = std::exp(eta1 - m);
  const double e2 = std::exp(eta2 - m);
  const double e3 = std::exp(-m);
  const double sum = e1 + e2 + e3;
  return {e1 / sum, e2 / sum, e3 / sum};
}

struct Problem {
  Family family;
  std::vector<VectorXd> rows;  // design rows of the subjects entering the fit
  std::vector<int> response;   // class index (multinomial) or V (binary)
  Index width;
};

Problem make_problem(const Dataset& ds, Family family, const DesignSpec& design) {
  Problem p{family, {}, {}, static_cast<Index>(design.width(ds.covariate_dim()))};
  for (const auto& s : ds) {
    if (family == Family::multinomial3) {
      if (!s.v) continue;
      p.response.push_back(*s.d);
    } else {
      p.response.push_back(s.v ? 1 : 0);
    }
    p.rows.push_back(design_row(s, design));
  }
  return p;
}

double log_likelihood(const Problem& p, const VectorXd& tau) {
  double ll = 0.0;
  const Index w = p.width;
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const auto& u = p.rows[i];
    switch (p.family) {
      case Family::multinomial3: {
        const double e1 = u.dot(tau.head(w));
        const double e2 = u.dot(tau.segment(w, w));
        const double m = std::max({0.0, e1, e2});
        const double lse = m + std::log(std::exp(e1 - m) + std::exp(e2 - m) + std::exp(-m));
        const int k = p.response[i];
        ll += (k == 1 ? e1 : k == 2 ? e2 : 0.0) - lse;
        break;
      }
      case Family::binary_logit: {
        const double eta = u.dot(tau);
        const double log1pexp = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        ll += p.response[i] * eta - log1pexp;
        break;
      }
      case Family::binary_probit: {
        const double eta = u.dot(tau);
        ll += p.response[i] ? std::log(normal_cdf(eta)) : std::log(normal_sf(eta));
        break;
      }
    }
  }
  return ll;
}

void accumulate_score(Family family, const VectorXd& u, int response, const VectorXd& tau,
                      VectorXd& score, MatrixXd* hessian) {
  const Index w = u.size();
  switch (family) {
    case Family::multinomial3: {
      const auto rho = softmax3(u.dot(tau.head(w)), u.dot(tau.segment(w, w)));
      const double d1 = response == 1 ? 1.0 : 0.0;
      const double d2 = response == 2 ? 1.0 : 0.0;
      score.head(w) += u * (d1 - rho[0]);
      score.segment(w, w) += u * (d2 - rho[1]);
      if (hessian) {
        const MatrixXd uu = u * u.transpose();
        hessian->block(0, 0, w, w) -= uu * (rho[0] * (1.0 - rho[0]));
        hessian->block(w, w, w, w) -= uu * (rho[1] * (1.0 - rho[1]));
        hessian->block(0, w, w, w) += uu * (rho[0] * rho[1]);
        hessian->block(w, 0, w, w) += uu * (rho[0] * rho[1]);
      }
      break;
    }
    case Family::binary_logit: {
      const double pi = logistic(u.dot(tau));
      score += u * (response - pi);
      if (hessian) *hessian -= u * u.transpose() * (pi * (1.0 - pi));
      break;
    }
    case Family::binary_probit: {
      const double eta = u.dot(tau);
      const double phi = normal_pdf(eta);
      if (response) {
        const double cdf = normal_cdf(eta);
        score += u * (phi / cdf);
        // d/d eta [phi / Phi] = phi (-eta Phi - phi) / Phi^2
        if (hessian) *hessian += u * u.transpose() * (phi * (-eta * cdf - phi) / (cdf * cdf));
      } else {
        const double sf = normal_sf(eta);
        score -= u * (phi / sf);
        // d/d eta [-phi / (1 - Phi)] = -phi (eta (Phi - 1) + phi) / (1 - Phi)^2
        if (hessian) *hessian -= u * u.transpose() * (phi * (-eta * sf + phi) / (sf * sf));
      }
      break;
    }
  }
}

double max_abs_linear_predictor(const Problem& p, const VectorXd& tau) {
  double m = 0.0;
  const Index w = p.width;
  for (const auto& u : p.rows) {
    if (p.family == Family::multinomial3) {
      m = std::max({m, std::abs(u.dot(tau.head(w))), std::abs(u.dot(tau.segment(w, w)))});
    } else {
      m = std::max(m, std::abs(u.dot(tau)));
    }
  }
  return m;
}

constexpr double kDriftTolerance = 1e-4;

GlmFit newton_raphson(const Problem& p, const DesignSpec& design, const GlmOptions& opts) {
  const Index dim = p.family == Family::multinomial3 ? 2 * p.width : p.width;
  GlmFit fit;
  fit.family = p.family;
  fit.design = design;
  fit.tau = VectorXd::Zero(dim);

  auto evaluate = [&](const VectorXd& tau, VectorXd& score, MatrixXd& hessian) {
    score.setZero(dim);
    hessian.setZero(dim, dim);
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
      accumulate_score(p.family, p.rows[i], p.response[i], tau, score, &hessian);
    }
  };

  VectorXd score;
  MatrixXd hessian;
  evaluate(fit.tau, score, hessian);
  double ll = log_likelihood(p, fit.tau);
  fit.score_norm = score.lpNorm<Eigen::Infinity>();

  const std::string name = to_string(p.family) + " fit";
  auto separation = [&] {
    return SeparationError(name + ": linear predictor diverges (complete or quasi-complete separation)");
  };
  // A genuine optimum is a fixed point of the Newton map. Under separation the
  // score vanishes only because the probabilities saturate while the
  // coefficients keep drifting, so the next Newton step is still large.
  auto accept = [&] {
    Eigen::LDLT<MatrixXd> ldlt(-hessian);
    bool drifting = ldlt.info() != Eigen::Success || !ldlt.isPositive();
    if (!drifting) {
      const VectorXd next = ldlt.solve(score);
      drifting = !next.allFinite() || max_abs_linear_predictor(p, next) > kDriftTolerance;
    }
    if (drifting) {
      if (opts.fail_on_separation) throw separation();
      fit.separated = true;
    }
    fit.converged = true;
    return fit;
  };

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    if (fit.score_norm <= opts.tolerance) return accept();
    Eigen::LDLT<MatrixXd> ldlt(-hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw NonConvergence(to_string(p.family) + " fit: information matrix is not positive definite", fit);
    }
    const VectorXd step = ldlt.solve(score);
    if (!step.allFinite()) {
      throw NonConvergence(to_string(p.family) + " fit: singular information matrix", fit);
    }
    // Near the optimum the log-likelihood change drops below rounding noise,
    // so a step only counts as a decrease beyond that noise level.
    const double slack = 1e-10 * (1.0 + std::abs(ll));
    double scale = 1.0;
    VectorXd candidate = fit.tau + step;
    double candidate_ll = log_likelihood(p, candidate);
    for (int halving = 0; halving < 40 && !(candidate_ll >= ll - slack); ++halving) {
      scale *= 0.5;
      candidate = fit.tau + scale * step;
      candidate_ll = log_likelihood(p, candidate);
    }
    if (!(candidate_ll >= ll - slack)) {
      throw NonConvergence(to_string(p.family) + " fit: line search failed", fit);
    }
    fit.tau = candidate;
    fit.iterations = iter;
    ll = candidate_ll;
    evaluate(fit.tau, score, hessian);
    fit.score_norm = score.lpNorm<Eigen::Infinity>();
  }
  if (fit.score_norm <= opts.tolerance) return accept();
  if (max_abs_linear_predictor(p, fit.tau) > opts.separation_bound) throw separation();
  throw NonConvergence(to_string(p.family) + " fit: no convergence after " +
                           std::to_string(opts.max_iterations) + " iterations",
                       fit);
}

}  // namespace

GlmFit fit_disease(const Dataset& ds, const DesignSpec& design, const GlmOptions& opts) {
  ds.require_all_classes_verified();
  return newton_raphson(make_problem(ds, Family::multinomial3, design), design, opts);
}

GlmFit fit_verification(const Dataset& ds, Link link, const DesignSpec& design, const GlmOptions& opts) {
  const std::size_t verified = ds.verified_count();
  if (verified == 0 || verified == ds.size()) {
    throw ValidationError("verification model needs both verified and unverified subjects");
  }
  const Family family = link == Link::logit ? Family::binary_logit : Family::binary_probit;
  return newton_raphson(make_problem(ds, family, design), design, opts);
}

Eigen::Vector3d disease_probabilities(const GlmFit& fit, const Eigen::VectorXd& u) {
  const Index w = u.size();
  return softmax3(u.dot(fit.tau.head(w)), u.dot(fit.tau.segment(w, w)));
}

double verification_probability(const GlmFit& fit, const Eigen::VectorXd& u) {
  const double eta = u.dot(fit.tau);
  return fit.family == Family::binary_logit ? logistic(eta) : normal_cdf(eta);
}

DiseaseProbs predict_disease(const GlmFit& fit, const Dataset& ds) {
  if (fit.family != Family::multinomial3) throw ContractError("predict_disease needs a multinomial fit");
  if (fit.width() != fit.design.width(ds.covariate_dim())) {
    throw ContractError("disease fit dimension does not match the dataset");
  }
  DiseaseProbs out;
  out.rho.resize(static_cast<Index>(ds.size()), 3);
  constexpr double lo = kProbabilityFloor;
  constexpr double hi = 1.0 - kProbabilityFloor;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Eigen::Vector3d r = disease_probabilities(fit, design_row(ds[i], fit.design));
    for (int k = 0; k < 3; ++k) {
      if (r[k] < lo || r[k] > hi) ++out.clipped;
    }
    clip_disease_row(r);
    out.rho.row(static_cast<Index>(i)) = r.transpose();
  }
  return out;
}

VerificationProbs predict_verification(const GlmFit& fit, const Dataset& ds) {
  if (fit.family == Family::multinomial3) throw ContractError("predict_verification needs a binary fit");
  if (fit.width() != fit.design.width(ds.covariate_dim())) {
    throw ContractError("verification fit dimension does not match the dataset");
  }
  VerificationProbs out;
  out.pi.resize(static_cast<Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double pi = verification_probability(fit, design_row(ds[i], fit.design));
    if (pi < kProbabilityFloor) {
      pi = kProbabilityFloor;
      ++out.clipped;
    }
    out.pi[static_cast<Index>(i)] = pi;
  }
  return out;
}

Eigen::MatrixXd disease_prob_gradient(const GlmFit& fit, const Eigen::VectorXd& u) {
  const Index w = u.size();
  const auto rho = disease_probabilities(fit, u);
  MatrixXd g(3, 2 * w);
  g.block(0, 0, 1, w) = u.transpose() * (rho[0] * (1.0 - rho[0]));
  g.block(0, w, 1, w) = -u.transpose() * (rho[0] * rho[1]);
  g.block(1, 0, 1, w) = -u.transpose() * (rho[0] * rho[1]);
  g.block(1, w, 1, w) = u.transpose() * (rho[1] * (1.0 - rho[1]));
  g.row(2) = -(g.row(0) + g.row(1));
  return g;
}

bool clip_disease_row(Eigen::Vector3d& rho) {
  constexpr double lo = kProbabilityFloor;
  constexpr double hi = 1.0 - kProbabilityFloor;
  bool touched = false;
  for (int k = 0; k < 3; ++k) {
    if (rho[k] < lo || rho[k] > hi) {
      rho[k] = std::clamp(rho[k], lo, hi);
      touched = true;
    }
  }
  if (touched) rho /= rho.sum();
  return touched;
}

Eigen::MatrixXd clipped_disease_prob_gradient(const GlmFit& fit, const Eigen::VectorXd& u) {
  MatrixXd g = disease_prob_gradient(fit, u);
  const Eigen::Vector3d raw = disease_probabilities(fit, u);
  Eigen::Vector3d r = raw;
  if (!clip_disease_row(r)) return g;
  // r = c / sum(c) with c the clamped vector; clamped entries have zero derivative.
  Eigen::Vector3d c;
  for (int k = 0; k < 3; ++k) {
    c[k] = std::clamp(raw[k], kProbabilityFloor, 1.0 - kProbabilityFloor);
    if (c[k] != raw[k]) g.row(k).setZero();
  }
  const double sum = c.sum();
  const Eigen::RowVectorXd dsum = g.colwise().sum();
  MatrixXd out(3, g.cols());
  for (int k = 0; k < 3; ++k) out.row(k) = g.row(k) / sum - c[k] * dsum / (sum * sum);
  return out;
}

Eigen::RowVectorXd inverse_pi_gradient(const GlmFit& fit, const Eigen::VectorXd& u) {
  const double eta = u.dot(fit.tau);
  const double pi = verification_probability(fit, u);
  if (pi < kProbabilityFloor) return Eigen::RowVectorXd::Zero(u.size());
  if (fit.family == Family::binary_logit) {
    // d(1/pi)/d tau = -u (1 - pi) / pi = -u exp(-eta)
    return -u.transpose() * std::exp(-eta);
  }
  return -u.transpose() * (normal_pdf(eta) / (pi * pi));
}

Eigen::VectorXd subject_score(const GlmFit& fit, const Subject& s) {
  const VectorXd u = design_row(s, fit.design);
  VectorXd score = VectorXd::Zero(fit.tau.size());
  if (fit.family == Family::multinomial3) {
    if (!s.v) return score;
    accumulate_score(fit.family, u, *s.d, fit.tau, score, nullptr);
  } else {
    accumulate_score(fit.family, u, s.v ? 1 : 0, fit.tau, score, nullptr);
  }
  return score;
}

Eigen::MatrixXd subject_score_jacobian(const GlmFit& fit, const Subject& s) {
  const VectorXd u = design_row(s, fit.design);
  const Index dim = fit.tau.size();
  VectorXd score = VectorXd::Zero(dim);
  MatrixXd jac = MatrixXd::Zero(dim, dim);
  if (fit.family == Family::multinomial3) {
    if (!s.v) return jac;
    accumulate_score(fit.family, u, *s.d, fit.tau, score, &jac);
  } else {
    accumulate_score(fit.family, u, s.v ? 1 : 0, fit.tau, score, &jac);
  }
  return jac;
}

ScoreBlocks score_and_jacobian(const GlmFit& fit, const Dataset& ds) {
  const Index dim = fit.tau.size();
  ScoreBlocks out{MatrixXd::Zero(static_cast<Index>(ds.size()), dim), MatrixXd::Zero(dim, dim)};
  VectorXd score(dim);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds[i];
    if (fit.family == Family::multinomial3 && !s.v) continue;
    score.setZero();
    const int response = fit.family == Family::multinomial3 ? *s.d : (s.v ? 1 : 0);
    accumulate_score(fit.family, design_row(s, fit.design), response, fit.tau, score, &out.jacobian_sum);
    out.scores.row(static_cast<Index>(i)) = score.transpose();
  }
  return out;
}

}  // namespace rocsurf
