#include "rocsurf/tcf.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "rocsurf/parallel.hpp"

namespace rocsurf {

namespace {

constexpr double kDenominatorFloor = 1e-8;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::full: return "FULL";
    case Method::fi: return "FI";
    case Method::msi: return "MSI";
    case Method::ipw: return "IPW";
    case Method::spe: return "SPE";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  const std::string l = lower(s);
  if (l == "full") return Method::full;
  if (l == "fi") return Method::fi;
  if (l == "msi") return Method::msi;
  if (l == "ipw") return Method::ipw;
  if (l == "spe") return Method::spe;
  throw ContractError("unknown method '" + s + "' (expected full, fi, msi, ipw or spe)");
}

std::optional<int> imputation_flag(Method m) noexcept {
  if (m == Method::fi) return 0;
  if (m == Method::msi) return 1;
  return std::nullopt;
}

bool needs_disease_model(Method m) noexcept {
  return m == Method::fi || m == Method::msi || m == Method::spe;
}

bool needs_verification_model(Method m) noexcept { return m == Method::ipw || m == Method::spe; }

NuisanceFits fit_nuisance(const Dataset& ds, std::span<const Method> methods, const ModelSpec& spec) {
  const bool want_rho = std::any_of(methods.begin(), methods.end(), needs_disease_model);
  const bool want_pi = std::any_of(methods.begin(), methods.end(), needs_verification_model);
  NuisanceFits fits;
  if (want_rho) {
    GlmFit fit = fit_disease(ds, spec.disease, spec.glm);
    DiseaseProbs probs = predict_disease(fit, ds);
    fits.disease = DiseaseModel{std::move(fit), std::move(probs)};
  }
  if (want_pi) {
    GlmFit fit = fit_verification(ds, spec.link, spec.verification, spec.glm);
    VerificationProbs probs = predict_verification(fit, ds);
    fits.verification = VerificationModel{std::move(fit), std::move(probs)};
  }
  return fits;
}

NuisanceFits fit_nuisance(const Dataset& ds, Method method, const ModelSpec& spec) {
  const Method one[] = {method};
  return fit_nuisance(ds, one, spec);
}

void require_prerequisites(Method m, const Dataset& ds, const NuisanceFits& fits) {
  if (m == Method::full && !ds.fully_verified()) {
    throw ValidationError("FULL requires complete verification");
  }
  if (needs_disease_model(m) && !fits.disease) {
    throw ContractError(to_string(m) + " requires a fitted disease model");
  }
  if (needs_verification_model(m) && !fits.verification) {
    throw ContractError(to_string(m) + " requires a fitted verification model");
  }
}

Eigen::MatrixXd pseudo_disease(Method m, const Dataset& ds, const DiseaseProbs* rho,
                               const VerificationProbs* pi) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  if (m == Method::full && !ds.fully_verified()) {
    throw ValidationError("FULL requires complete verification");
  }
  if (needs_disease_model(m) && (!rho || rho->rho.rows() != n)) {
    throw ContractError(to_string(m) + " requires disease probabilities for every subject");
  }
  if (needs_verification_model(m) && (!pi || pi->pi.size() != n)) {
    throw ContractError(to_string(m) + " requires verification probabilities for every subject");
  }
  Eigen::MatrixXd out(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Subject& s = ds[static_cast<std::size_t>(i)];
    const double v = s.v ? 1.0 : 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = s.indicator(k + 1);
      switch (m) {
        case Method::full: out(i, k) = d; break;
        case Method::fi: out(i, k) = rho->rho(i, k); break;
        case Method::msi: out(i, k) = s.v ? d : rho->rho(i, k); break;
        case Method::ipw: out(i, k) = s.v ? d * (1.0 / pi->pi[i]) : 0.0; break;
        case Method::spe: {
          const double w = v * (1.0 / pi->pi[i]);
          out(i, k) = w * d - rho->rho(i, k) * (w - 1.0);
          break;
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd pseudo_disease(Method m, const Dataset& ds, const NuisanceFits& fits) {
  require_prerequisites(m, ds, fits);
  return pseudo_disease(m, ds, fits.disease ? &fits.disease->probs : nullptr,
                        fits.verification ? &fits.verification->probs : nullptr);
}

TauDims tau_dims(Method m, const NuisanceFits& fits) {
  TauDims d;
  if (needs_disease_model(m) && fits.disease) d.rho = fits.disease->fit.tau.size();
  if (needs_verification_model(m) && fits.verification) d.pi = fits.verification->fit.tau.size();
  return d;
}

PseudoRow pseudo_row(Method m, const Subject& s, const GlmFit* rho_fit, const GlmFit* pi_fit,
                     bool with_gradient) {
  const bool use_rho = needs_disease_model(m);
  const bool use_pi = needs_verification_model(m);
  if ((use_rho && !rho_fit) || (use_pi && !pi_fit)) {
    throw ContractError(to_string(m) + " requires its working models");
  }
  const Eigen::Index rd = use_rho ? rho_fit->tau.size() : 0;
  const Eigen::Index pd = use_pi ? pi_fit->tau.size() : 0;

  Eigen::Vector3d rho = Eigen::Vector3d::Zero();
  Eigen::MatrixXd drho;  // 3 x rd
  if (use_rho) {
    const Eigen::VectorXd u = design_row(s, rho_fit->design);
    rho = disease_probabilities(*rho_fit, u);
    clip_disease_row(rho);
    if (with_gradient) drho = clipped_disease_prob_gradient(*rho_fit, u);
  }
  double inv_pi = 0.0;
  Eigen::RowVectorXd dinv;  // 1 x pd
  if (use_pi) {
    const Eigen::VectorXd u = design_row(s, pi_fit->design);
    inv_pi = 1.0 / std::max(verification_probability(*pi_fit, u), kProbabilityFloor);
    if (with_gradient) dinv = inverse_pi_gradient(*pi_fit, u);
  }

  const double v = s.v ? 1.0 : 0.0;
  PseudoRow r;
  if (with_gradient) {
    r.d_dtilde = Eigen::MatrixXd::Zero(3, rd + pd);
    r.d_omega = Eigen::RowVectorXd::Zero(rd + pd);
  }
  for (int k = 0; k < 3; ++k) {
    const double d = s.indicator(k + 1);
    switch (m) {
      case Method::full:
        r.dtilde[k] = d;
        break;
      case Method::fi:
        r.dtilde[k] = rho[k];
        if (with_gradient) r.d_dtilde.row(k) = drho.row(k);
        break;
      case Method::msi:
        r.dtilde[k] = s.v ? d : rho[k];
        if (with_gradient && !s.v) r.d_dtilde.row(k) = drho.row(k);
        break;
      case Method::ipw:
        r.dtilde[k] = s.v ? d * inv_pi : 0.0;
        if (with_gradient) r.d_dtilde.row(k) = (v * d) * dinv;
        break;
      case Method::spe: {
        const double w = v * inv_pi;
        r.dtilde[k] = w * d - rho[k] * (w - 1.0);
        if (with_gradient) {
          r.d_dtilde.block(k, 0, 1, rd) = -(w - 1.0) * drho.row(k);
          r.d_dtilde.block(k, rd, 1, pd) = (v * (d - rho[k])) * dinv;
        }
        break;
      }
    }
  }
  if (m == Method::ipw) {
    r.omega = v * inv_pi;
    if (with_gradient) r.d_omega = v * dinv;
  }
  return r;
}

Eigen::VectorXd normalizing_weights(Method m, const Dataset& ds, const NuisanceFits& fits) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  if (m != Method::ipw) return Eigen::VectorXd::Ones(n);
  require_prerequisites(m, ds, fits);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = ds[static_cast<std::size_t>(i)].v ? 1.0 / fits.verification->probs.pi[i] : 0.0;
  }
  return w;
}

Eigen::Vector3d ThetaBeta::tcf() const {
  return {1.0 - b11 / theta[0], (b12 - b22) / theta[1], b23 / theta[2]};
}

TcfEvaluator::TcfEvaluator(const Dataset& ds, const Eigen::MatrixXd& dtilde, const Eigen::VectorXd& omega) {
  const std::size_t n = ds.size();
  if (static_cast<std::size_t>(dtilde.rows()) != n || dtilde.cols() != 3 ||
      static_cast<std::size_t>(omega.size()) != n) {
    throw ContractError("pseudo-disease matrix does not match the dataset");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ds[a].t < ds[b].t; });
  t_.resize(n);
  suffix_.assign(n + 1, Eigen::Vector3d::Zero());
  for (std::size_t j = n; j-- > 0;) {
    const auto i = static_cast<Eigen::Index>(order[j]);
    t_[j] = ds[order[j]].t;
    suffix_[j] = suffix_[j + 1] + dtilde.row(i).transpose();
  }
  total_ = suffix_[0];
  for (int k = 0; k < 3; ++k) {
    if (!(std::abs(total_[k]) > kDenominatorFloor)) throw DegenerateDenominator(k + 1);
  }
  for (std::size_t i = 0; i < n; ++i) omega_total_ += omega[static_cast<Eigen::Index>(i)];
}

Eigen::Vector3d TcfEvaluator::tail(double c) const {
  const auto it = std::lower_bound(t_.begin(), t_.end(), c);
  return suffix_[static_cast<std::size_t>(it - t_.begin())];
}

ThetaBeta TcfEvaluator::at(double c1, double c2) const {
  const Eigen::Vector3d s1 = tail(c1);
  const Eigen::Vector3d s2 = tail(c2);
  ThetaBeta tb;
  tb.theta = total_ / omega_total_;
  tb.b11 = s1[0] / omega_total_;
  tb.b12 = s1[1] / omega_total_;
  tb.b22 = s2[1] / omega_total_;
  tb.b23 = s2[2] / omega_total_;
  return tb;
}

namespace {

TcfEvaluator make_evaluator(Method m, const Dataset& ds, const NuisanceFits& fits) {
  return TcfEvaluator(ds, pseudo_disease(m, ds, fits), normalizing_weights(m, ds, fits));
}

TcfEstimate estimate_with(const TcfEvaluator& ev, Method m, const CutPair& cut) {
  TcfEstimate est;
  est.cut = cut;
  est.method = m;
  est.tb = ev.at(cut.c1, cut.c2);
  est.tcf = est.tb.tcf();
  return est;
}

}  // namespace

TcfEstimate estimate_tcf(Method m, const Dataset& ds, const CutPair& cut, const NuisanceFits& fits) {
  return estimate_with(make_evaluator(m, ds, fits), m, cut);
}

double empirical_quantile(std::vector<double> sorted, double level) {
  if (sorted.empty()) throw ContractError("quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw ContractError("quantile level must lie in [0, 1]");
  if (!std::is_sorted(sorted.begin(), sorted.end())) std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

namespace {

std::vector<double> sorted_t(const Dataset& ds) {
  std::vector<double> t;
  t.reserve(ds.size());
  for (const auto& s : ds) t.push_back(s.t);
  std::sort(t.begin(), t.end());
  return t;
}

std::vector<CutPair> all_increasing_pairs(const std::vector<double>& values) {
  std::vector<CutPair> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = i + 1; j < values.size(); ++j) out.emplace_back(values[i], values[j]);
  }
  return out;
}

}  // namespace

std::vector<CutPair> quantile_grid(const Dataset& ds, int levels) {
  if (levels < 2) throw ContractError("quantile grid needs at least two levels");
  const std::vector<double> t = sorted_t(ds);
  std::vector<double> q;
  for (int j = 1; j <= levels; ++j) {
    q.push_back(empirical_quantile(t, static_cast<double>(j) / (levels + 1)));
  }
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end()), q.end());
  return all_increasing_pairs(q);
}

std::vector<CutPair> distinct_value_grid(const Dataset& ds) {
  std::vector<double> t = sorted_t(ds);
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return all_increasing_pairs(t);
}

std::vector<TcfEstimate> roc_surface(Method m, const Dataset& ds, std::span<const CutPair> grid,
                                     const NuisanceFits& fits, unsigned threads) {
  if (grid.empty()) throw ContractError("surface grid is empty");
  std::vector<TcfEstimate> out(grid.size());
  std::optional<TcfEvaluator> ev;
  std::string failure;
  try {
    ev.emplace(make_evaluator(m, ds, fits));
  } catch (const DegenerateDenominator& e) {
    failure = e.what();
  }
  parallel_for(grid.size(), threads, [&](std::size_t g) {
    if (ev) {
      out[g] = estimate_with(*ev, m, grid[g]);
    } else {
      out[g].cut = grid[g];
      out[g].method = m;
      out[g].tcf.setConstant(std::numeric_limits<double>::quiet_NaN());
      out[g].flag = failure;
    }
  });
  return out;
}

ClassPair parse_class_pair(const std::string& s) {
  if (s == "1,2" || s == "12") return ClassPair::p12;
  if (s == "2,3" || s == "23") return ClassPair::p23;
  if (s == "1,3" || s == "13") return ClassPair::p13;
  throw ContractError("class pair must be one of 1,2  2,3  1,3 (got '" + s + "')");
}

std::string to_string(ClassPair p) {
  switch (p) {
    case ClassPair::p12: return "1,2";
    case ClassPair::p23: return "2,3";
    case ClassPair::p13: return "1,3";
  }
  return "?";
}

std::vector<ProjectionPoint> roc_projection(Method m, const Dataset& ds, ClassPair pair,
                                            std::span<const double> cuts, const NuisanceFits& fits) {
  const TcfEvaluator ev = make_evaluator(m, ds, fits);
  std::vector<ProjectionPoint> out;
  out.reserve(cuts.size());
  for (double c : cuts) {
    if (std::isnan(c)) throw ContractError("projection cut is NaN");
    ProjectionPoint p{c, 0.0, 0.0};
    switch (pair) {
      case ClassPair::p12: {
        const Eigen::Vector3d v = ev.at(c, kInf).tcf();
        p.x = v[0];
        p.y = v[1];
        break;
      }
      case ClassPair::p23: {
        const Eigen::Vector3d v = ev.at(-kInf, c).tcf();
        p.x = v[1];
        p.y = v[2];
        break;
      }
      case ClassPair::p13: {
        const Eigen::Vector3d v = ev.at(c, c).tcf();
        p.x = v[0];
        p.y = v[2];
        break;
      }
    }
    out.push_back(p);
  }
  return out;
}

std::vector<double> default_projection_cuts(const Dataset& ds) {
  std::vector<double> t = sorted_t(ds);
  t.erase(std::unique(t.begin(), t.end()), t.end());
  t.insert(t.begin(), -kInf);
  t.push_back(kInf);
  return t;
}

}  // namespace rocsurf
