#include "rocsurf/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "rocsurf/asymptotics.hpp"
#include "rocsurf/distributions.hpp"
#include "rocsurf/parallel.hpp"
#include "rocsurf/report.hpp"
#include "rocsurf/resampling.hpp"
#include "rocsurf/vus.hpp"

namespace rocsurf {

namespace {

using Eigen::Matrix2d;
using Eigen::Vector2d;
using Eigen::Vector3d;

constexpr double kTheta1 = 0.4;
constexpr double kTheta2 = 0.35;
constexpr double kTheta3 = 0.25;

Matrix2d lambda_matrix(int index) {
  Matrix2d l;
  switch (index) {
    case 1: l << 1.75, 0.1, 0.1, 2.5; break;
    case 2: l << 2.5, 1.5, 1.5, 2.5; break;
    case 3: l << 5.5, 3.0, 3.0, 2.5; break;
    default: throw ContractError("lambda index must be 1, 2 or 3");
  }
  return l;
}

// Bivariate-normal mixture studies: class k has mean k * step.
struct MixtureParams {
  Matrix2d lambda;
  Vector2d step;
  Eigen::Vector3d delta;  // verification logit (S1 and VUS studies)
};

MixtureParams mixture_params(const StudyConfig& c) {
  switch (c.study) {
    case Study::s1:
    case Study::s2:
      return {lambda_matrix(c.lambda_index), Vector2d(2.0, 1.0), Vector3d(0.5, -0.3, 0.75)};
    case Study::vus1: {
      Matrix2d l;
      l << 1.2, 1.0, 1.0, 1.0;
      return {l, Vector2d(3.0, 2.0), Vector3d(1.0, -2.87, 4.06)};
    }
    case Study::vus2: return {lambda_matrix(1), Vector2d(2.0, 1.0), Vector3d(1.0, -2.2, 4.0)};
    case Study::vus3: return {lambda_matrix(3), Vector2d(2.0, 1.0), Vector3d(1.0, -2.2, 4.0)};
    default: throw ContractError("study " + to_string(c.study) + " is not a normal-mixture design");
  }
}

bool is_latent(Study s) { return s == Study::s3 || s == Study::s4; }

const double kH1 = normal_quantile(kTheta1);
const double kH2 = normal_quantile(kTheta1 + kTheta2);

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double mixture_quantile(double level, double step, double sd) {
  auto cdf = [&](double x) {
    return kTheta1 * normal_cdf((x - step) / sd) + kTheta2 * normal_cdf((x - 2 * step) / sd) +
           kTheta3 * normal_cdf((x - 3 * step) / sd);
  };
  double lo = -100.0, hi = 100.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

int draw_class(std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return u < kTheta1 ? 1 : (u < kTheta1 + kTheta2 ? 2 : 3);
}

bool draw_bernoulli(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

}  // namespace

std::string to_string(Study s) {
  switch (s) {
    case Study::s1: return "s1";
    case Study::s2: return "s2";
    case Study::s3: return "s3";
    case Study::s4: return "s4";
    case Study::vus1: return "vus1";
    case Study::vus2: return "vus2";
    case Study::vus3: return "vus3";
  }
  return "?";
}

Study parse_study(const std::string& s) {
  for (Study st : {Study::s1, Study::s2, Study::s3, Study::s4, Study::vus1, Study::vus2, Study::vus3}) {
    if (to_string(st) == s) return st;
  }
  throw ContractError("unknown study '" + s + "' (expected s1, s2, s3, s4, vus1, vus2 or vus3)");
}

bool is_vus_study(Study s) noexcept { return s == Study::vus1 || s == Study::vus2 || s == Study::vus3; }

void StudyConfig::validate() const {
  if ((study == Study::s1 || study == Study::s2) && (lambda_index < 1 || lambda_index > 3)) {
    throw ContractError("lambda index must be 1, 2 or 3");
  }
  if (n < 10) throw ContractError("simulation sample size must be at least 10");
  if (reps < 1) throw ContractError("simulation needs at least one replicate");
  if (methods.empty()) throw ContractError("simulation needs at least one method");
  if (std::find(methods.begin(), methods.end(), Method::full) != methods.end()) {
    throw ContractError("FULL is not available in simulations (disease status is partially verified)");
  }
  if (boot == 1 || boot < 0) throw ContractError("bootstrap replicate count must be 0 or at least 2");
}

std::vector<CutPair> default_cuts(Study s) {
  if (is_latent(s)) {
    return {{-1, -0.5}, {-1, 0.7}, {-1, 1.3}, {-0.5, 0.7}, {-0.5, 1.3}, {0.7, 1.3}};
  }
  return {{2, 4}, {2, 5}, {2, 7}, {4, 5}, {4, 7}, {5, 7}};
}

StudyConfig default_config(Study s, int lambda_index) {
  StudyConfig c;
  c.study = s;
  c.lambda_index = lambda_index;
  switch (s) {
    case Study::s1: c.n = 250; c.reps = 500; break;
    case Study::s2:
    case Study::s3:
    case Study::s4: c.n = 1000; c.reps = 200; break;
    default: c.n = 200; c.reps = 300; break;
  }
  c.cuts = is_vus_study(s) ? std::vector<CutPair>{} : default_cuts(s);
  return c;
}

std::pair<double, double> s2_thresholds(int lambda_index) {
  const Matrix2d l = lambda_matrix(lambda_index);
  return {mixture_quantile(0.8, 2.0, std::sqrt(l(0, 0))), mixture_quantile(0.8, 1.0, std::sqrt(l(1, 1)))};
}

Dataset generate(const StudyConfig& config, std::uint64_t rep) {
  config.validate();
  auto rng = stream_rng(config.seed, rep);
  std::normal_distribution<double> z01(0.0, 1.0);
  std::vector<Subject> rows;
  rows.reserve(config.n);

  if (is_latent(config.study)) {
    const double sd_half = std::sqrt(0.5);
    for (std::size_t i = 0; i < config.n; ++i) {
      const double z = sd_half * z01(rng) + sd_half * z01(rng);
      const int d = z <= kH1 ? 1 : (z <= kH2 ? 2 : 3);
      const double t = 0.5 * z + 0.5 * z01(rng);
      const double a = z + 0.5 * z01(rng);
      const bool v = draw_bernoulli(rng, logistic(0.1 - 1.53 * t + a));
      Subject s{t, {a}, v, std::nullopt};
      if (config.study == Study::s4) s.a.push_back(std::pow(std::cbrt(a), 2));
      if (v) s.d = d;
      rows.push_back(std::move(s));
    }
    return Dataset(std::move(rows));
  }

  const MixtureParams p = mixture_params(config);
  const Eigen::LLT<Matrix2d> llt(p.lambda);
  const Matrix2d chol = llt.matrixL();
  std::pair<double, double> thresholds{0.0, 0.0};
  if (config.study == Study::s2) thresholds = s2_thresholds(config.lambda_index);
  for (std::size_t i = 0; i < config.n; ++i) {
    const int d = draw_class(rng);
    const double e1 = z01(rng);
    const double e2 = z01(rng);
    const Vector2d x = static_cast<double>(d) * p.step + chol * Vector2d(e1, e2);
    const double t = x[0];
    const double a = x[1];
    double pi = 0.0;
    if (config.study == Study::s2) {
      pi = 0.35 + 0.3 * (t > thresholds.first ? 1.0 : 0.0) + 0.35 * (a > thresholds.second ? 1.0 : 0.0);
    } else {
      pi = logistic(p.delta[0] + p.delta[1] * t + p.delta[2] * a);
    }
    const bool v = draw_bernoulli(rng, pi);
    Subject s{t, {a}, v, std::nullopt};
    if (v) s.d = d;
    rows.push_back(std::move(s));
  }
  return Dataset(std::move(rows));
}

ModelSpec working_models(const StudyConfig& config) {
  ModelSpec spec;
  const DesignSpec t_and_a{std::vector<std::size_t>{0}, true};
  const DesignSpec t_only{std::vector<std::size_t>{}, true};
  switch (config.study) {
    case Study::s1:
    case Study::vus1:
    case Study::vus2:
    case Study::vus3:
      spec.disease = t_and_a;
      spec.verification = t_and_a;
      break;
    case Study::s2:
      spec.disease = t_and_a;
      spec.verification = t_only;
      break;
    case Study::s3:
      spec.disease = t_only;
      spec.verification = t_and_a;
      break;
    case Study::s4:
      spec.disease = t_only;
      spec.verification = DesignSpec{std::vector<std::size_t>{1}, true};
      break;
  }
  spec.link = Link::logit;
  return spec;
}

Vector3d true_tcf(const StudyConfig& config, const CutPair& cut) {
  const double c1 = cut.c1;
  const double c2 = cut.c2;
  if (is_latent(config.study)) {
    constexpr double tol = 1e-8;
    auto cond = [](double c, double z) { return normal_cdf((c - 0.5 * z) / 0.5); };
    const double i1 = integrate([&](double z) { return cond(c1, z) * normal_pdf(z); }, -INFINITY, kH1, tol);
    const double i2 = integrate([&](double z) { return (cond(c2, z) - cond(c1, z)) * normal_pdf(z); }, kH1, kH2, tol);
    const double i3 = integrate([&](double z) { return cond(c2, z) * normal_pdf(z); }, kH2, INFINITY, tol);
    return {i1 / normal_cdf(kH1), i2 / (normal_cdf(kH2) - normal_cdf(kH1)), 1.0 - i3 / normal_sf(kH2)};
  }
  const MixtureParams p = mixture_params(config);
  const double sd = std::sqrt(p.lambda(0, 0));
  const double m = p.step[0];
  return {normal_cdf((c1 - m) / sd), normal_cdf((c2 - 2 * m) / sd) - normal_cdf((c1 - 2 * m) / sd),
          normal_sf((c2 - 3 * m) / sd)};
}

double true_vus(const StudyConfig& config) {
  if (is_latent(config.study)) throw ContractError("true VUS is only available for normal-mixture studies");
  const MixtureParams p = mixture_params(config);
  const double sd = std::sqrt(p.lambda(0, 0));
  const double m = p.step[0];
  return integrate(
      [&](double x) {
        return normal_pdf((x - 2 * m) / sd) / sd * normal_cdf((x - m) / sd) * normal_sf((x - 3 * m) / sd);
      },
      -INFINITY, INFINITY, 1e-10);
}

const TcfCell& SimReport::cell(const CutPair& cut, Method m) const {
  for (const auto& c : tcf) {
    if (c.cut == cut && c.method == m) return c;
  }
  throw ContractError("no report cell for method " + to_string(m));
}

const VusCell& SimReport::vus_cell(Method m) const {
  for (const auto& c : vus) {
    if (c.method == m) return c;
  }
  throw ContractError("no VUS report cell for method " + to_string(m));
}

namespace {

template <class T>
struct RepValue {
  std::optional<T> est, asy, boot;
};

struct RepResult {
  std::vector<RepValue<Vector3d>> tcf;  // method-major, then cut
  std::vector<RepValue<double>> vus;    // per method
  std::vector<SimFailure> failures;
  double verification_rate = 0.0;
};

std::uint64_t boot_seed(std::uint64_t seed, std::uint64_t rep) {
  return splitmix64(splitmix64(seed ^ 0xb0075eedULL) + rep);
}

RepResult run_replicate(const StudyConfig& config, const std::vector<CutPair>& cuts, const ModelSpec& spec,
                        int rep) {
  const bool vus_mode = is_vus_study(config.study);
  RepResult out;
  const std::size_t nm = config.methods.size();
  if (vus_mode) {
    out.vus.resize(nm);
  } else {
    out.tcf.resize(nm * cuts.size());
  }
  const Dataset ds = generate(config, static_cast<std::uint64_t>(rep));
  out.verification_rate = verification_rate(ds);

  NuisanceFits fits;
  std::string rho_error, pi_error;
  const bool want_rho = std::any_of(config.methods.begin(), config.methods.end(), needs_disease_model);
  const bool want_pi = std::any_of(config.methods.begin(), config.methods.end(), needs_verification_model);
  if (want_rho) {
    try {
      GlmFit f = fit_disease(ds, spec.disease, spec.glm);
      DiseaseProbs p = predict_disease(f, ds);
      fits.disease = DiseaseModel{std::move(f), std::move(p)};
    } catch (const Error& e) {
      rho_error = e.what();
    }
  }
  if (want_pi) {
    try {
      GlmFit f = fit_verification(ds, spec.link, spec.verification, spec.glm);
      VerificationProbs p = predict_verification(f, ds);
      fits.verification = VerificationModel{std::move(f), std::move(p)};
    } catch (const Error& e) {
      pi_error = e.what();
    }
  }

  const BootstrapPlan plan{config.boot, boot_seed(config.seed, static_cast<std::uint64_t>(rep)), 1};
  for (std::size_t mi = 0; mi < nm; ++mi) {
    const Method m = config.methods[mi];
    if (needs_disease_model(m) && !fits.disease) {
      out.failures.push_back({rep, m, "fit", rho_error});
      continue;
    }
    if (needs_verification_model(m) && !fits.verification) {
      out.failures.push_back({rep, m, "fit", pi_error});
      continue;
    }
    if (vus_mode) {
      auto& slot = out.vus[mi];
      try {
        slot.est = vus_point(m, ds, fits).mu;
      } catch (const Error& e) {
        out.failures.push_back({rep, m, "estimate", e.what()});
        continue;
      }
      if (config.asymptotic) {
        try {
          slot.asy = std::sqrt(vus_variance(m, ds, fits, *slot.est));
        } catch (const Error& e) {
          out.failures.push_back({rep, m, "asymptotic", e.what()});
        }
      }
      if (config.boot > 0) {
        try {
          slot.boot = bootstrap_vus(m, ds, spec, plan).sd[0];
        } catch (const Error& e) {
          out.failures.push_back({rep, m, "bootstrap", e.what()});
        }
      }
      continue;
    }
    bool estimated = true;
    for (std::size_t ci = 0; ci < cuts.size(); ++ci) {
      auto& slot = out.tcf[mi * cuts.size() + ci];
      try {
        slot.est = estimate_tcf(m, ds, cuts[ci], fits).tcf;
      } catch (const Error& e) {
        out.failures.push_back({rep, m, "estimate", e.what()});
        estimated = false;
        break;
      }
      if (config.asymptotic) {
        try {
          slot.asy = tcf_covariance(m, ds, cuts[ci], fits).asy_sd;
        } catch (const Error& e) {
          out.failures.push_back({rep, m, "asymptotic", e.what()});
        }
      }
    }
    if (estimated && config.boot > 0) {
      try {
        const BootstrapResult br = bootstrap_tcf(m, ds, cuts, spec, plan);
        for (std::size_t ci = 0; ci < cuts.size(); ++ci) {
          out.tcf[mi * cuts.size() + ci].boot = br.sd.segment(static_cast<Eigen::Index>(3 * ci), 3);
        }
      } catch (const Error& e) {
        out.failures.push_back({rep, m, "bootstrap", e.what()});
      }
    }
  }
  return out;
}

template <class T>
T zero_like() {
  if constexpr (std::is_same_v<T, double>) {
    return 0.0;
  } else {
    return T::Zero();
  }
}

template <class T>
T square(const T& x) {
  if constexpr (std::is_same_v<T, double>) {
    return x * x;
  } else {
    return x.cwiseProduct(x);
  }
}

template <class T>
T root(const T& x) {
  if constexpr (std::is_same_v<T, double>) {
    return std::sqrt(x);
  } else {
    return x.cwiseSqrt();
  }
}

// Mean and sample sd of the engaged estimates; means of asy/boot where present.
template <class T>
void summarize(const std::vector<const RepValue<T>*>& values, int& n_ok, T& mean, T& sd, std::optional<T>& asy,
               std::optional<T>& boot) {
  T sum = zero_like<T>(), asum = zero_like<T>(), bsum = zero_like<T>();
  int na = 0, nb = 0;
  n_ok = 0;
  for (const auto* v : values) {
    if (v->est) {
      sum += *v->est;
      ++n_ok;
    }
    if (v->asy) {
      asum += *v->asy;
      ++na;
    }
    if (v->boot) {
      bsum += *v->boot;
      ++nb;
    }
  }
  if (n_ok > 0) {
    mean = sum / static_cast<double>(n_ok);
    T ss = zero_like<T>();
    for (const auto* v : values) {
      if (v->est) ss += square<T>(*v->est - mean);
    }
    if (n_ok > 1) sd = root<T>(ss / static_cast<double>(n_ok - 1));
  }
  if (na > 0) asy = asum / static_cast<double>(na);
  if (nb > 0) boot = bsum / static_cast<double>(nb);
}

}  // namespace

SimReport run_monte_carlo(const StudyConfig& config) {
  config.validate();
  SimReport report;
  report.config = config;
  const bool vus_mode = is_vus_study(config.study);
  if (!vus_mode) {
    report.cuts = config.cuts.empty() ? default_cuts(config.study) : config.cuts;
    for (const auto& c : report.cuts) report.truth.push_back(true_tcf(config, c));
  } else {
    report.true_vus = true_vus(config);
  }
  const ModelSpec spec = working_models(config);

  std::vector<RepResult> reps(static_cast<std::size_t>(config.reps));
  parallel_for(reps.size(), config.threads, [&](std::size_t r) {
    reps[r] = run_replicate(config, report.cuts, spec, static_cast<int>(r));
  });

  double vr = 0.0;
  for (const auto& r : reps) {
    vr += r.verification_rate;
    report.failures.insert(report.failures.end(), r.failures.begin(), r.failures.end());
  }
  report.verification_rate = vr / static_cast<double>(reps.size());

  const std::size_t nm = config.methods.size();
  if (vus_mode) {
    for (std::size_t mi = 0; mi < nm; ++mi) {
      VusCell cell;
      cell.method = config.methods[mi];
      std::vector<const RepValue<double>*> values;
      for (const auto& r : reps) values.push_back(&r.vus[mi]);
      summarize<double>(values, cell.n_ok, cell.mean, cell.mc_sd, cell.asy_sd, cell.boot_sd);
      report.vus.push_back(cell);
    }
    return report;
  }
  for (std::size_t ci = 0; ci < report.cuts.size(); ++ci) {
    for (std::size_t mi = 0; mi < nm; ++mi) {
      TcfCell cell;
      cell.cut = report.cuts[ci];
      cell.method = config.methods[mi];
      std::vector<const RepValue<Vector3d>*> values;
      for (const auto& r : reps) values.push_back(&r.tcf[mi * report.cuts.size() + ci]);
      summarize<Vector3d>(values, cell.n_ok, cell.mean, cell.mc_sd, cell.asy_sd, cell.boot_sd);
      report.tcf.push_back(cell);
    }
  }
  return report;
}

void write_report_csv(std::ostream& out, const SimReport& report) {
  const auto& c = report.config;
  const std::string prefix = to_string(c.study) + "," +
                             (c.study == Study::s1 || c.study == Study::s2 ? std::to_string(c.lambda_index) : "") +
                             "," + std::to_string(c.n) + "," + std::to_string(c.reps) + ",";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  if (is_vus_study(c.study)) {
    out << "study,lambda,n,reps,method,mean,mc_sd,asy_sd,boot_sd,n_ok\n";
    out << prefix << "True," << format_double(*report.true_vus) << ",,,,\n";
    for (const auto& cell : report.vus) {
      out << prefix << to_string(cell.method) << ',' << format_double(cell.mean) << ',' << format_double(cell.mc_sd)
          << ',' << opt(cell.asy_sd) << ',' << opt(cell.boot_sd) << ',' << cell.n_ok << '\n';
    }
    return;
  }
  out << "study,lambda,n,reps,c1,c2,method,tcf1,tcf2,tcf3,mc_sd1,mc_sd2,mc_sd3,asy_sd1,asy_sd2,asy_sd3,"
         "boot_sd1,boot_sd2,boot_sd3,n_ok\n";
  auto triple = [](const std::optional<Vector3d>& v) {
    if (!v) return std::string(",,");
    return format_double((*v)[0]) + "," + format_double((*v)[1]) + "," + format_double((*v)[2]);
  };
  for (std::size_t ci = 0; ci < report.cuts.size(); ++ci) {
    const auto& cut = report.cuts[ci];
    const std::string cutcols = format_double(cut.c1) + "," + format_double(cut.c2) + ",";
    out << prefix << cutcols << "True," << triple(report.truth[ci]) << ",,,,,,,,,,\n";
    for (const auto& cell : report.tcf) {
      if (!(cell.cut == cut)) continue;
      out << prefix << cutcols << to_string(cell.method) << ',' << triple(cell.mean) << ',' << triple(cell.mc_sd)
          << ',' << triple(cell.asy_sd) << ',' << triple(cell.boot_sd) << ',' << cell.n_ok << '\n';
    }
  }
}

}  // namespace rocsurf
