#include "commands.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rocsurf/asymptotics.hpp"
#include "rocsurf/dataset.hpp"
#include "rocsurf/errors.hpp"
#include "rocsurf/glm.hpp"
#include "rocsurf/parallel.hpp"
#include "rocsurf/report.hpp"
#include "rocsurf/resampling.hpp"
#include "rocsurf/simlab.hpp"
#include "rocsurf/tcf.hpp"
#include "rocsurf/vus.hpp"

namespace rocsurf::cli {
namespace {

template <class F>
auto in_context(const std::string& ctx, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InputError& e) {
    throw InputError(ctx + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(ctx + ": " + e.what());
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& flag) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || std::isnan(x)) {
    throw ContractError(flag + ": '" + s + "' is not a number");
  }
  return x;
}

std::vector<CutPair> parse_cuts(const std::vector<std::string>& raw) {
  std::vector<CutPair> cuts;
  for (const auto& c : raw) {
    const auto parts = split(c, ',');
    if (parts.size() != 2) throw ContractError("--cut '" + c + "': expected c1,c2");
    const double lo = parse_number(parts[0], "--cut");
    const double hi = parse_number(parts[1], "--cut");
    if (!(lo < hi)) throw ContractError("--cut '" + c + "': c1 must be smaller than c2");
    cuts.emplace_back(lo, hi);
  }
  return cuts;
}

std::string cut_label(const CutPair& c) {
  return "cut (" + format_double(c.c1) + ", " + format_double(c.c2) + ")";
}

struct Settings {
  bool csv = false;
  unsigned threads = 0;
  Link link = Link::logit;
};

Settings settings(const Options& o) {
  Settings s;
  if (o.format.empty()) {
    s.csv = o.out.size() >= 4 && o.out.compare(o.out.size() - 4, 4, ".csv") == 0;
  } else if (o.format == "csv") {
    s.csv = true;
  } else if (o.format != "json") {
    throw ContractError("--format must be json or csv");
  }
  if (o.threads) {
    s.threads = *o.threads;
  } else if (const char* env = std::getenv("ROC_SURFACE_THREADS"); env && *env) {
    const double t = parse_number(env, "ROC_SURFACE_THREADS");
    if (t < 0 || t != std::floor(t) || t > 4096) {
      throw ContractError("ROC_SURFACE_THREADS must be a non-negative integer");
    }
    s.threads = static_cast<unsigned>(t);
  }
  s.link = in_context("--link", [&] { return parse_link(o.link); });
  if (!(o.level > 0.0 && o.level < 1.0)) throw ContractError("--level must lie in (0, 1)");
  if (o.boot < 0) throw ContractError("--boot must be non-negative");
  return s;
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f || !(f << text) || !f.flush()) throw InputError("--out: cannot write '" + o.out + "'");
}

std::string render(const json& j) {
  std::ostringstream out;
  write_json(out, j);
  return out.str();
}

Dataset load(const Options& o) {
  if (o.input.empty()) throw ContractError("an input CSV file is required");
  CsvSchema schema;
  schema.covariates = o.covariates;
  return in_context(o.input, [&] { return load_csv(o.input, schema); });
}

std::vector<std::string> covariate_names(const Options& o, const Dataset& ds) {
  if (!o.covariates.empty()) return o.covariates;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < ds.covariate_dim(); ++j) names.push_back("a" + std::to_string(j + 1));
  return names;
}

DesignSpec design_from(const std::string& flag, const std::string& value, const std::vector<std::string>& names) {
  DesignSpec d;
  if (value == "all") return d;
  d.columns.emplace();
  if (value == "none") return d;
  for (const auto& name : split(value, ',')) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ContractError(flag + ": unknown covariate '" + name + "'");
    d.columns->push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return d;
}

ModelSpec model_spec(const Options& o, const Settings& s, const Dataset& ds) {
  const auto names = covariate_names(o, ds);
  ModelSpec spec;
  spec.link = s.link;
  spec.disease = design_from("--rho-covariates", o.rho_covariates, names);
  spec.verification = design_from("--pi-covariates", o.pi_covariates, names);
  return spec;
}

struct MethodPlan {
  std::vector<Method> run;
  std::vector<std::pair<Method, std::string>> skipped;
  NuisanceFits fits;
  std::optional<std::string> disease_error;
  std::optional<std::string> verification_error;
};

/// "all" keeps every method whose prerequisites hold and records why the
/// others were dropped. A single method propagates its errors instead.
MethodPlan plan_methods(const std::string& flag, const Dataset& ds, const ModelSpec& spec) {
  MethodPlan plan;
  if (flag != "all") {
    const Method m = in_context("--method", [&] { return parse_method(flag); });
    const std::string ctx = "method " + to_string(m);
    if (m == Method::full) {
      in_context(ctx, [&] { require_prerequisites(m, ds, plan.fits); });
    }
    plan.fits = in_context(ctx, [&] { return fit_nuisance(ds, m, spec); });
    plan.run.push_back(m);
    return plan;
  }
  try {
    GlmFit fit = fit_disease(ds, spec.disease, spec.glm);
    DiseaseProbs probs = predict_disease(fit, ds);
    plan.fits.disease = DiseaseModel{std::move(fit), std::move(probs)};
  } catch (const Error& e) {
    plan.disease_error = e.what();
  }
  if (ds.fully_verified()) {
    plan.verification_error = "every subject is verified";
  } else {
    try {
      GlmFit fit = fit_verification(ds, spec.link, spec.verification, spec.glm);
      VerificationProbs probs = predict_verification(fit, ds);
      plan.fits.verification = VerificationModel{std::move(fit), std::move(probs)};
    } catch (const Error& e) {
      plan.verification_error = e.what();
    }
  }
  for (Method m : kAllMethods) {
    if (m == Method::full && !ds.fully_verified()) {
      plan.skipped.emplace_back(m, "FULL requires complete verification");
    } else if (needs_disease_model(m) && !plan.fits.disease) {
      plan.skipped.emplace_back(m, "disease model: " + *plan.disease_error);
    } else if (needs_verification_model(m) && !plan.fits.verification) {
      plan.skipped.emplace_back(m, "verification model: " + *plan.verification_error);
    } else {
      plan.run.push_back(m);
    }
  }
  return plan;
}

json header(const std::string& command, const Options& o, const Dataset& ds, const Settings& s) {
  json j;
  j["command"] = command;
  j["input"] = o.input;
  j["n"] = ds.size();
  j["verified"] = ds.verified_count();
  j["verification_rate"] = json_number(verification_rate(ds));
  j["link"] = to_string(s.link);
  return j;
}

json models_json(const MethodPlan& plan) {
  json j = json::object();
  if (plan.fits.disease) {
    j["disease"] = to_json(plan.fits.disease->fit);
    j["disease"]["clipped"] = plan.fits.disease->probs.clipped;
  } else if (plan.disease_error) {
    j["disease"] = {{"error", *plan.disease_error}};
  }
  if (plan.fits.verification) {
    j["verification"] = to_json(plan.fits.verification->fit);
    j["verification"]["clipped"] = plan.fits.verification->probs.clipped;
  } else if (plan.verification_error) {
    j["verification"] = {{"error", *plan.verification_error}};
  }
  return j;
}

json skipped_json(const MethodPlan& plan) {
  json a = json::array();
  for (const auto& [m, why] : plan.skipped) a.push_back({{"method", to_string(m)}, {"reason", why}});
  return a;
}

void report_skipped(const MethodPlan& plan) {
  for (const auto& [m, why] : plan.skipped) std::cerr << "skipped " << to_string(m) << ": " << why << '\n';
}

Method single_method(const Options& o, const std::string& command) {
  if (o.method == "all") throw ContractError("--method all is not supported by " + command);
  return in_context("--method", [&] { return parse_method(o.method); });
}

std::string opt_cell(const std::optional<Eigen::Vector3d>& v, int k) {
  return v ? format_double((*v)[k]) : std::string();
}

std::array<int, 2> pair_components(ClassPair p) {
  switch (p) {
    case ClassPair::p12: return {0, 1};
    case ClassPair::p23: return {1, 2};
    case ClassPair::p13: return {0, 2};
  }
  return {0, 1};
}

}  // namespace

void run_tcf(const Options& o) {
  const Settings s = settings(o);
  const auto cuts = parse_cuts(o.cuts);
  if (cuts.empty()) throw ContractError("--cut: at least one cut pair is required");
  const ClassPair pair = in_context("--pair", [&] { return parse_class_pair(o.pair); });
  const Dataset ds = load(o);
  const ModelSpec spec = model_spec(o, s, ds);
  const MethodPlan plan = plan_methods(o.method, ds, spec);

  json estimates = json::array();
  std::ostringstream csv;
  csv << "method,c1,c2,tcf1,tcf2,tcf3,asy_sd1,asy_sd2,asy_sd3,ci1_lo,ci1_hi,ci2_lo,ci2_hi,ci3_lo,ci3_hi,"
         "boot_sd1,boot_sd2,boot_sd3\n";
  for (Method m : plan.run) {
    const std::string mctx = "method " + to_string(m);
    std::optional<BootstrapResult> boot;
    if (o.boot > 0) {
      const BootstrapPlan bp{o.boot, o.seed, s.threads};
      boot = in_context(mctx, [&] { return bootstrap_tcf(m, ds, cuts, spec, bp); });
      if (boot->warning) std::cerr << mctx << ": " << boot->n_failed << " bootstrap replicates failed\n";
    }
    for (std::size_t ci = 0; ci < cuts.size(); ++ci) {
      const std::string ctx = mctx + ", " + cut_label(cuts[ci]);
      TcfEstimate est = in_context(ctx, [&] { return estimate_tcf(m, ds, cuts[ci], plan.fits); });
      std::optional<std::string> asy_error;
      if (!o.no_asy) {
        try {
          est = estimate_tcf_with_sd(m, ds, cuts[ci], plan.fits);
        } catch (const NumericalError& e) {
          asy_error = e.what();
        }
      }
      if (boot) est.boot_sd = boot->sd.segment<3>(static_cast<Eigen::Index>(3 * ci));

      json j = to_json(est, o.level);
      if (asy_error) j["asy_error"] = *asy_error;
      if (boot) j["bootstrap"] = {{"replicates", boot->replicates}, {"n_failed", boot->n_failed}, {"warning", boot->warning}};
      if (est.cov) {
        const auto [a, b] = pair_components(pair);
        Eigen::Matrix2d cov;
        cov << (*est.cov)(a, a), (*est.cov)(a, b), (*est.cov)(b, a), (*est.cov)(b, b);
        try {
          const Ellipse e = confidence_region(cov, Eigen::Vector2d(est.tcf[a], est.tcf[b]), o.level);
          j["region"] = to_json(e, o.level);
          j["region"]["pair"] = to_string(pair);
        } catch (const NumericalError& e) {
          j["region_error"] = e.what();
        }
      }
      estimates.push_back(j);

      csv << to_string(m) << ',' << format_double(est.cut.c1) << ',' << format_double(est.cut.c2);
      for (int k = 0; k < 3; ++k) csv << ',' << format_double(est.tcf[k]);
      for (int k = 0; k < 3; ++k) csv << ',' << opt_cell(est.asy_sd, k);
      std::array<Interval, 3> iv{};
      if (est.asy_sd) iv = wald_intervals(est.tcf, *est.asy_sd, o.level);
      for (int k = 0; k < 3; ++k) {
        csv << ',' << (est.asy_sd ? format_double(iv[k].lo) : "") << ',' << (est.asy_sd ? format_double(iv[k].hi) : "");
      }
      for (int k = 0; k < 3; ++k) csv << ',' << opt_cell(est.boot_sd, k);
      csv << '\n';
    }
  }

  if (s.csv) {
    report_skipped(plan);
    emit(o, csv.str());
    return;
  }
  json j = header("tcf", o, ds, s);
  j["level"] = o.level;
  j["models"] = models_json(plan);
  j["estimates"] = estimates;
  j["skipped"] = skipped_json(plan);
  emit(o, render(j));
}

void run_vus(const Options& o) {
  const Settings s = settings(o);
  const Dataset ds = load(o);
  const ModelSpec spec = model_spec(o, s, ds);
  const MethodPlan plan = plan_methods(o.method, ds, spec);
  const double z = wald_multiplier(o.level);

  json estimates = json::array();
  std::ostringstream csv;
  csv << "method,estimate,asy_sd,boot_sd,ci_lo,ci_hi\n";
  for (Method m : plan.run) {
    const std::string ctx = "method " + to_string(m);
    VusEstimate est = in_context(ctx, [&] { return vus_point(m, ds, plan.fits); });
    std::optional<std::string> asy_error;
    if (!o.no_asy) {
      try {
        est = estimate_vus(m, ds, plan.fits);
      } catch (const NumericalError& e) {
        asy_error = e.what();
      }
    }
    std::optional<BootstrapResult> boot;
    if (o.boot > 0) {
      const BootstrapPlan bp{o.boot, o.seed, s.threads};
      boot = in_context(ctx, [&] { return bootstrap_vus(m, ds, spec, bp); });
      est.boot_sd = boot->sd[0];
      if (boot->warning) std::cerr << ctx << ": " << boot->n_failed << " bootstrap replicates failed\n";
    }
    json j = to_json(est, o.level);
    if (asy_error) j["asy_error"] = *asy_error;
    if (boot) j["bootstrap"] = {{"replicates", boot->replicates}, {"n_failed", boot->n_failed}, {"warning", boot->warning}};
    estimates.push_back(j);

    const auto sd = est.asy_sd();
    csv << to_string(m) << ',' << format_double(est.mu) << ',' << (sd ? format_double(*sd) : "") << ','
        << (est.boot_sd ? format_double(*est.boot_sd) : "") << ',' << (sd ? format_double(est.mu - z * *sd) : "")
        << ',' << (sd ? format_double(est.mu + z * *sd) : "") << '\n';
  }

  if (s.csv) {
    report_skipped(plan);
    emit(o, csv.str());
    return;
  }
  json j = header("vus", o, ds, s);
  j["level"] = o.level;
  j["models"] = models_json(plan);
  j["estimates"] = estimates;
  j["skipped"] = skipped_json(plan);
  emit(o, render(j));
}

void run_surface(const Options& o) {
  const Settings s = settings(o);
  const Method m = single_method(o, "surface");
  auto grid = parse_cuts(o.cuts);
  int levels = 0;
  bool distinct = false;
  if (grid.empty()) {
    if (o.grid == "distinct") {
      distinct = true;
    } else if (o.grid == "quantile") {
      levels = 99;
    } else if (o.grid.rfind("quantile:", 0) == 0) {
      const double k = parse_number(o.grid.substr(9), "--grid");
      if (k < 2 || k > 999 || k != std::floor(k)) throw ContractError("--grid quantile:K needs an integer K in [2, 999]");
      levels = static_cast<int>(k);
    } else {
      throw ContractError("--grid must be quantile, quantile:K or distinct");
    }
  }
  const Dataset ds = load(o);
  const ModelSpec spec = model_spec(o, s, ds);
  const MethodPlan plan = plan_methods(to_string(m), ds, spec);
  if (distinct) grid = distinct_value_grid(ds);
  if (levels > 0) grid = quantile_grid(ds, levels);

  auto points = roc_surface(m, ds, grid, plan.fits, s.threads);
  if (o.with_sd) {
    parallel_for(points.size(), s.threads, [&](std::size_t i) {
      if (points[i].flag) return;
      try {
        points[i] = estimate_tcf_with_sd(m, ds, points[i].cut, plan.fits);
      } catch (const NumericalError&) {
        // point estimate stays, without a standard error
      }
    });
  }

  if (s.csv) {
    std::ostringstream out;
    write_surface_csv(out, points, o.with_sd);
    emit(o, out.str());
    return;
  }
  json j = header("surface", o, ds, s);
  j["models"] = models_json(plan);
  j["surface"] = surface_json(m, points);
  emit(o, render(j));
}

void run_curve(const Options& o) {
  const Settings s = settings(o);
  const Method m = single_method(o, "curve");
  const ClassPair pair = in_context("--pair", [&] { return parse_class_pair(o.pair); });
  const Dataset ds = load(o);
  const ModelSpec spec = model_spec(o, s, ds);
  const MethodPlan plan = plan_methods(to_string(m), ds, spec);
  const std::vector<double> cuts = o.at.empty() ? default_projection_cuts(ds) : o.at;
  const auto points =
      in_context("method " + to_string(m), [&] { return roc_projection(m, ds, pair, cuts, plan.fits); });

  if (s.csv) {
    std::ostringstream out;
    write_projection_csv(out, pair, points);
    emit(o, out.str());
    return;
  }
  json j = header("curve", o, ds, s);
  j["models"] = models_json(plan);
  j["curve"] = projection_json(m, pair, points);
  emit(o, render(j));
}

void run_simulate(const Options& o) {
  const Settings s = settings(o);
  const Study study = in_context("--study", [&] { return parse_study(o.study); });
  StudyConfig config = in_context("--lambda", [&] { return default_config(study, o.lambda); });
  if (o.n) config.n = *o.n;
  if (o.reps) config.reps = *o.reps;
  config.seed = o.seed;
  config.boot = o.boot;
  config.threads = s.threads;
  config.asymptotic = !o.no_asy;
  config.cuts = parse_cuts(o.cuts);
  if (o.method != "all") {
    config.methods = {in_context("--method", [&] { return parse_method(o.method); })};
  }
  config.validate();

  const SimReport report = run_monte_carlo(config);
  if (!report.failures.empty()) {
    std::cerr << report.failures.size() << " replicate/method evaluations failed\n";
  }
  if (s.csv) {
    std::ostringstream out;
    write_report_csv(out, report);
    emit(o, out.str());
    return;
  }
  emit(o, render(to_json(report)));
}

void run_validate(const Options& o) {
  const Settings s = settings(o);
  if (s.csv) throw ContractError("--format csv is not available for validate");
  const Dataset ds = load(o);
  const ModelSpec spec = model_spec(o, s, ds);
  const MethodPlan plan = plan_methods("all", ds, spec);

  json j = header("validate", o, ds, s);
  j["covariates"] = covariate_names(o, ds);
  j["fully_verified"] = ds.fully_verified();
  const auto counts = ds.verified_class_counts();
  j["verified_by_class"] = {counts[0], counts[1], counts[2]};
  j["models"] = models_json(plan);
  json available = json::array();
  for (Method m : plan.run) available.push_back(to_string(m));
  j["methods"] = available;
  j["skipped"] = skipped_json(plan);
  emit(o, render(j));
}

}  // namespace rocsurf::cli
