#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "rocsurf/errors.hpp"

namespace {

using rocsurf::cli::Options;

void add_output(CLI::App* cmd, Options& o) {
  cmd->add_option("--out,-o", o.out, "Output file (default: stdout)");
  cmd->add_option("--format", o.format, "json or csv (default: from --out extension, else json)")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--threads", o.threads, "Worker cap; 0 = all cores (env ROC_SURFACE_THREADS)");
}

void add_data(CLI::App* cmd, Options& o) {
  cmd->add_option("data", o.input, "Input CSV with columns t, a1..ap, v, d")->required();
  cmd->add_option("--method", o.method, "full, fi, msi, ipw, spe or all")
      ->check(CLI::IsMember({"full", "fi", "msi", "ipw", "spe", "all"}, CLI::ignore_case));
  cmd->add_option("--link", o.link, "Verification model link")->check(CLI::IsMember({"logit", "probit"}));
  cmd->add_option("--covariates", o.covariates, "CSV covariate columns (default a1, a2, ...)")->delimiter(',');
  cmd->add_option("--rho-covariates", o.rho_covariates, "Disease model covariates: all, none or a list");
  cmd->add_option("--pi-covariates", o.pi_covariates, "Verification model covariates: all, none or a list");
  add_output(cmd, o);
}

void add_inference(CLI::App* cmd, Options& o) {
  cmd->add_option("--boot", o.boot, "Bootstrap replicates (0 = none)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", o.seed, "Bootstrap seed");
  cmd->add_option("--level", o.level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--no-asy", o.no_asy, "Skip sandwich standard errors");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-class ROC surface estimation under verification bias"};
  app.require_subcommand(1);
  Options o;

  auto* tcf = app.add_subcommand("tcf", "True class fractions at given cut pairs");
  add_data(tcf, o);
  add_inference(tcf, o);
  tcf->add_option("--cut", o.cuts, "Cut pair c1,c2 (repeatable)")->allow_extra_args(false);
  tcf->add_option("--pair", o.pair, "Classes of the confidence ellipse: 1,2  2,3  1,3");

  auto* surface = app.add_subcommand("surface", "TCF surface over a grid of cut pairs");
  add_data(surface, o);
  surface->add_option("--grid", o.grid, "quantile, quantile:K or distinct");
  surface->add_option("--cut", o.cuts, "Explicit grid point c1,c2 (repeatable)")->allow_extra_args(false);
  surface->add_flag("--with-sd", o.with_sd, "Sandwich standard errors at each point");

  auto* curve = app.add_subcommand("curve", "Pairwise ROC curve projected from the surface");
  add_data(curve, o);
  curve->add_option("--pair", o.pair, "1,2  2,3  or 1,3");
  curve->add_option("--at", o.at, "Cut values, comma separated or repeated (default: observed T)")
      ->delimiter(',')
      ->allow_extra_args(false);

  auto* vus = app.add_subcommand("vus", "Volume under the ROC surface");
  add_data(vus, o);
  add_inference(vus, o);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study");
  simulate->add_option("--study", o.study, "s1, s2, s3, s4, vus1, vus2 or vus3");
  simulate->add_option("--lambda", o.lambda, "Covariance setting for s1/s2 (1-3)");
  simulate->add_option("--n", o.n, "Sample size");
  simulate->add_option("--reps", o.reps, "Monte Carlo replicates");
  simulate->add_option("--method", o.method, "fi, msi, ipw, spe or all")
      ->check(CLI::IsMember({"fi", "msi", "ipw", "spe", "all"}, CLI::ignore_case));
  simulate->add_option("--cut", o.cuts, "Cut pair c1,c2 (repeatable; default: the study's)")->allow_extra_args(false);
  simulate->add_option("--boot", o.boot, "Bootstrap replicates per Monte Carlo replicate")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--seed", o.seed, "Master seed");
  simulate->add_flag("--no-asy", o.no_asy, "Skip sandwich standard errors");
  add_output(simulate, o);
  simulate->callback([&] {
    if (simulate->count("--method") == 0) o.method = "all";
  });

  auto* validate = app.add_subcommand("validate", "Dataset checks and working-model diagnostics");
  add_data(validate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*tcf) rocsurf::cli::run_tcf(o);
    if (*surface) rocsurf::cli::run_surface(o);
    if (*curve) rocsurf::cli::run_curve(o);
    if (*vus) rocsurf::cli::run_vus(o);
    if (*simulate) rocsurf::cli::run_simulate(o);
    if (*validate) rocsurf::cli::run_validate(o);
  } catch (const rocsurf::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const rocsurf::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
