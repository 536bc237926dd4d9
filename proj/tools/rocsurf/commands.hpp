#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rocsurf::cli {

struct Options {
  std::string input;
  std::string method = "spe";
  std::string link = "logit";
  std::vector<std::string> cuts;
  std::string grid = "quantile";
  int boot = 0;
  std::uint64_t seed = 1;
  std::string out;
  std::string format;  // empty: csv when --out ends in .csv, json otherwise
  std::optional<unsigned> threads;
  double level = 0.95;
  std::string pair = "1,2";
  std::vector<double> at;
  bool with_sd = false;
  bool no_asy = false;

  std::vector<std::string> covariates;  // CSV covariate columns; empty = a1, a2, ...
  std::string rho_covariates = "all";
  std::string pi_covariates = "all";

  // simulate
  std::string study = "s1";
  int lambda = 1;
  std::optional<std::size_t> n;
  std::optional<int> reps;
};

void run_tcf(const Options& o);
void run_surface(const Options& o);
void run_curve(const Options& o);
void run_vus(const Options& o);
void run_simulate(const Options& o);
void run_validate(const Options& o);

}  // namespace rocsurf::cli
