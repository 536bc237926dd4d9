#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rocsurf/dataset.hpp"
#include "rocsurf/tcf.hpp"

namespace rocsurf {

enum class Study { s1, s2, s3, s4, vus1, vus2, vus3 };

std::string to_string(Study s);  ///< lower case, e.g. "s1", "vus3"
Study parse_study(const std::string& s);
bool is_vus_study(Study s) noexcept;

struct StudyConfig {
  Study study = Study::s1;
  int lambda_index = 1;            ///< S1/S2 only; VUS studies fix their own
  std::size_t n = 250;
  int reps = 500;
  std::uint64_t seed = 1;
  std::vector<CutPair> cuts;       ///< empty: the study's six default pairs
  std::vector<Method> methods{kCorrectedMethods.begin(), kCorrectedMethods.end()};
  bool asymptotic = true;          ///< compute asy.sd per replicate
  int boot = 0;                    ///< bootstrap replicates per Monte Carlo replicate
  unsigned threads = 1;

  /// Throws ContractError on inconsistent fields.
  void validate() const;
};

/// Defaults per study: sample size and replicate counts sized for a desk run.
StudyConfig default_config(Study s, int lambda_index = 1);
std::vector<CutPair> default_cuts(Study s);

/// Dataset for replicate `rep`; depends only on (config, rep).
/// Covariates: a1 = A; S4 adds a2 = |A|^(2/3).
Dataset generate(const StudyConfig& config, std::uint64_t rep);

/// Working models used by the study (correct or misspecified as designed).
ModelSpec working_models(const StudyConfig& config);

/// Population TCFs at a cut (S1-S4).
Eigen::Vector3d true_tcf(const StudyConfig& config, const CutPair& cut);
/// Population VUS (VUS1-VUS3).
double true_vus(const StudyConfig& config);
/// Population 80th percentiles of T and A used by the S2 verification mechanism.
std::pair<double, double> s2_thresholds(int lambda_index);

struct TcfCell {
  CutPair cut;
  Method method = Method::fi;
  int n_ok = 0;
  Eigen::Vector3d mean = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  Eigen::Vector3d mc_sd = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  std::optional<Eigen::Vector3d> asy_sd;   ///< mean over replicates with a finite sandwich
  std::optional<Eigen::Vector3d> boot_sd;  ///< mean over replicates
};

struct VusCell {
  Method method = Method::fi;
  int n_ok = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double mc_sd = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> asy_sd;
  std::optional<double> boot_sd;
};

struct SimFailure {
  int replicate = 0;
  Method method = Method::fi;
  std::string stage;  ///< "fit", "estimate", "asymptotic" or "bootstrap"
  std::string what;
};

struct SimReport {
  StudyConfig config;
  std::vector<CutPair> cuts;
  std::vector<Eigen::Vector3d> truth;  ///< per cut (TCF studies)
  std::optional<double> true_vus;
  std::vector<TcfCell> tcf;            ///< cut-major, then method
  std::vector<VusCell> vus;
  std::vector<SimFailure> failures;
  double verification_rate = 0.0;      ///< mean over replicates

  const TcfCell& cell(const CutPair& cut, Method m) const;
  const VusCell& vus_cell(Method m) const;
};

SimReport run_monte_carlo(const StudyConfig& config);

/// Summary table: one row per (cut, method) plus a True row per cut.
void write_report_csv(std::ostream& out, const SimReport& report);

}  // namespace rocsurf
