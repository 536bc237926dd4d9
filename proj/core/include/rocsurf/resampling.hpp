#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rocsurf/dataset.hpp"
#include "rocsurf/tcf.hpp"
#include "rocsurf/vus.hpp"

namespace rocsurf {

struct BootstrapPlan {
  int replicates = 250;
  std::uint64_t seed = 0;
  unsigned threads = 1;  ///< 0 = hardware concurrency; never changes results
};

struct ReplicateFailure {
  int replicate = 0;
  std::string what;
};

struct BootstrapResult {
  Eigen::VectorXd sd;      ///< per component, over successful replicates
  Eigen::VectorXd lower;   ///< 2.5% percentile
  Eigen::VectorXd upper;   ///< 97.5% percentile
  int replicates = 0;
  int n_failed = 0;
  bool warning = false;    ///< n_failed / replicates > 0.2
  std::vector<ReplicateFailure> failures;
  Eigen::MatrixXd values;  ///< successful replicate values, in replicate order
};

using Statistic = std::function<Eigen::VectorXd(const Dataset&)>;

/// Rows drawn uniformly with replacement; same length as ds.
Dataset resample(const Dataset& ds, std::mt19937_64& rng);

/// Evaluates the statistic on ds first (errors propagate), then on each
/// resample. Replicate b uses stream_rng(seed, b). Failed replicates are
/// counted and excluded; throws AllReplicatesFailed if none succeed.
BootstrapResult bootstrap(const Dataset& ds, const BootstrapPlan& plan, const Statistic& statistic);

/// TCF triples at each cut, stacked (3 per cut), refitting the working models per replicate.
BootstrapResult bootstrap_tcf(Method m, const Dataset& ds, std::span<const CutPair> cuts, const ModelSpec& spec,
                              const BootstrapPlan& plan);

/// VUS, refitting the working models per replicate.
BootstrapResult bootstrap_vus(Method m, const Dataset& ds, const ModelSpec& spec, const BootstrapPlan& plan);

}  // namespace rocsurf
