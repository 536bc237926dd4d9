#include "rocsurf/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "rocsurf/parallel.hpp"

namespace rocsurf {

Dataset resample(const Dataset& ds, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  std::vector<Subject> rows;
  rows.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) rows.push_back(ds[pick(rng)]);
  return Dataset(std::move(rows));
}

BootstrapResult bootstrap(const Dataset& ds, const BootstrapPlan& plan, const Statistic& statistic) {
  if (plan.replicates < 2) throw ContractError("bootstrap needs at least 2 replicates");
  const Eigen::VectorXd original = statistic(ds);
  const Eigen::Index dim = original.size();

  struct Slot {
    std::optional<Eigen::VectorXd> value;
    std::string error;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(plan.replicates));
  parallel_for(slots.size(), plan.threads, [&](std::size_t b) {
    auto rng = stream_rng(plan.seed, b);
    try {
      Eigen::VectorXd v = statistic(resample(ds, rng));
      if (v.size() != dim) throw ContractError("statistic changed dimension");
      if (!v.allFinite()) throw DegenerateDenominator("statistic is not finite on the resample");
      slots[b].value = std::move(v);
    } catch (const InputError& e) {
      slots[b].error = e.what();
    } catch (const NumericalError& e) {
      slots[b].error = e.what();
    }
  });

  BootstrapResult out;
  out.replicates = plan.replicates;
  std::vector<Eigen::VectorXd> ok;
  for (std::size_t b = 0; b < slots.size(); ++b) {
    if (slots[b].value) {
      ok.push_back(*slots[b].value);
    } else {
      out.failures.push_back({static_cast<int>(b), slots[b].error});
    }
  }
  out.n_failed = static_cast<int>(out.failures.size());
  out.warning = static_cast<double>(out.n_failed) > 0.2 * plan.replicates;
  if (ok.empty()) {
    throw AllReplicatesFailed("all " + std::to_string(plan.replicates) + " bootstrap replicates failed; first: " +
                              out.failures.front().what);
  }
  const auto m = static_cast<Eigen::Index>(ok.size());
  out.values.resize(m, dim);
  for (Eigen::Index r = 0; r < m; ++r) out.values.row(r) = ok[static_cast<std::size_t>(r)].transpose();

  out.sd.resize(dim);
  out.lower.resize(dim);
  out.upper.resize(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const Eigen::VectorXd col = out.values.col(j);
    if (m < 2) {
      out.sd[j] = std::numeric_limits<double>::quiet_NaN();
    } else {
      const double mean = col.mean();
      out.sd[j] = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(m - 1));
    }
    std::vector<double> sorted(col.data(), col.data() + m);
    std::sort(sorted.begin(), sorted.end());
    out.lower[j] = empirical_quantile(sorted, 0.025);
    out.upper[j] = empirical_quantile(sorted, 0.975);
  }
  return out;
}

BootstrapResult bootstrap_tcf(Method m, const Dataset& ds, std::span<const CutPair> cuts, const ModelSpec& spec,
                              const BootstrapPlan& plan) {
  if (cuts.empty()) throw ContractError("bootstrap_tcf needs at least one cut");
  const std::vector<CutPair> cut_list(cuts.begin(), cuts.end());
  return bootstrap(ds, plan, [m, cut_list, spec](const Dataset& d) {
    const NuisanceFits fits = fit_nuisance(d, m, spec);
    Eigen::VectorXd v(static_cast<Eigen::Index>(3 * cut_list.size()));
    for (std::size_t c = 0; c < cut_list.size(); ++c) {
      v.segment(static_cast<Eigen::Index>(3 * c), 3) = estimate_tcf(m, d, cut_list[c], fits).tcf;
    }
    return v;
  });
}

BootstrapResult bootstrap_vus(Method m, const Dataset& ds, const ModelSpec& spec, const BootstrapPlan& plan) {
  return bootstrap(ds, plan, [m, spec](const Dataset& d) {
    const NuisanceFits fits = fit_nuisance(d, m, spec);
    Eigen::VectorXd v(1);
    v[0] = vus_point(m, d, fits).mu;
    return v;
  });
}

}  // namespace rocsurf
