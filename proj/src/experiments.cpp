#include "peval/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "peval/errors.hpp"
#include "peval/kernels.hpp"

namespace peval {

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

namespace {

int resolve_threads(int threads, std::int64_t total) {
  if (threads <= 0) threads = static_cast<int>(std::min(8u, std::max(1u, std::thread::hardware_concurrency())));
  return static_cast<int>(std::min<std::int64_t>(threads, std::max<std::int64_t>(1, total)));
}

// Index-parallel loop with deterministic output: the body writes slot i only.
template <class Fn>
void parallel_for(std::int64_t total, int threads, Fn&& fn) {
  threads = resolve_threads(threads, total);
  if (threads <= 1 || total < 2) {
    for (std::int64_t i = 0; i < total; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::int64_t chunk = (total + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min(total, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace

SampleSet sampling_stage(const Pomdp& model, const Policy& behavior, const ReturnSpec& spec, std::int64_t n,
                         std::uint64_t master_seed, int threads) {
  if (n < 1) throw validation_error("sampling_stage: n must be >= 1");
  SampleSet samples;
  samples.behavior_policy_id = behavior.id.empty() ? "behavior" : behavior.id;
  samples.spec = spec;
  samples.master_seed = master_seed;
  samples.histories.resize(static_cast<std::size_t>(n));
  samples.returns.resize(static_cast<std::size_t>(n));
  samples.trajectory_seeds.resize(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](std::int64_t i) {
    const std::uint64_t seed = mix_seed(master_seed, static_cast<std::uint64_t>(i));
    samples.trajectory_seeds[i] = seed;
    samples.histories[i] = simulate_history(model, behavior, spec, seed);
    samples.returns[i] = compute_return(samples.histories[i], spec);
  });
  return samples;
}

Estimate estimation_stage(const SampleSet& samples, const Policy& target, EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::crude: return crude_estimate(samples.returns);
    case EstimatorKind::is: return is_estimate(samples, target);
    case EstimatorKind::wis: return wis_estimate(samples, target);
    case EstimatorKind::mixture: throw validation_error("mixture estimation needs several sample sets");
  }
  throw validation_error("unknown estimator kind");
}

CoverageResult coverage_experiment(const Pomdp& model, const Policy& behavior, const Policy& target,
                                   const PolicyClass* target_class, const ReturnSpec& spec,
                                   const CoverageConfig& config) {
  if (config.n_samples < 1 || config.m_replications < 1)
    throw validation_error("coverage_experiment: N and M must be >= 1");
  if (!(config.delta > 0.0 && config.delta < 1.0)) throw validation_error("coverage_experiment: delta must lie in (0,1)");

  CoverageResult result;
  result.delta = config.delta;
  result.exact_target_value = exact_value(model, target, spec);

  BoundInputs inputs;
  inputs.v_max = config.v_max;
  inputs.eta = config.eta;
  inputs.delta = config.delta;
  inputs.horizon = spec.horizon;
  result.epsilon = config.epsilon_override ? *config.epsilon_override
                                           : single_policy_epsilon(inputs, config.n_samples, config.variant);

  std::vector<double> member_values;
  if (target_class != nullptr) {
    validate_policy_class(*target_class);
    member_values.reserve(target_class->members.size());
    for (const Policy& member : target_class->members) member_values.push_back(exact_value(model, member, spec));
    auto covering = [target_class](double eps) {
      return static_cast<double>(covering_number(*target_class, eps).count);
    };
    result.sup_epsilon = uniform_epsilon(inputs, config.n_samples, covering);
    result.sup_deviations.resize(static_cast<std::size_t>(config.m_replications));
  }

  result.deviations.resize(static_cast<std::size_t>(config.m_replications));
  parallel_for(config.m_replications, config.threads, [&](std::int64_t rep) {
    const std::uint64_t rep_seed = mix_seed(config.master_seed, static_cast<std::uint64_t>(rep));
    const SampleSet samples = sampling_stage(model, behavior, spec, config.n_samples, rep_seed, 1);
    result.deviations[rep] = std::abs(is_estimate(samples, target).value - result.exact_target_value);
    if (target_class != nullptr) {
      double sup = 0.0;
      for (std::size_t k = 0; k < target_class->members.size(); ++k) {
        const double dev = std::abs(is_estimate(samples, target_class->members[k]).value - member_values[k]);
        sup = std::max(sup, dev);
      }
      result.sup_deviations[rep] = sup;
    }
  });

  for (double dev : result.deviations)
    if (dev > result.epsilon) ++result.violation_count;
  result.empirical_rate = static_cast<double>(result.violation_count) / static_cast<double>(config.m_replications);
  if (target_class != nullptr) {
    for (double dev : result.sup_deviations)
      if (dev > result.sup_epsilon) ++result.sup_violation_count;
    result.sup_empirical_rate =
        static_cast<double>(result.sup_violation_count) / static_cast<double>(config.m_replications);
  }
  return result;
}

namespace {

struct ReplicationMoments {
  double mean = 0.0;
  double variance = 0.0;  // across replications, N-1 denominator
};

ReplicationMoments moments(std::span<const double> values) {
  ReplicationMoments m;
  const double n = static_cast<double>(values.size());
  m.mean = kernels::sum(values) / n;
  if (values.size() > 1) {
    std::vector<double> resid(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) resid[i] = values[i] - m.mean;
    m.variance = kernels::sum_squares(resid) / (n - 1.0);
  }
  return m;
}

}  // namespace

std::vector<EstimatorComparisonRow> estimator_comparison(const Pomdp& model, const Policy& behavior,
                                                         const Policy& target, const ReturnSpec& spec,
                                                         std::span<const std::int64_t> schedule,
                                                         std::int64_t replications, std::uint64_t master_seed,
                                                         int threads) {
  if (schedule.empty()) throw validation_error("estimator_comparison: empty sample-size schedule");
  if (replications < 2) throw validation_error("estimator_comparison: need at least 2 replications");
  const double exact = exact_value(model, target, spec);
  const Policy uniform = uniform_policy(model.num_observations, model.num_actions);
  const std::vector<Policy> mixture_behaviors = {behavior, uniform};
  const std::vector<double> priors = {0.5, 0.5};

  std::vector<EstimatorComparisonRow> rows;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const std::int64_t n = schedule[k];
    if (n < 2) throw validation_error("estimator_comparison: sample sizes must be >= 2");
    std::vector<double> v_crude(replications), v_is(replications), v_wis(replications), v_mix(replications);
    parallel_for(replications, threads, [&](std::int64_t rep) {
      const std::uint64_t base = mix_seed(master_seed, k * static_cast<std::uint64_t>(replications) + rep);
      // Distinct streams per estimator family within the replication.
      const SampleSet on_policy = sampling_stage(model, target, spec, n, mix_seed(base, 1), 1);
      v_crude[rep] = crude_estimate(on_policy.returns).value;
      const SampleSet off_policy = sampling_stage(model, behavior, spec, n, mix_seed(base, 2), 1);
      v_is[rep] = is_estimate(off_policy, target).value;
      v_wis[rep] = wis_estimate(off_policy, target).value;
      const std::int64_t half = n / 2;
      const std::vector<SampleSet> sets = {
          sampling_stage(model, behavior, spec, half, mix_seed(base, 3), 1),
          sampling_stage(model, uniform, spec, n - half, mix_seed(base, 4), 1)};
      v_mix[rep] = mixture_is_estimate(sets, mixture_behaviors, priors, target).value;
    });
    const double exact_is_var = is_variance_exact(model, target, behavior, spec, n);
    auto emit = [&](const std::string& name, std::span<const double> values) {
      const ReplicationMoments m = moments(values);
      rows.push_back({name, n, replications, m.mean, m.mean - exact, m.variance, exact, exact_is_var});
    };
    emit("crude", v_crude);
    emit("is", v_is);
    emit("wis", v_wis);
    emit("mixture", v_mix);
  }
  return rows;
}

std::vector<BoundComparisonRow> bound_comparison(const BoundComparisonGrid& grid) {
  if (grid.horizons.empty() || grid.ratios.empty()) throw validation_error("bound_comparison: empty grid");
  std::vector<BoundComparisonRow> rows;
  for (std::int64_t horizon : grid.horizons) {
    for (double ratio : grid.ratios) {
      BoundComparisonRow row;
      row.horizon = horizon;
      row.ratio = ratio;
      row.eps = grid.v_max / ratio;
      row.delta = grid.delta;
      row.entropy_k = grid.entropy_k;
      row.vc_dim = grid.vc_dim;
      row.eta = eta_bound(horizon, grid.c_floor, 2);
      BoundInputs inputs;
      inputs.v_max = grid.v_max;
      inputs.eta = row.eta;
      inputs.delta = grid.delta;
      inputs.horizon = horizon;
      inputs.entropy_k = grid.entropy_k;
      inputs.c_floor = grid.c_floor;
      const double covering = grid.covering_count;
      row.n_uniform = static_cast<double>(
          uniform_sample_size(inputs, row.eps, [covering](double) { return covering; }));
      row.n_stated = theorem_sample_size_stated(inputs, row.eps);
      row.n_kearns = kearns_sample_size(ratio, horizon, grid.vc_dim, grid.delta);
      row.n_mcdiarmid = mcdiarmid_sample_size(inputs, row.eps);
      row.n_parametric = parametric_sample_size(grid.v_max, row.eps, grid.k1, grid.entropy_k, grid.delta, horizon);
      rows.push_back(row);
    }
  }
  return rows;
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw validation_error("fit_loglog_slope: need two aligned points");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Policy uniform_policy(int num_observations, int num_actions, double floor) {
  Policy p;
  p.kind = PolicyKind::tabular_reactive;
  p.num_observations = num_observations;
  p.num_actions = num_actions;
  p.window = 1;
  p.floor = floor;
  p.table.assign(static_cast<std::size_t>(num_observations),
                 std::vector<double>(static_cast<std::size_t>(num_actions), 1.0 / num_actions));
  p.id = "uniform";
  return p;
}

}  // namespace peval
