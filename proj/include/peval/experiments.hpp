#ifndef PEVAL_EXPERIMENTS_HPP
#define PEVAL_EXPERIMENTS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peval/bounds.hpp"
#include "peval/estimators.hpp"
#include "peval/policy.hpp"
#include "peval/pomdp.hpp"

namespace peval {

/// Derived stream seed: master XOR (0x9E3779B97F4A7C15 * (index+1)), pushed
/// through the splitmix64 finalizer. Bijective in the index for a fixed
/// master, so derived seeds never collide. The exact constant and
/// shift/multiply sequence is pinned by test vectors.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

/// Table-style sampling stage: N histories under the behavior policy with
/// per-trajectory seeds mix_seed(master_seed, i), returns cached.
SampleSet sampling_stage(const Pomdp& model, const Policy& behavior, const ReturnSpec& spec, std::int64_t n,
                         std::uint64_t master_seed, int threads = 0);

/// Estimation stage: answers a value query for an arbitrary target policy
/// from the persisted samples, with no further environment interaction.
Estimate estimation_stage(const SampleSet& samples, const Policy& target, EstimatorKind kind);

struct CoverageConfig {
  std::int64_t n_samples = 200;
  std::int64_t m_replications = 1000;
  double delta = 0.1;
  double v_max = 1.0;
  double eta = 1.0;
  std::uint64_t master_seed = 0;
  EpsilonVariant variant = EpsilonVariant::paper_form;
  std::optional<double> epsilon_override;  // fixed radius instead of the bound
  int threads = 0;
};

struct CoverageResult {
  std::vector<double> deviations;  // |V_hat - V| per replication
  std::int64_t violation_count = 0;
  double empirical_rate = 0.0;
  double epsilon = 0.0;  // radius tested against
  double delta = 0.0;
  double exact_target_value = 0.0;
  // Filled when a finite class is supplied: sup over the class per
  // replication, tested against the uniform-convergence radius.
  std::vector<double> sup_deviations;
  std::int64_t sup_violation_count = 0;
  double sup_empirical_rate = 0.0;
  double sup_epsilon = 0.0;
};

/// M independent replications of N-sample IS estimation; reports how often
/// the deviation bound was violated. `target_class` may be null.
CoverageResult coverage_experiment(const Pomdp& model, const Policy& behavior, const Policy& target,
                                   const PolicyClass* target_class, const ReturnSpec& spec,
                                   const CoverageConfig& config);

struct EstimatorComparisonRow {
  std::string estimator;
  std::int64_t n = 0;
  std::int64_t m = 0;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;       // across replications
  double exact_value = 0.0;
  double exact_is_variance = 0.0;  // Bernstein-input variance of the IS estimator
};

/// Replicated bias/variance of crude (on-policy), IS, WIS and mixture
/// estimators over a schedule of sample sizes. The mixture pools the
/// behavior with a uniform policy at priors (1/2, 1/2).
std::vector<EstimatorComparisonRow> estimator_comparison(const Pomdp& model, const Policy& behavior,
                                                         const Policy& target, const ReturnSpec& spec,
                                                         std::span<const std::int64_t> schedule,
                                                         std::int64_t replications, std::uint64_t master_seed,
                                                         int threads = 0);

struct BoundComparisonGrid {
  std::vector<std::int64_t> horizons;
  std::vector<double> ratios;  // V_max / eps
  double v_max = 1.0;
  double delta = 0.1;
  double entropy_k = 1.0;
  int vc_dim = 1;
  double c_floor = 0.1;
  double covering_count = 4.0;  // constant covering number for the exact column
  double k1 = 2.0;
};

struct BoundComparisonRow {
  std::int64_t horizon = 0;
  double ratio = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  double entropy_k = 0.0;
  int vc_dim = 0;
  double eta = 0.0;
  double n_uniform = 0.0;  // exact-constant Bernstein route
  double n_stated = 0.0;   // stated big-O form, unit constant
  double n_kearns = 0.0;
  double n_mcdiarmid = 0.0;
  double n_parametric = 0.0;
};

std::vector<BoundComparisonRow> bound_comparison(const BoundComparisonGrid& grid);

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

/// Uniform policy over actions (the paper's default sampling policy).
Policy uniform_policy(int num_observations, int num_actions, double floor = 0.0);

}  // namespace peval

#endif
