#ifndef PEVAL_ESTIMATORS_HPP
#define PEVAL_ESTIMATORS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "peval/policy.hpp"
#include "peval/pomdp.hpp"

namespace peval {

/// Histories gathered under one behavior policy, self-contained for the
/// estimation stage: per-step behavior action probabilities travel with
/// each history, so the behavior policy never has to be re-queried.
struct SampleSet {
  std::vector<History> histories;
  std::string behavior_policy_id;
  std::vector<double> returns;  // cached R(h_i)
  ReturnSpec spec;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> trajectory_seeds;
};

/// Checks the cached returns against compute_return and, when a floor is
/// given, that every recorded behavior probability respects it.
void validate_sample_set(const SampleSet& samples, double floor = 0.0);

enum class EstimatorKind { crude, is, wis, mixture };

std::string estimator_name(EstimatorKind kind);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t n_samples = 0;
  double weight_min = 1.0;
  double weight_max = 1.0;
  double weight_mean = 1.0;
  EstimatorKind kind = EstimatorKind::crude;
};

/// On-policy sample mean with std error s/sqrt(N) (N-1 denominator).
Estimate crude_estimate(std::span<const double> returns);

/// w(h) = prod_t Pr(a(t)|target) / recorded behavior prob, evaluated in log
/// space. Zero target probability gives 0; a zero recorded behavior
/// probability is a data error.
double likelihood_ratio(const Policy& target, const History& h);

/// Fills h.behavior_probs from the given policy (used when histories come
/// from enumeration rather than simulation).
void record_behavior_probs(History& h, const Policy& behavior);

/// Importance sampling estimator: mean of R(h_i) * w(h_i).
Estimate is_estimate(const SampleSet& samples, const Policy& target);

/// Exact variance of the N-sample IS estimator by full enumeration:
/// (E_target[R^2 w] - V^2) / N.
double is_variance_exact(const Pomdp& model, const Policy& target, const Policy& behavior, const ReturnSpec& spec,
                         std::int64_t n, std::uint64_t cap = kDefaultEnumerationCap);

/// Self-normalized (weighted) importance sampling: sum w R / sum w.
/// Biased but consistent; the value always lies in [min R, max R].
Estimate wis_estimate(const SampleSet& samples, const Policy& target);

/// Pooled estimator over sample sets from several behaviors with prior
/// weights, using the mixture denominator sum_j prior_j Pr(h_a|behavior_j).
/// Unbiased when the sets' sizes are proportional to the priors and the
/// target's support is covered by the mixture.
Estimate mixture_is_estimate(std::span<const SampleSet> sets, std::span<const Policy> behaviors,
                             std::span<const double> priors, const Policy& target);

/// Uniform upper bound on the likelihood ratio against the uniform behavior
/// policy: (A * (1 - (A-1)*floor))^T; equals 2^T (1-floor)^T for two actions.
double eta_bound(std::int64_t horizon, double c_floor, int num_actions);

struct OptimalSamplingResult {
  std::vector<double> probabilities;  // aligned with enumerate_histories order
  double variance = 0.0;              // exact estimator variance under it
};

/// Zero-variance sampling distribution Pr*(h) = R(h) Pr(h|target) / V(target).
/// Oracle-only: requires the full model and nonnegative returns with
/// positive value.
OptimalSamplingResult optimal_sampling_check(const Pomdp& model, const Policy& target, const ReturnSpec& spec,
                                             std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace peval

#endif
