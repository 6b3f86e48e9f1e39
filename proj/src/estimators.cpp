#include "peval/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "peval/errors.hpp"
#include "peval/kernels.hpp"

namespace peval {

namespace {

struct WeightStats {
  double min = 1.0, max = 1.0, mean = 1.0;
};

WeightStats weight_stats(std::span<const double> w) {
  WeightStats s;
  if (w.empty()) return s;
  s.min = *std::min_element(w.begin(), w.end());
  s.max = *std::max_element(w.begin(), w.end());
  s.mean = kernels::sum(w) / static_cast<double>(w.size());
  return s;
}

// Mean and s/sqrt(N) of the terms; two-pass so the reduction stays in the
// deterministic kernels.
Estimate mean_estimate(std::span<const double> terms, EstimatorKind kind) {
  Estimate e;
  e.kind = kind;
  e.n_samples = static_cast<std::int64_t>(terms.size());
  const double n = static_cast<double>(terms.size());
  e.value = kernels::sum(terms) / n;
  if (terms.size() > 1) {
    std::vector<double> resid(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) resid[i] = terms[i] - e.value;
    const double var = kernels::sum_squares(resid) / (n - 1.0);
    e.std_error = std::sqrt(var / n);
  }
  return e;
}

std::vector<double> ratio_weights(const SampleSet& samples, const Policy& target) {
  std::vector<double> w(samples.histories.size());
  for (std::size_t i = 0; i < samples.histories.size(); ++i) w[i] = likelihood_ratio(target, samples.histories[i]);
  return w;
}

}  // namespace

void validate_sample_set(const SampleSet& samples, double floor) {
  if (samples.returns.size() != samples.histories.size())
    throw validation_error("sample set: cached returns do not match histories");
  for (std::size_t i = 0; i < samples.histories.size(); ++i) {
    const History& h = samples.histories[i];
    if (h.behavior_probs.size() != h.length())
      throw validation_error("sample set: history is missing recorded behavior probabilities");
    for (double p : h.behavior_probs)
      if (!(p >= floor - 1e-12) || p > 1.0 + 1e-12)
        throw validation_error("sample set: recorded behavior probability below the class floor");
    if (std::abs(compute_return(h, samples.spec) - samples.returns[i]) > 1e-12)
      throw validation_error("sample set: cached return disagrees with compute_return");
  }
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::crude: return "crude";
    case EstimatorKind::is: return "is";
    case EstimatorKind::wis: return "wis";
    case EstimatorKind::mixture: return "mixture";
  }
  return "unknown";
}

Estimate crude_estimate(std::span<const double> returns) {
  if (returns.empty()) throw validation_error("crude_estimate: empty sample list");
  return mean_estimate(returns, EstimatorKind::crude);
}

double likelihood_ratio(const Policy& target, const History& h) {
  if (h.behavior_probs.size() != h.length())
    throw validation_error("likelihood_ratio: history has no recorded behavior probabilities");
  const std::vector<double> target_probs = action_probabilities(target, h);
  // Per-step log differences: identical probabilities cancel exactly, so
  // the on-policy ratio is 1.0 bit for bit.
  double log_w = 0.0;
  for (std::size_t t = 0; t < target_probs.size(); ++t) {
    const double q = h.behavior_probs[t];
    if (!(q > 0.0)) throw validation_error("likelihood_ratio: zero recorded behavior probability");
    log_w += std::log(target_probs[t]) - std::log(q);
  }
  return std::exp(log_w);  // exp(-inf) = 0 when the target excludes an action
}

void record_behavior_probs(History& h, const Policy& behavior) {
  h.behavior_probs = action_probabilities(behavior, h);
}

Estimate is_estimate(const SampleSet& samples, const Policy& target) {
  if (samples.histories.empty()) throw validation_error("is_estimate: empty sample set");
  const std::vector<double> w = ratio_weights(samples, target);
  std::vector<double> terms(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) terms[i] = samples.returns[i] * w[i];
  Estimate e = mean_estimate(terms, EstimatorKind::is);
  const WeightStats stats = weight_stats(w);
  e.weight_min = stats.min;
  e.weight_max = stats.max;
  e.weight_mean = stats.mean;
  return e;
}

double is_variance_exact(const Pomdp& model, const Policy& target, const Policy& behavior, const ReturnSpec& spec,
                         std::int64_t n, std::uint64_t cap) {
  if (n < 1) throw validation_error("is_variance_exact: n must be >= 1");
  double value = 0.0;
  double second_moment = 0.0;  // E_target[R^2 w]
  for_each_enumerated(model, spec, behavior, cap, [&](const EnumeratedHistory& e) {
    const double r = compute_return(e.history, spec);
    const double w = likelihood_ratio(target, e.history);
    const double p_target = e.env_prob * e.action_prob * w;  // Pr(h|target)
    value += p_target * r;
    second_moment += p_target * r * r * w;
  });
  return (second_moment - value * value) / static_cast<double>(n);
}

Estimate wis_estimate(const SampleSet& samples, const Policy& target) {
  if (samples.histories.empty()) throw validation_error("wis_estimate: empty sample set");
  const std::vector<double> w = ratio_weights(samples, target);
  const double w_total = kernels::sum(w);
  if (!(w_total > 0.0)) throw validation_error("wis_estimate: all weights are zero");
  std::vector<double> weighted(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) weighted[i] = w[i] * samples.returns[i];
  Estimate e;
  e.kind = EstimatorKind::wis;
  e.n_samples = static_cast<std::int64_t>(w.size());
  e.value = kernels::sum(weighted) / w_total;
  // Linearized (ratio-estimator) standard error with normalized weights.
  if (w.size() > 1) {
    std::vector<double> resid(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) resid[i] = (w[i] / w_total) * (samples.returns[i] - e.value);
    e.std_error = std::sqrt(kernels::sum_squares(resid));
  }
  const WeightStats stats = weight_stats(w);
  e.weight_min = stats.min;
  e.weight_max = stats.max;
  e.weight_mean = stats.mean;
  return e;
}

Estimate mixture_is_estimate(std::span<const SampleSet> sets, std::span<const Policy> behaviors,
                             std::span<const double> priors, const Policy& target) {
  if (sets.empty() || sets.size() != behaviors.size() || sets.size() != priors.size())
    throw validation_error("mixture_is_estimate: sets, behaviors and priors must align and be nonempty");
  double prior_sum = 0.0;
  for (double p : priors) {
    if (!(p > 0.0)) throw validation_error("mixture_is_estimate: priors must be positive");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-12) throw validation_error("mixture_is_estimate: priors must sum to 1");

  std::vector<double> terms;
  std::vector<double> weights;
  for (const SampleSet& set : sets) {
    for (std::size_t i = 0; i < set.histories.size(); ++i) {
      const History& h = set.histories[i];
      const double target_prob = std::exp(log_prob_actions(target, h));
      double denom = 0.0;
      for (std::size_t j = 0; j < behaviors.size(); ++j)
        denom += priors[j] * std::exp(log_prob_actions(behaviors[j], h));
      if (!(denom > 0.0)) throw validation_error("mixture_is_estimate: history outside the mixture support");
      const double w = target_prob / denom;
      weights.push_back(w);
      terms.push_back(set.returns[i] * w);
    }
  }
  if (terms.empty()) throw validation_error("mixture_is_estimate: no samples");
  Estimate e = mean_estimate(terms, EstimatorKind::mixture);
  const WeightStats stats = weight_stats(weights);
  e.weight_min = stats.min;
  e.weight_max = stats.max;
  e.weight_mean = stats.mean;
  return e;
}

double eta_bound(std::int64_t horizon, double c_floor, int num_actions) {
  if (num_actions < 1) throw validation_error("eta_bound: num_actions must be positive");
  if (!(c_floor >= 0.0) || c_floor > 1.0 / num_actions + 1e-12)
    throw validation_error("eta_bound: floor must lie in [0, 1/num_actions]");
  if (horizon < 0) throw validation_error("eta_bound: horizon must be nonnegative");
  const double per_step = num_actions * (1.0 - (num_actions - 1) * c_floor);
  return std::pow(per_step, static_cast<double>(horizon));
}

OptimalSamplingResult optimal_sampling_check(const Pomdp& model, const Policy& target, const ReturnSpec& spec,
                                             std::uint64_t cap) {
  std::vector<double> numerators;  // R(h) Pr(h|target)
  double value = 0.0;
  for_each_enumerated(model, spec, target, cap, [&](const EnumeratedHistory& e) {
    const double r = compute_return(e.history, spec);
    if (r < 0.0) throw validation_error("optimal_sampling_check: returns must be nonnegative");
    const double p = e.env_prob * e.action_prob;
    numerators.push_back(r * p);
    value += r * p;
  });
  if (!(value > 0.0)) throw validation_error("optimal_sampling_check: value must be positive (all returns zero?)");
  OptimalSamplingResult result;
  result.probabilities.resize(numerators.size());
  for (std::size_t i = 0; i < numerators.size(); ++i) result.probabilities[i] = numerators[i] / value;
  // Under Pr*, every sampled term R(h) Pr(h|target) / Pr*(h) equals V, so
  // the second moment is V^2 exactly; compute it the long way anyway.
  double second_moment = 0.0;
  for (std::size_t i = 0; i < numerators.size(); ++i) {
    const double p_star = result.probabilities[i];
    if (p_star == 0.0) continue;  // zero-return histories are never sampled
    const double term = numerators[i] / p_star;
    second_moment += p_star * term * term;
  }
  result.variance = second_moment - value * value;
  return result;
}

}  // namespace peval
