#ifndef PEVAL_POLICY_HPP
#define PEVAL_POLICY_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "peval/pomdp.hpp"

namespace peval {

enum class PolicyKind { tabular_reactive, finite_window, softmax_parametric };

/// Stochastic observation-conditional action rule with probability floor.
///
/// Conditioning contexts are windows of the last `window` observations,
/// encoded as base-O integers (most recent observation in the lowest
/// digit); steps before the window fills are left-padded with observation
/// 0. Reactive policies are the window=1 case. Softmax policies hold
/// logits and realize the floor by mixing:
///   p = (1 - A*floor) * softmax(params) + floor.
struct Policy {
  PolicyKind kind = PolicyKind::tabular_reactive;
  int num_observations = 0;
  int num_actions = 0;
  int window = 1;
  double floor = 0.0;
  std::vector<std::vector<double>> table;   // tabular kinds: [context][action]
  std::vector<std::vector<double>> params;  // softmax: logits [context][action]
  std::string id;

  int num_contexts() const;
  /// Context code for the step whose observation prefix is `observations`
  /// (the current observation last).
  int context_index(std::span<const int> observations) const;
};

void validate_policy(const Policy& p);

/// Action distribution for a context code. Respects the floor for every kind.
std::vector<double> action_distribution(const Policy& p, int context);

/// Overload resolving the context from an observation prefix.
std::vector<double> action_distribution(const Policy& p, std::span<const int> observations);

/// Per-step probabilities Pr(a(t)|context(t), p) along a history.
std::vector<double> action_probabilities(const Policy& p, const History& h);

/// Sum of log Pr(a(t)|context(t), p); -inf when some action has zero
/// probability (possible only with floor 0).
double log_prob_actions(const Policy& p, const History& h);

/// D-infinity distance: max over (context, action) of |log p - log q|.
/// +inf when exactly one side assigns zero probability somewhere.
double policy_distance(const Policy& p, const Policy& q, std::span<const int> contexts);

struct PolicyClass {
  std::vector<Policy> members;
  double floor = 0.0;
  std::vector<int> context_space;  // context codes the metric ranges over
  std::string id;
};

void validate_policy_class(const PolicyClass& cls);

/// All context codes of a policy's window space.
std::vector<int> all_contexts(int num_observations, int window);

inline constexpr std::size_t kExactCoverLimit = 20;

struct CoveringResult {
  std::size_t count = 0;
  bool exact = true;  // false when the greedy upper bound was used
};

/// Minimal number of closed D-infinity balls of radius eps, centered at
/// members, covering all members. Exact (subset DP) up to kExactCoverLimit
/// members, greedy set-cover upper bound beyond that.
CoveringResult covering_number(const PolicyClass& cls, double eps);

/// log of covering_number(cls, eps).
double metric_entropy(const PolicyClass& cls, double eps);

/// Entropy profile: either tabulated (eps_i, logN_i) pairs with eps_i
/// strictly decreasing, or the parametric form k1 * log(k2*sqrt(T)/eps).
struct EntropyProfile {
  bool parametric = false;
  double k1 = 0.0;
  double k2 = 0.0;
  std::vector<std::pair<double, double>> table;  // (eps, logN), eps strictly decreasing
};

void validate_entropy_profile(const EntropyProfile& profile);

/// max(0, k1*log(k2*sqrt(T)/eps)) for the parametric form; step-function
/// lookup (flat beyond both ends) for tabulated profiles.
double parametric_entropy(const EntropyProfile& profile, std::int64_t horizon, double eps);

/// Minimum action probability over members, contexts and actions.
double class_floor(const PolicyClass& cls);

}  // namespace peval

#endif
