#ifndef PEVAL_POMDP_HPP
#define PEVAL_POMDP_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace peval {

struct Policy;

/// Tabular partially observable MDP. Probability tables are dense row
/// vectors; rewards are a deterministic function of (state, action).
struct Pomdp {
  int num_states = 0;
  int num_observations = 0;
  int num_actions = 0;
  std::vector<double> initial_dist;                 // [S]
  std::vector<std::vector<double>> transition;      // [S*A][S], row index s*A+a
  std::vector<std::vector<double>> observation_fn;  // [S][O]
  std::vector<std::vector<double>> reward;          // [S][A]
  double r_max = 0.0;
  std::string id;

  const std::vector<double>& transition_row(int s, int a) const { return transition[static_cast<std::size_t>(s) * num_actions + a]; }
};

struct HistoryStep {
  int observation = 0;
  int action = 0;
  double reward = 0.0;
};

/// One trajectory. `state_trace` and the recorded `behavior_probs` are
/// filled by the simulator; estimators never read the state trace.
struct History {
  std::vector<HistoryStep> steps;
  std::optional<int> terminal_observation;
  std::vector<int> state_trace;        // oracle-only; empty when hidden
  std::vector<double> behavior_probs;  // Pr(a(t)) under the policy that generated h

  std::size_t length() const { return steps.size(); }
};

enum class ReturnKind { finite_horizon, discounted };

struct ReturnSpec {
  ReturnKind kind = ReturnKind::finite_horizon;
  int horizon = 1;      // T
  double gamma = 0.0;   // discounted only
  double r_max = 0.0;
};

/// T*r_max for finite horizon, r_max/(1-gamma) for discounted.
double return_bound(const ReturnSpec& spec);

void validate_return_spec(const ReturnSpec& spec);

/// Checks all Pomdp invariants; throws validation_error naming the first
/// violated row or field.
void validate_pomdp(const Pomdp& model);

/// Sum of the first T rewards; the discounted kind weights step i by gamma^i.
double compute_return(const History& h, const ReturnSpec& spec);

struct TruncationResult {
  int horizon = 0;
  bool eps_out_of_range = false;  // set when eps >= R_max
};

/// Smallest T with gamma^T * R_max <= eps, R_max = r_max/(1-gamma).
TruncationResult truncation_horizon(double gamma, double eps, double r_max);

/// Draws one length-T history. Pure function of its inputs: the engine is
/// seeded from `seed` and consumed in a fixed order (initial state, then
/// per step observation, action, next state). Records the state trace and
/// the per-step action probabilities of `policy`.
History simulate_history(const Pomdp& model, const Policy& policy, const ReturnSpec& spec, std::uint64_t seed);

struct EnumeratedHistory {
  History history;     // includes state_trace and behavior_probs of the enumerating policy
  double env_prob;     // Pr(s(1)) * prod B(o|s) * prod T(s'|s,a)
  double action_prob;  // prod Pr(a|context, policy)
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// Exhaustive enumeration of all (state, observation, action) paths of
/// length T, in lexicographic order. env_prob * action_prob summed over the
/// list is 1 up to rounding.
std::vector<EnumeratedHistory> enumerate_histories(const Pomdp& model, const ReturnSpec& spec, const Policy& policy,
                                                   std::uint64_t cap = kDefaultEnumerationCap);

/// Streaming form of enumerate_histories; the callback's argument is only
/// valid during the call.
void for_each_enumerated(const Pomdp& model, const ReturnSpec& spec, const Policy& policy, std::uint64_t cap,
                         const std::function<void(const EnumeratedHistory&)>& fn);

/// V(policy) = sum over enumerated paths of Pr(h|policy) * R(h).
double exact_value(const Pomdp& model, const Policy& policy, const ReturnSpec& spec,
                   std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace peval

#endif
