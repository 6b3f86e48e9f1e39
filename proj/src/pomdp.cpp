#include "peval/pomdp.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "peval/errors.hpp"
#include "peval/policy.hpp"

namespace peval {

namespace {

constexpr double kRowSumTolerance = 1e-12;

void check_row(const std::vector<double>& row, std::size_t expected_len, const std::string& what) {
  if (row.size() != expected_len) {
    std::ostringstream os;
    os << what << ": expected " << expected_len << " entries, got " << row.size();
    throw validation_error(os.str());
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] < 0.0 || !std::isfinite(row[i])) {
      std::ostringstream os;
      os << what << ": entry " << i << " is " << row[i];
      throw validation_error(os.str());
    }
    sum += row[i];
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance) {
    std::ostringstream os;
    os << what << ": row sum " << sum;
    throw validation_error(os.str());
  }
}

double unit_draw(std::mt19937_64& rng) {
  // 53-bit mantissa draw in [0,1); identical on every conforming platform.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int categorical(const std::vector<double>& probs, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

void check_dims(const Pomdp& model, const Policy& policy) {
  if (policy.num_observations != model.num_observations || policy.num_actions != model.num_actions) {
    std::ostringstream os;
    os << "policy dimensions (O=" << policy.num_observations << ", A=" << policy.num_actions
       << ") do not match model (O=" << model.num_observations << ", A=" << model.num_actions << ")";
    throw validation_error(os.str());
  }
}

}  // namespace

double return_bound(const ReturnSpec& spec) {
  if (spec.kind == ReturnKind::finite_horizon) return spec.horizon * spec.r_max;
  return spec.r_max / (1.0 - spec.gamma);
}

void validate_return_spec(const ReturnSpec& spec) {
  if (spec.horizon < 1) throw validation_error("return_spec.horizon must be >= 1");
  if (spec.r_max < 0.0 || !std::isfinite(spec.r_max)) throw validation_error("return_spec.r_max must be >= 0");
  if (spec.kind == ReturnKind::discounted && !(spec.gamma > 0.0 && spec.gamma < 1.0))
    throw validation_error("return_spec.gamma must lie in (0,1)");
}

void validate_pomdp(const Pomdp& model) {
  if (model.num_states < 1 || model.num_observations < 1 || model.num_actions < 1)
    throw validation_error("pomdp sizes must be positive");
  if (model.r_max < 0.0 || !std::isfinite(model.r_max)) throw validation_error("pomdp.r_max must be >= 0");
  check_row(model.initial_dist, static_cast<std::size_t>(model.num_states), "initial_dist");
  if (model.transition.size() != static_cast<std::size_t>(model.num_states) * model.num_actions)
    throw validation_error("transition table has wrong number of rows");
  for (int s = 0; s < model.num_states; ++s) {
    for (int a = 0; a < model.num_actions; ++a) {
      std::ostringstream os;
      os << "transition row (s=" << s << ", a=" << a << ")";
      check_row(model.transition_row(s, a), static_cast<std::size_t>(model.num_states), os.str());
    }
  }
  if (model.observation_fn.size() != static_cast<std::size_t>(model.num_states))
    throw validation_error("observation table has wrong number of rows");
  for (int s = 0; s < model.num_states; ++s) {
    std::ostringstream os;
    os << "observation row (s=" << s << ")";
    check_row(model.observation_fn[s], static_cast<std::size_t>(model.num_observations), os.str());
  }
  if (model.reward.size() != static_cast<std::size_t>(model.num_states))
    throw validation_error("reward table has wrong number of rows");
  for (int s = 0; s < model.num_states; ++s) {
    if (model.reward[s].size() != static_cast<std::size_t>(model.num_actions))
      throw validation_error("reward row has wrong length");
    for (int a = 0; a < model.num_actions; ++a) {
      const double r = model.reward[s][a];
      if (!std::isfinite(r) || std::abs(r) > model.r_max) {
        std::ostringstream os;
        os << "reward (s=" << s << ", a=" << a << ") = " << r << " exceeds r_max " << model.r_max;
        throw validation_error(os.str());
      }
    }
  }
}

double compute_return(const History& h, const ReturnSpec& spec) {
  const std::size_t T = static_cast<std::size_t>(spec.horizon);
  if (h.length() < T) throw validation_error("history shorter than the return horizon");
  double value = 0.0;
  if (spec.kind == ReturnKind::finite_horizon) {
    for (std::size_t t = 0; t < T; ++t) value += h.steps[t].reward;
  } else {
    double weight = 1.0;
    for (std::size_t t = 0; t < T; ++t) {
      value += weight * h.steps[t].reward;
      weight *= spec.gamma;
    }
  }
  return value;
}

TruncationResult truncation_horizon(double gamma, double eps, double r_max) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw validation_error("gamma must lie in (0,1)");
  if (!(eps > 0.0)) throw validation_error("eps must be positive");
  if (!(r_max > 0.0)) throw validation_error("r_max must be positive");
  const double big_r = r_max / (1.0 - gamma);
  TruncationResult result;
  result.eps_out_of_range = eps >= big_r;
  if (result.eps_out_of_range) return result;  // horizon 0
  int t = static_cast<int>(std::ceil(std::log(eps / big_r) / std::log(gamma)));
  if (t < 0) t = 0;
  while (t > 0 && std::pow(gamma, t - 1) * big_r <= eps) --t;
  while (std::pow(gamma, t) * big_r > eps) ++t;
  result.horizon = t;
  return result;
}

History simulate_history(const Pomdp& model, const Policy& policy, const ReturnSpec& spec, std::uint64_t seed) {
  check_dims(model, policy);
  std::mt19937_64 rng(seed);
  const int T = spec.horizon;
  History h;
  h.steps.reserve(T);
  h.state_trace.reserve(T);
  h.behavior_probs.reserve(T);
  std::vector<int> obs_prefix;
  obs_prefix.reserve(T);
  int s = categorical(model.initial_dist, unit_draw(rng));
  for (int t = 0; t < T; ++t) {
    const int o = categorical(model.observation_fn[s], unit_draw(rng));
    obs_prefix.push_back(o);
    const std::vector<double> dist = action_distribution(policy, std::span<const int>(obs_prefix));
    const int a = categorical(dist, unit_draw(rng));
    h.steps.push_back({o, a, model.reward[s][a]});
    h.state_trace.push_back(s);
    h.behavior_probs.push_back(dist[a]);
    s = categorical(model.transition_row(s, a), unit_draw(rng));
  }
  return h;
}

void for_each_enumerated(const Pomdp& model, const ReturnSpec& spec, const Policy& policy, std::uint64_t cap,
                         const std::function<void(const EnumeratedHistory&)>& fn) {
  check_dims(model, policy);
  const int T = spec.horizon;
  const double paths = std::pow(static_cast<double>(model.num_states) * model.num_observations * model.num_actions,
                                static_cast<double>(T));
  if (paths > static_cast<double>(cap)) {
    std::ostringstream os;
    os << "enumeration cap exceeded: " << paths << " paths > cap " << cap;
    throw numeric_error(os.str());
  }

  EnumeratedHistory entry;
  entry.history.steps.resize(T);
  entry.history.state_trace.resize(T);
  entry.history.behavior_probs.resize(T);
  std::vector<int> obs_prefix(T);

  // Depth-first over (s_t, o_t, a_t); zero-probability branches are pruned,
  // so deterministic instances enumerate exactly their support.
  std::function<void(int, int, double, double)> visit = [&](int t, int s, double env, double act) {
    if (t == T) {
      entry.env_prob = env;
      entry.action_prob = act;
      fn(entry);
      return;
    }
    for (int o = 0; o < model.num_observations; ++o) {
      const double p_o = model.observation_fn[s][o];
      if (p_o == 0.0) continue;
      obs_prefix[t] = o;
      const std::vector<double> dist =
          action_distribution(policy, std::span<const int>(obs_prefix.data(), static_cast<std::size_t>(t) + 1));
      for (int a = 0; a < model.num_actions; ++a) {
        const double p_a = dist[a];
        if (p_a == 0.0) continue;
        entry.history.steps[t] = {o, a, model.reward[s][a]};
        entry.history.state_trace[t] = s;
        entry.history.behavior_probs[t] = p_a;
        if (t + 1 == T) {
          visit(t + 1, s, env * p_o, act * p_a);
        } else {
          const std::vector<double>& trow = model.transition_row(s, a);
          for (int s2 = 0; s2 < model.num_states; ++s2) {
            const double p_s2 = trow[s2];
            if (p_s2 == 0.0) continue;
            visit(t + 1, s2, env * p_o * p_s2, act * p_a);
          }
        }
      }
    }
  };

  for (int s0 = 0; s0 < model.num_states; ++s0) {
    const double p0 = model.initial_dist[s0];
    if (p0 == 0.0) continue;
    visit(0, s0, p0, 1.0);
  }
}

std::vector<EnumeratedHistory> enumerate_histories(const Pomdp& model, const ReturnSpec& spec, const Policy& policy,
                                                   std::uint64_t cap) {
  std::vector<EnumeratedHistory> out;
  for_each_enumerated(model, spec, policy, cap, [&](const EnumeratedHistory& e) { out.push_back(e); });
  return out;
}

double exact_value(const Pomdp& model, const Policy& policy, const ReturnSpec& spec, std::uint64_t cap) {
  double value = 0.0;
  for_each_enumerated(model, spec, policy, cap, [&](const EnumeratedHistory& e) {
    value += e.env_prob * e.action_prob * compute_return(e.history, spec);
  });
  return value;
}

}  // namespace peval
