#include "peval/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "peval/errors.hpp"

namespace peval {

namespace {

constexpr double kRowTolerance = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

int checked_num_contexts(int num_observations, int window) {
  double n = 1.0;
  for (int i = 0; i < window; ++i) n *= num_observations;
  if (n > 1e6) throw validation_error("context space too large (> 1e6 windows)");
  return static_cast<int>(n);
}

}  // namespace

int Policy::num_contexts() const { return checked_num_contexts(num_observations, window); }

int Policy::context_index(std::span<const int> observations) const {
  // Last `window` observations, most recent in the lowest digit; the steps
  // before the window fills are padded with observation 0.
  int code = 0;
  int mult = 1;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(observations.size());
  for (int i = 0; i < window; ++i) {
    const std::ptrdiff_t idx = n - 1 - i;
    const int o = idx >= 0 ? observations[idx] : 0;
    if (o < 0 || o >= num_observations) throw validation_error("observation index out of range");
    code += o * mult;
    mult *= num_observations;
  }
  return code;
}

void validate_policy(const Policy& p) {
  if (p.num_observations < 1 || p.num_actions < 1) throw validation_error("policy dimensions must be positive");
  if (p.window < 1) throw validation_error("policy window must be >= 1");
  if (!(p.floor >= 0.0) || p.floor > 1.0 / p.num_actions + kRowTolerance)
    throw validation_error("policy floor must lie in [0, 1/num_actions]");
  const std::size_t contexts = static_cast<std::size_t>(p.num_contexts());
  if (p.kind == PolicyKind::softmax_parametric) {
    if (p.params.size() != contexts) throw validation_error("softmax params have wrong number of rows");
    for (std::size_t c = 0; c < contexts; ++c) {
      if (p.params[c].size() != static_cast<std::size_t>(p.num_actions))
        throw validation_error("softmax params row has wrong length");
      for (double v : p.params[c])
        if (!std::isfinite(v)) throw validation_error("softmax params must be finite");
    }
    return;
  }
  if (p.table.size() != contexts) throw validation_error("policy table has wrong number of rows");
  for (std::size_t c = 0; c < contexts; ++c) {
    const auto& row = p.table[c];
    if (row.size() != static_cast<std::size_t>(p.num_actions))
      throw validation_error("policy table row has wrong length");
    double sum = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a) {
      if (!(row[a] >= p.floor - kRowTolerance)) {
        std::ostringstream os;
        os << "policy row (context=" << c << "): entry " << a << " = " << row[a] << " below floor " << p.floor;
        throw validation_error(os.str());
      }
      sum += row[a];
    }
    if (std::abs(sum - 1.0) > kRowTolerance) {
      std::ostringstream os;
      os << "policy row (context=" << c << "): row sum " << sum;
      throw validation_error(os.str());
    }
  }
}

std::vector<double> action_distribution(const Policy& p, int context) {
  if (context < 0 || context >= p.num_contexts()) throw validation_error("context index out of range");
  if (p.kind != PolicyKind::softmax_parametric) return p.table[context];
  const auto& theta = p.params[context];
  const double top = *std::max_element(theta.begin(), theta.end());
  std::vector<double> dist(theta.size());
  double z = 0.0;
  for (std::size_t a = 0; a < theta.size(); ++a) {
    dist[a] = std::exp(theta[a] - top);
    z += dist[a];
  }
  const double scale = (1.0 - p.num_actions * p.floor) / z;
  for (double& v : dist) v = v * scale + p.floor;
  return dist;
}

std::vector<double> action_distribution(const Policy& p, std::span<const int> observations) {
  return action_distribution(p, p.context_index(observations));
}

std::vector<double> action_probabilities(const Policy& p, const History& h) {
  std::vector<int> obs_prefix;
  obs_prefix.reserve(h.length());
  std::vector<double> probs;
  probs.reserve(h.length());
  for (const HistoryStep& step : h.steps) {
    obs_prefix.push_back(step.observation);
    const std::vector<double> dist = action_distribution(p, std::span<const int>(obs_prefix));
    if (step.action < 0 || step.action >= p.num_actions) throw validation_error("action index out of range");
    probs.push_back(dist[step.action]);
  }
  return probs;
}

double log_prob_actions(const Policy& p, const History& h) {
  if (h.length() == 0) throw validation_error("log_prob_actions: empty history");
  double total = 0.0;
  for (double prob : action_probabilities(p, h)) total += std::log(prob);  // log(0) = -inf, never a crash
  return total;
}

double policy_distance(const Policy& p, const Policy& q, std::span<const int> contexts) {
  if (p.num_observations != q.num_observations || p.num_actions != q.num_actions || p.window != q.window)
    throw validation_error("policy_distance: dimension mismatch");
  double worst = 0.0;
  for (int c : contexts) {
    const std::vector<double> dp = action_distribution(p, c);
    const std::vector<double> dq = action_distribution(q, c);
    for (int a = 0; a < p.num_actions; ++a) {
      if (dp[a] == 0.0 && dq[a] == 0.0) continue;  // agree on a null action
      if (dp[a] == 0.0 || dq[a] == 0.0) return kInf;
      worst = std::max(worst, std::abs(std::log(dp[a]) - std::log(dq[a])));
    }
  }
  return worst;
}

void validate_policy_class(const PolicyClass& cls) {
  if (cls.members.empty()) throw validation_error("policy class is empty");
  if (cls.context_space.empty()) throw validation_error("policy class context space is empty");
  const Policy& first = cls.members.front();
  for (const Policy& p : cls.members) {
    validate_policy(p);
    if (p.num_observations != first.num_observations || p.num_actions != first.num_actions ||
        p.window != first.window)
      throw validation_error("policy class members disagree on dimensions");
    if (std::abs(p.floor - cls.floor) > kRowTolerance)
      throw validation_error("policy class members disagree on the floor");
  }
  const int n_ctx = first.num_contexts();
  for (int c : cls.context_space)
    if (c < 0 || c >= n_ctx) throw validation_error("context code out of range");
}

std::vector<int> all_contexts(int num_observations, int window) {
  const int n = checked_num_contexts(num_observations, window);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

namespace {

std::vector<std::vector<double>> distance_matrix(const PolicyClass& cls) {
  const std::size_t m = cls.members.size();
  std::vector<std::vector<double>> d(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      d[i][j] = d[j][i] = policy_distance(cls.members[i], cls.members[j], cls.context_space);
  return d;
}

std::size_t exact_min_cover(const std::vector<std::uint32_t>& balls) {
  // dp[mask] = minimal number of balls whose union covers `mask`; the
  // recurrence branches on the lowest uncovered member.
  const std::size_t m = balls.size();
  const std::uint32_t full = (m == 32) ? 0xFFFFFFFFu : ((1u << m) - 1u);
  std::vector<std::uint8_t> dp(static_cast<std::size_t>(full) + 1, 0xFF);
  dp[0] = 0;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    const int e = __builtin_ctz(mask);
    std::uint8_t best = 0xFF;
    for (std::size_t i = 0; i < m; ++i) {
      if ((balls[i] >> e & 1u) == 0) continue;
      const std::uint8_t sub = dp[mask & ~balls[i]];
      if (sub != 0xFF && sub + 1 < best) best = static_cast<std::uint8_t>(sub + 1);
    }
    dp[mask] = best;
  }
  return dp[full];
}

std::size_t greedy_cover(const std::vector<std::vector<bool>>& covers) {
  const std::size_t m = covers.size();
  std::vector<bool> covered(m, false);
  std::size_t remaining = m;
  std::size_t count = 0;
  while (remaining > 0) {
    std::size_t best = 0, best_gain = 0;
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t gain = 0;
      for (std::size_t j = 0; j < m; ++j)
        if (!covered[j] && covers[i][j]) ++gain;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    for (std::size_t j = 0; j < m; ++j)
      if (covers[best][j] && !covered[j]) {
        covered[j] = true;
        --remaining;
      }
    ++count;
  }
  return count;
}

}  // namespace

CoveringResult covering_number(const PolicyClass& cls, double eps) {
  validate_policy_class(cls);
  if (!(eps > 0.0)) throw validation_error("covering radius must be positive");
  const std::size_t m = cls.members.size();
  const auto d = distance_matrix(cls);
  if (m <= kExactCoverLimit) {
    std::vector<std::uint32_t> balls(m, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (d[i][j] <= eps) balls[i] |= 1u << j;
    return {exact_min_cover(balls), true};
  }
  std::vector<std::vector<bool>> covers(m, std::vector<bool>(m, false));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) covers[i][j] = d[i][j] <= eps;
  return {greedy_cover(covers), false};
}

double metric_entropy(const PolicyClass& cls, double eps) {
  return std::log(static_cast<double>(covering_number(cls, eps).count));
}

void validate_entropy_profile(const EntropyProfile& profile) {
  if (profile.parametric) {
    if (!(profile.k1 > 0.0) || !(profile.k2 > 0.0))
      throw validation_error("parametric entropy profile requires k1 > 0 and k2 > 0");
    return;
  }
  if (profile.table.empty()) throw validation_error("tabulated entropy profile is empty");
  for (std::size_t i = 0; i < profile.table.size(); ++i) {
    if (profile.table[i].second < 0.0) throw validation_error("entropy values must be nonnegative");
    if (i > 0) {
      if (!(profile.table[i].first < profile.table[i - 1].first))
        throw validation_error("entropy profile radii must be strictly decreasing");
      if (profile.table[i].second < profile.table[i - 1].second)
        throw validation_error("entropy must be nonincreasing in the radius");
    }
  }
}

double parametric_entropy(const EntropyProfile& profile, std::int64_t horizon, double eps) {
  if (!(eps > 0.0)) throw validation_error("entropy radius must be positive");
  if (profile.parametric) {
    const double v = profile.k1 * std::log(profile.k2 * std::sqrt(static_cast<double>(horizon)) / eps);
    return std::max(0.0, v);
  }
  // Step lookup: entropy at the largest tabulated radius <= eps (radii are
  // stored descending), flat beyond both ends. Balls only shrink below the
  // smallest tabulated radius, so this reads the table conservatively.
  for (const auto& [radius, log_n] : profile.table)
    if (radius <= eps) return log_n;
  return profile.table.back().second;
}

double class_floor(const PolicyClass& cls) {
  validate_policy_class(cls);
  double lo = kInf;
  const int n_ctx = cls.members.front().num_contexts();
  for (const Policy& p : cls.members)
    for (int c = 0; c < n_ctx; ++c)
      for (double v : action_distribution(p, c)) lo = std::min(lo, v);
  return lo;
}

}  // namespace peval
