#include "peval/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "peval/errors.hpp"

namespace peval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* msg) {
  if (!ok) throw validation_error(msg);
}

void check_core(const BoundInputs& in) {
  require(in.v_max > 0.0, "v_max must be positive");
  require(in.eta >= 1.0, "eta must be >= 1");
  require(in.entropy_k >= 0.0, "entropy must be nonnegative");
}

double checked_covering(const CoveringFn& covering, double eps) {
  const double n = covering(eps);
  if (!std::isfinite(n)) throw numeric_error("covering number is not finite");
  if (n < 1.0) throw validation_error("covering number must be >= 1");
  return n;
}

}  // namespace

std::string variant_name(EpsilonVariant v) {
  return v == EpsilonVariant::paper_form ? "paper_form" : "exact_form";
}

double bernstein_tail(double eps, std::int64_t n, double variance_sum_bound, double magnitude_bound) {
  require(eps > 0.0, "eps must be positive");
  require(n > 0, "n must be positive");
  require(variance_sum_bound >= 0.0, "variance bound must be nonnegative");
  require(magnitude_bound > 0.0, "magnitude bound must be positive");
  const double exponent = -0.5 * eps * eps * static_cast<double>(n) / (variance_sum_bound + magnitude_bound * eps);
  return std::clamp(2.0 * std::exp(exponent), 0.0, 1.0);
}

double single_policy_epsilon(const BoundInputs& in, std::int64_t n, EpsilonVariant variant) {
  check_core(in);
  require(n >= 1, "n must be >= 1");
  require(in.delta > 0.0 && in.delta <= 1.0, "delta must lie in (0, 1]");
  const double b = variant == EpsilonVariant::paper_form ? std::log(1.0 / in.delta) : std::log(2.0 / in.delta);
  const double eta = in.eta;
  return in.v_max / static_cast<double>(n) * (b * eta + std::sqrt(2.0 * b * (eta - 1.0) + b * b * eta * eta));
}

double single_policy_delta(const BoundInputs& in, std::int64_t n, double eps) {
  check_core(in);
  require(n >= 1, "n must be >= 1");
  const double variance_sum = in.v_max * in.v_max * (in.eta - 1.0) / static_cast<double>(n);
  return bernstein_tail(eps, n, variance_sum, in.v_max * in.eta);
}

double uniform_tail(const BoundInputs& in, double eps, double covering_count, std::int64_t n) {
  check_core(in);
  require(eps > 0.0, "eps must be positive");
  if (n < 1) return 8.0 * covering_count;  // no samples: the bound is vacuous
  const double nn = static_cast<double>(n);
  const double denom = in.v_max * in.v_max * (in.eta - 1.0) / nn + in.v_max * in.eta * eps / 8.0;
  return 8.0 * covering_count * std::exp(-eps * eps * nn / (128.0 * denom));
}

std::int64_t uniform_sample_size(const BoundInputs& in, double eps, const CoveringFn& covering) {
  check_core(in);
  require(eps > 0.0, "eps must be positive");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw validation_error("delta must lie in (0, 1)");
  const double ncov = checked_covering(covering, eps / 8.0);
  const double a_term = in.v_max * in.v_max * (in.eta - 1.0);
  const double b_term = in.v_max * in.eta * eps / 8.0;
  const double c0 = 128.0 * std::log(8.0 * ncov / in.delta);
  const double root =
      (c0 * b_term + std::sqrt(c0 * c0 * b_term * b_term + 4.0 * eps * eps * c0 * a_term)) / (2.0 * eps * eps);
  if (!(root < 4.6e18)) throw numeric_error("uniform sample size exceeds the integer range");
  std::int64_t n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(root)));
  // The closed form can land one off after rounding; pin the property that
  // n satisfies the inequality and n-1 does not.
  while (n > 1 && uniform_tail(in, eps, ncov, n - 1) <= in.delta) --n;
  while (uniform_tail(in, eps, ncov, n) > in.delta) ++n;
  return n;
}

double uniform_epsilon(const BoundInputs& in, std::int64_t n, const CoveringFn& covering) {
  check_core(in);
  require(n >= 1, "n must be >= 1");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw validation_error("delta must lie in (0, 1)");
  const double nn = static_cast<double>(n);
  auto root_for = [&](double ncov) {
    const double beta = std::log(8.0 * ncov / in.delta);
    const double lin = 16.0 * beta * in.eta;
    return in.v_max * (lin + std::sqrt(lin * lin + 512.0 * beta * (in.eta - 1.0))) / (2.0 * nn);
  };
  double eps = root_for(checked_covering(covering, 1.0));
  for (int iter = 0; iter < 100; ++iter) {
    const double next = root_for(checked_covering(covering, eps / 8.0));
    if (std::abs(next - eps) <= 1e-10) return next;
    eps = next;
  }
  throw numeric_error("uniform_epsilon: fixed point did not converge in 100 iterations");
}

double theorem_sample_size_stated(const BoundInputs& in, double eps) {
  check_core(in);
  require(eps > 0.0, "eps must be positive");
  require(in.delta > 0.0 && in.delta <= 1.0, "delta must lie in (0, 1]");
  const double eta = std::pow(2.0 * (1.0 - in.c_floor), static_cast<double>(in.horizon));
  return in.v_max / eps * eta * (std::log(1.0 / in.delta) + in.entropy_k);
}

double kearns_sample_size(double v_max_over_eps, std::int64_t horizon, int vc_dim, double delta) {
  require(v_max_over_eps > 0.0, "v_max/eps must be positive");
  if (horizon < 2) throw validation_error("horizon must be >= 2 (log T must be positive)");
  require(vc_dim >= 1, "vc dimension must be >= 1");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  const double t = static_cast<double>(horizon);
  return v_max_over_eps * v_max_over_eps * std::pow(2.0, 2.0 * t) * vc_dim * std::log(t) *
         (t + std::log(v_max_over_eps) + std::log(1.0 / delta));
}

double mcdiarmid_sample_size(const BoundInputs& in, double eps) {
  check_core(in);
  require(eps > 0.0, "eps must be positive");
  require(in.delta > 0.0 && in.delta <= 1.0, "delta must lie in (0, 1]");
  require(in.c_floor >= 0.0 && in.c_floor <= 0.5, "c_floor must lie in [0, 1/2]");
  const double ratio = in.v_max / eps;
  const double eta = std::pow(2.0 * (1.0 - in.c_floor), static_cast<double>(in.horizon));
  return ratio * ratio * eta * eta * (in.entropy_k + std::log(1.0 / in.delta));
}

namespace {

// Adaptive Simpson on [a, b] with absolute tolerance.
double simpson_segment(const std::function<double(double)>& f, double a, double fa, double b, double fb, double m,
                       double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson_segment(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_segment(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_segment(f, a, fa, b, fb, m, fm, whole, tol, 48);
}

// integral_0^eps sqrt(K(tau)) dtau under u = -log(tau): the integrand
// sqrt(K(e^-u)) e^-u decays geometrically for every integrable profile.
double entropy_integral_from_zero(const EntropyFn& entropy, double eps, double tol) {
  auto integrand = [&](double u) {
    const double tau = std::exp(-u);
    const double k = entropy(tau);
    if (k < 0.0) throw validation_error("entropy function must be nonnegative");
    if (!std::isfinite(k)) throw numeric_error("entropy function diverged");
    return std::sqrt(k) * tau;
  };
  const double u0 = -std::log(eps);
  double total = 0.0;
  double prev = kInf;
  for (int segment = 0; segment < 120; ++segment) {
    const double lo = u0 + 5.0 * segment;
    const double hi = lo + 5.0;
    const double part = adaptive_simpson(integrand, lo, hi, tol / 16.0);
    total += part;
    if (segment > 0 && part > prev * 1.0001 && part > tol)
      throw numeric_error("entropy integral appears to diverge near zero");
    if (part < tol / 16.0 && segment >= 1) return total;
    prev = part;
  }
  throw numeric_error("entropy integral did not converge");
}

}  // namespace

double regret_bound(const EntropyFn& entropy, double integration_tolerance) {
  require(integration_tolerance > 0.0, "integration tolerance must be positive");
  const double tol = integration_tolerance;

  // Upper end of the search range: the first radius where the entropy hits
  // zero (beyond it the objective only grows), capped for safety.
  double eps_hi = 1e-6;
  while (eps_hi < 1e12 && entropy(eps_hi) > 0.0) eps_hi *= 2.0;

  const double eps_lo = 1e-12;
  const int grid_points = 240;
  const double log_lo = std::log(eps_lo);
  const double log_hi = std::log(eps_hi);

  // Cumulative integral along the grid, then the objective per point.
  std::vector<double> grid(grid_points);
  for (int i = 0; i < grid_points; ++i)
    grid[i] = std::exp(log_lo + (log_hi - log_lo) * i / (grid_points - 1));
  auto sqrt_entropy = [&](double tau) {
    const double k = entropy(tau);
    if (k < 0.0) throw validation_error("entropy function must be nonnegative");
    return std::sqrt(k);
  };
  std::vector<double> integral(grid_points);
  integral[0] = entropy_integral_from_zero(entropy, grid[0], tol);
  for (int i = 1; i < grid_points; ++i)
    integral[i] = integral[i - 1] + adaptive_simpson(sqrt_entropy, grid[i - 1], grid[i], tol / grid_points);

  int best = 0;
  double best_value = kInf;
  for (int i = 0; i < grid_points; ++i) {
    const double value = entropy(grid[i]) + 24.0 * integral[i];
    if (value < best_value) {
      best_value = value;
      best = i;
    }
  }

  // Golden-section refinement in log-eps between the best point's neighbors.
  const int lo_i = std::max(0, best - 1);
  const int hi_i = std::min(grid_points - 1, best + 1);
  double a = std::log(grid[lo_i]);
  double b = std::log(grid[hi_i]);
  auto objective = [&](double log_eps) {
    const double eps = std::exp(log_eps);
    return entropy(eps) + 24.0 * (integral[lo_i] + adaptive_simpson(sqrt_entropy, grid[lo_i], eps, tol));
  };
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int iter = 0; iter < 80 && (b - a) > 1e-12; ++iter) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  return std::min(best_value, std::min(fc, fd));
}

double eta_from_regret(double regret) {
  require(regret >= 0.0, "regret must be nonnegative");
  return std::exp(regret);
}

double parametric_regret(double k1, std::int64_t horizon) {
  require(k1 > 0.0, "k1 must be positive");
  require(horizon >= 1, "horizon must be >= 1");
  return 0.5 * k1 * std::log(static_cast<double>(horizon));
}

double parametric_sample_size(double v_max, double eps, double k1, double entropy_k, double delta,
                              std::int64_t horizon) {
  require(v_max > 0.0, "v_max must be positive");
  require(eps > 0.0, "eps must be positive");
  require(k1 > 0.0, "k1 must be positive");
  require(entropy_k >= 0.0, "entropy must be nonnegative");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  require(horizon >= 1, "horizon must be >= 1");
  return v_max / eps * std::pow(static_cast<double>(horizon), 0.5 * k1) * (entropy_k + std::log(1.0 / delta));
}

SrmSelection srm_select(std::span<const SrmClassInput> classes, std::int64_t n, double delta,
                        const BoundInputs& shared) {
  if (classes.empty()) throw validation_error("srm_select: empty class list");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  BoundInputs per_class = shared;
  per_class.delta = delta / static_cast<double>(classes.size());
  SrmSelection out;
  out.epsilons.reserve(classes.size());
  out.lower_bounds.reserve(classes.size());
  for (const SrmClassInput& cls : classes) {
    const double eps = uniform_epsilon(per_class, n, cls.covering);
    out.epsilons.push_back(eps);
    out.lower_bounds.push_back(cls.value_estimate - eps);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < classes.size(); ++i) {
    if (out.lower_bounds[i] > out.lower_bounds[best] ||
        (out.lower_bounds[i] == out.lower_bounds[best] && out.epsilons[i] < out.epsilons[best]))
      best = i;
  }
  out.chosen_index = best;
  out.chosen_id = classes[best].id;
  return out;
}

}  // namespace peval
