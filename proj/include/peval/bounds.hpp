#ifndef PEVAL_BOUNDS_HPP
#define PEVAL_BOUNDS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace peval {

/// Shared inputs of the deviation / sample-size formulas.
struct BoundInputs {
  double v_max = 1.0;        // bound on |R(h)| and on the value
  double eta = 1.0;          // uniform bound on the likelihood ratio
  double delta = 0.1;        // confidence parameter
  std::int64_t horizon = 1;  // T
  double entropy_k = 0.0;    // constant metric entropy K
  std::optional<int> vc_dim; // only the Kearns comparison formula reads this
  double c_floor = 0.0;      // probability floor of the policy class
};

enum class EpsilonVariant { paper_form, exact_form };

std::string variant_name(EpsilonVariant v);

/// eps -> covering number (may be +inf for classes with no finite cover).
using CoveringFn = std::function<double(double)>;
/// eps -> metric entropy (log covering number), nonincreasing.
using EntropyFn = std::function<double(double)>;

/// Bernstein tail 2*exp(-eps^2*n / (2*(L + a*eps))), clamped to [0,1].
double bernstein_tail(double eps, std::int64_t n, double variance_sum_bound, double magnitude_bound);

/// Single-policy deviation radius (V_max/N)*(b*eta + sqrt(2b(eta-1) + b^2 eta^2)).
/// paper_form takes b = log(1/delta) as printed; exact_form takes
/// b = log(2/delta), the exact root of the Bernstein deviation equation.
double single_policy_epsilon(const BoundInputs& in, std::int64_t n, EpsilonVariant variant);

/// The single-policy Bernstein deviation probability at radius eps
/// (the equation single_policy_epsilon inverts).
double single_policy_delta(const BoundInputs& in, std::int64_t n, double eps);

/// Left side of the uniform-convergence inequality:
///   8*Ncov(eps/8) * exp(-eps^2 N / (128*(V^2(eta-1)/N + V eta eps/8))).
double uniform_tail(const BoundInputs& in, double eps, double covering_count, std::int64_t n);

/// Smallest integer N with uniform_tail <= delta; N-1 violates it.
std::int64_t uniform_sample_size(const BoundInputs& in, double eps, const CoveringFn& covering);

/// Inverse reading of the same inequality: radius achievable with N samples.
/// Fixed-point over the eps-dependent covering number; fails after 100
/// iterations without convergence.
double uniform_epsilon(const BoundInputs& in, std::int64_t n, const CoveringFn& covering);

/// Uniform-convergence sample size in its stated big-O form,
/// (V_max/eps) * 2^T (1-c)^T * (log(1/delta) + K), with unit constant.
double theorem_sample_size_stated(const BoundInputs& in, double eps);

/// Reference formula of the history-tree approach, unit constant:
/// ratio^2 * 2^{2T} * VC * log T * (T + log(ratio) + log(1/delta)).
double kearns_sample_size(double v_max_over_eps, std::int64_t horizon, int vc_dim, double delta);

/// Bounded-differences (McDiarmid) variant, unit constant:
/// (V_max/eps)^2 * 2^{2T} (1-c)^{2T} * (K + log(1/delta)).
double mcdiarmid_sample_size(const BoundInputs& in, double eps);

/// Minimax-regret bound for sequential prediction over the class:
/// inf_{eps>0} [ K(eps) + 24 * integral_0^eps sqrt(K(tau)) dtau ].
/// Numeric: log-grid plus golden-section refinement; the integral uses
/// adaptive quadrature under u = -log(tau), which absorbs the sqrt-log
/// endpoint divergence of parametric profiles.
double regret_bound(const EntropyFn& entropy, double integration_tolerance);

/// exp(regret): usable as the likelihood-ratio bound eta.
double eta_from_regret(double regret);

/// Leading-order parametric regret (k1/2)*log T.
double parametric_regret(double k1, std::int64_t horizon);

/// Parametric-class sample size (V_max/eps) * T^{k1/2} * (K + log(1/delta)),
/// unit constant. Linear in V_max/eps.
double parametric_sample_size(double v_max, double eps, double k1, double entropy_k, double delta,
                              std::int64_t horizon);

struct SrmClassInput {
  std::string id;
  CoveringFn covering;    // covering number of the class at a given radius
  double value_estimate;  // best estimated value inside the class
};

struct SrmSelection {
  std::size_t chosen_index = 0;
  std::string chosen_id;
  std::vector<double> epsilons;      // per-class uniform radius at delta/m
  std::vector<double> lower_bounds;  // value_estimate - epsilon
};

/// Penalized class selection: confidence is split delta/m across classes,
/// each class gets its uniform radius, and the class with the largest
/// pessimistic lower bound wins. Ties go to the smaller radius (the less
/// complex class), then to the earlier index.
SrmSelection srm_select(std::span<const SrmClassInput> classes, std::int64_t n, double delta,
                        const BoundInputs& shared);

}  // namespace peval

#endif
