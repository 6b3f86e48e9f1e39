#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "fixtures.hpp"
#include "peval/errors.hpp"
#include "peval/estimators.hpp"
#include "peval/experiments.hpp"

using namespace peval;

namespace {

SampleSet draw_samples(const Pomdp& m, const Policy& behavior, const ReturnSpec& spec, int n,
                       std::uint64_t master) {
  return sampling_stage(m, behavior, spec, n, master, 1);
}

}  // namespace

TEST_CASE("crude estimate of constants and simple lists") {
  const std::vector<double> ones = {1.0, 1.0, 1.0};
  Estimate e = crude_estimate(ones);
  CHECK(e.value == 1.0);
  CHECK(e.std_error == 0.0);
  const std::vector<double> pair = {0.0, 2.0};
  e = crude_estimate(pair);
  CHECK(e.value == 1.0);
  CHECK(e.std_error == doctest::Approx(1.0).epsilon(1e-15));  // sd = sqrt(2)/1, se = sd/sqrt(2)
  CHECK_THROWS_AS((void)crude_estimate(std::vector<double>{}), validation_error);
}

TEST_CASE("crude estimate converges to the exact value") {
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  const Policy pi = fixtures::mild_2x2();
  const SampleSet samples = draw_samples(m, pi, spec, 100000, 11);
  const Estimate e = crude_estimate(samples.returns);
  CHECK(std::abs(e.value - exact_value(m, pi, spec)) <= 4.0 * e.std_error);
}

TEST_CASE("likelihood ratio is 1 when target equals behavior") {
  const Pomdp m = fixtures::default_model();
  const Policy pi = fixtures::mild_2x2();
  const SampleSet samples = draw_samples(m, pi, fixtures::default_spec(), 50, 3);
  for (const History& h : samples.histories) CHECK(likelihood_ratio(pi, h) == 1.0);
}

TEST_CASE("likelihood ratio matches the full-probability ratio from enumeration") {
  // Same actions, target prob 0.8 vs behavior 0.5 per step: (0.8/0.5)^2.
  const Pomdp m = fixtures::default_model();
  ReturnSpec spec = fixtures::default_spec();
  spec.horizon = 2;
  const Policy behavior = fixtures::uniform_2x2();
  const Policy target = fixtures::tabular({{0.8, 0.2}, {0.8, 0.2}}, 0.1, "t8");

  History h;
  h.steps = {{0, 0, 1.0}, {1, 0, 0.25}};
  record_behavior_probs(h, behavior);
  CHECK(likelihood_ratio(target, h) == doctest::Approx(2.56).epsilon(1e-12));

  // Environment factors cancel: aggregate Pr(h|pi) over hidden paths by
  // observable key and compare with the action-only ratio.
  std::map<std::vector<int>, std::pair<double, double>> by_observable;
  for (const auto& e : enumerate_histories(m, spec, behavior)) {
    std::vector<int> key;
    for (const auto& s : e.history.steps) {
      key.push_back(s.observation);
      key.push_back(s.action);
    }
    const double p_b = e.env_prob * e.action_prob;
    const double p_t = e.env_prob * std::exp(log_prob_actions(target, e.history));
    auto& acc = by_observable[key];
    acc.first += p_b;
    acc.second += p_t;
  }
  for (const auto& e : enumerate_histories(m, spec, behavior)) {
    std::vector<int> key;
    for (const auto& s : e.history.steps) {
      key.push_back(s.observation);
      key.push_back(s.action);
    }
    const auto& acc = by_observable[key];
    CHECK(likelihood_ratio(target, e.history) == doctest::Approx(acc.second / acc.first).epsilon(1e-12));
  }
}

TEST_CASE("likelihood ratio is 0 when the target excludes an observed action") {
  const Policy target = fixtures::tabular({{1.0, 0.0}, {1.0, 0.0}}, 0.0, "always-0");
  History h;
  h.steps = {{0, 1, 0.0}};
  h.behavior_probs = {0.5};
  CHECK(likelihood_ratio(target, h) == 0.0);
}

TEST_CASE("likelihood ratio rejects zero recorded behavior probabilities") {
  History h;
  h.steps = {{0, 0, 0.0}};
  h.behavior_probs = {0.0};
  CHECK_THROWS_AS((void)likelihood_ratio(fixtures::uniform_2x2(), h), validation_error);
}

TEST_CASE("IS with target == behavior equals the crude estimate exactly") {
  const Pomdp m = fixtures::default_model();
  const Policy pi = fixtures::mild_2x2();
  const SampleSet samples = draw_samples(m, pi, fixtures::default_spec(), 500, 21);
  const Estimate is = is_estimate(samples, pi);
  const Estimate crude = crude_estimate(samples.returns);
  CHECK(is.value == crude.value);
  CHECK(is.std_error == crude.std_error);
  CHECK(is.weight_min == 1.0);
  CHECK(is.weight_max == 1.0);
}

TEST_CASE("IS estimator is exactly unbiased under enumeration") {
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  std::mt19937_64 rng(31337);
  for (int round = 0; round < 10; ++round) {
    const Policy behavior = fixtures::random_policy(rng, 2, 0.1, "b");
    const Policy target = fixtures::random_policy(rng, 2, 0.1, "t");
    double expectation = 0.0;
    for_each_enumerated(m, spec, behavior, kDefaultEnumerationCap, [&](const EnumeratedHistory& e) {
      expectation +=
          e.env_prob * e.action_prob * compute_return(e.history, spec) * likelihood_ratio(target, e.history);
    });
    CHECK(std::abs(expectation - exact_value(m, target, spec)) <= 1e-10);
  }
}

TEST_CASE("IS of all-zero returns is zero") {
  Pomdp m = fixtures::default_model();
  m.reward = {{0.0, 0.0}, {0.0, 0.0}};
  const SampleSet samples = draw_samples(m, fixtures::uniform_2x2(), fixtures::default_spec(), 100, 5);
  CHECK(is_estimate(samples, fixtures::near_deterministic_2x2()).value == 0.0);
}

TEST_CASE("IS magnitude is bounded by V_max * eta") {
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  const double v_max = return_bound(spec);
  const double eta = eta_bound(spec.horizon, 0.1, 2);
  const SampleSet samples = draw_samples(m, fixtures::uniform_2x2(), spec, 200, 77);
  const Estimate e = is_estimate(samples, fixtures::near_deterministic_2x2());
  CHECK(std::abs(e.value) <= v_max * eta);
}

TEST_CASE("exact IS variance with target == behavior is the crude variance") {
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  const Policy pi = fixtures::mild_2x2();
  const int n = 50;
  double second = 0.0, first = 0.0;
  for_each_enumerated(m, spec, pi, kDefaultEnumerationCap, [&](const EnumeratedHistory& e) {
    const double p = e.env_prob * e.action_prob;
    const double r = compute_return(e.history, spec);
    first += p * r;
    second += p * r * r;
  });
  const double crude_var = (second - first * first) / n;
  CHECK(is_variance_exact(m, pi, pi, spec, n) == doctest::Approx(crude_var).epsilon(1e-12));
}

TEST_CASE("exact IS variance of a deterministic instance is zero") {
  Pomdp m = fixtures::default_model();
  m.initial_dist = {1.0, 0.0};
  m.transition = {{0.0, 1.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 0.0}};
  m.observation_fn = {{1.0, 0.0}, {0.0, 1.0}};
  const Policy det = fixtures::tabular({{1.0, 0.0}, {0.0, 1.0}}, 0.0, "det");
  CHECK(is_variance_exact(m, det, det, fixtures::default_spec(), 10) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("exact IS variance matches replicated empirical variance within 5 percent") {
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  const Policy behavior = fixtures::uniform_2x2();
  const Policy target = fixtures::mild_2x2();
  const int n = 50, reps = 10000;
  const double exact_var = is_variance_exact(m, target, behavior, spec, n);
  std::vector<double> values(reps);
  for (int rep = 0; rep < reps; ++rep)
    values[rep] = is_estimate(draw_samples(m, behavior, spec, n, mix_seed(909090, rep)), target).value;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= reps;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= (reps - 1);
  CHECK(std::abs(var - exact_var) <= 0.05 * exact_var);
}

TEST_CASE("variance identity: the two algebraic forms of the exact variance agree") {
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  std::mt19937_64 rng(5150);
  for (int round = 0; round < 10; ++round) {
    const Policy behavior = fixtures::random_policy(rng, 2, 0.1, "b");
    const Policy target = fixtures::random_policy(rng, 2, 0.1, "t");
    double value = 0.0, line1 = 0.0, line3 = 0.0;
    for_each_enumerated(m, spec, behavior, kDefaultEnumerationCap, [&](const EnumeratedHistory& e) {
      const double p_b = e.env_prob * e.action_prob;
      const double w = likelihood_ratio(target, e.history);
      const double r = compute_return(e.history, spec);
      value += p_b * w * r;
      line1 += p_b * (r * w) * (r * w);
      line3 += p_b * w * r * r * w;  // = E_target[R^2 w]
    });
    const double var1 = line1 - value * value;
    const double var3 = line3 - value * value;
    CHECK(std::abs(var1 - var3) <= 1e-10);
  }
}

TEST_CASE("WIS equals the crude mean when weights are equal") {
  const Pomdp m = fixtures::default_model();
  const Policy pi = fixtures::mild_2x2();
  const SampleSet samples = draw_samples(m, pi, fixtures::default_spec(), 200, 8);
  CHECK(wis_estimate(samples, pi).value == doctest::Approx(crude_estimate(samples.returns).value).epsilon(1e-14));
}

TEST_CASE("WIS with a single sample returns that return regardless of the weight") {
  const Pomdp m = fixtures::default_model();
  const SampleSet samples = draw_samples(m, fixtures::uniform_2x2(), fixtures::default_spec(), 1, 4) ;
  const Estimate e = wis_estimate(samples, fixtures::near_deterministic_2x2());
  CHECK(e.value == doctest::Approx(samples.returns[0]).epsilon(1e-15));
}

TEST_CASE("WIS stays within the sample return range") {
  const Pomdp m = fixtures::default_model();
  const SampleSet samples = draw_samples(m, fixtures::uniform_2x2(), fixtures::default_spec(), 100, 42);
  const Estimate e = wis_estimate(samples, fixtures::near_deterministic_2x2());
  const auto [lo, hi] = std::minmax_element(samples.returns.begin(), samples.returns.end());
  CHECK(e.value >= *lo - 1e-12);
  CHECK(e.value <= *hi + 1e-12);
}

TEST_CASE("WIS is invariant under rescaling all weights") {
  const Pomdp m = fixtures::default_model();
  SampleSet samples = draw_samples(m, fixtures::uniform_2x2(), fixtures::default_spec(), 100, 17);
  const Policy target = fixtures::mild_2x2();
  const double base = wis_estimate(samples, target).value;
  // Halving every recorded step probability scales each weight by 2^T.
  for (History& h : samples.histories)
    for (double& p : h.behavior_probs) p *= 0.5;
  CHECK(wis_estimate(samples, target).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("WIS converges to the exact value along a sample-size sweep") {
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  const Policy behavior = fixtures::uniform_2x2();
  const Policy target = fixtures::mild_2x2();
  const double v = exact_value(m, target, spec);
  std::vector<double> errors;
  Estimate last;
  for (int n : {100, 10000, 1000000}) {
    const SampleSet samples = draw_samples(m, behavior, spec, n, 424242);
    last = wis_estimate(samples, target);
    errors.push_back(std::abs(last.value - v));
  }
  CHECK(errors[1] < errors[0]);
  CHECK(errors[2] < errors[1]);
  CHECK(errors[2] <= 3.0 * last.std_error);
}

TEST_CASE("mixture with a single component reduces to plain IS") {
  const Pomdp m = fixtures::default_model();
  const Policy behavior = fixtures::uniform_2x2();
  const Policy target = fixtures::mild_2x2();
  const std::vector<SampleSet> sets = {draw_samples(m, behavior, fixtures::default_spec(), 150, 66)};
  const std::vector<Policy> behaviors = {behavior};
  const std::vector<double> priors = {1.0};
  const Estimate mix = mixture_is_estimate(sets, behaviors, priors, target);
  const Estimate is = is_estimate(sets[0], target);
  CHECK(mix.value == doctest::Approx(is.value).epsilon(1e-12));
}

TEST_CASE("mixture of two identical behaviors equals IS on the pooled set") {
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  const Policy behavior = fixtures::uniform_2x2();
  const Policy target = fixtures::mild_2x2();
  const std::vector<SampleSet> sets = {draw_samples(m, behavior, spec, 80, 1), draw_samples(m, behavior, spec, 70, 2)};
  const std::vector<Policy> behaviors = {behavior, behavior};
  const std::vector<double> priors = {0.5, 0.5};
  const Estimate mix = mixture_is_estimate(sets, behaviors, priors, target);

  SampleSet pooled = sets[0];
  pooled.histories.insert(pooled.histories.end(), sets[1].histories.begin(), sets[1].histories.end());
  pooled.returns.insert(pooled.returns.end(), sets[1].returns.begin(), sets[1].returns.end());
  const Estimate is = is_estimate(pooled, target);
  CHECK(mix.value == doctest::Approx(is.value).epsilon(1e-12));
}

TEST_CASE("mixture weight formula is exactly unbiased over disjoint-support behaviors") {
  // behavior 1 plays action = observation, behavior 2 plays the opposite;
  // their supports are disjoint. The mixture still evaluates any target
  // supported inside the union -- here behavior 1 itself.
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  const Policy follow = fixtures::tabular({{1.0, 0.0}, {0.0, 1.0}}, 0.0, "follow-obs");
  const Policy oppose = fixtures::tabular({{0.0, 1.0}, {1.0, 0.0}}, 0.0, "oppose-obs");
  const std::vector<double> priors = {0.5, 0.5};
  const std::vector<Policy> behaviors = {follow, oppose};
  const Policy& target = follow;

  double expectation = 0.0;
  for (std::size_t j = 0; j < behaviors.size(); ++j) {
    for_each_enumerated(m, spec, behaviors[j], kDefaultEnumerationCap, [&](const EnumeratedHistory& e) {
      const double target_prob = std::exp(log_prob_actions(target, e.history));
      double denom = 0.0;
      for (std::size_t k = 0; k < behaviors.size(); ++k)
        denom += priors[k] * std::exp(log_prob_actions(behaviors[k], e.history));
      expectation += priors[j] * e.env_prob * e.action_prob * compute_return(e.history, spec) *
                     (target_prob / denom);
    });
  }
  CHECK(std::abs(expectation - exact_value(m, target, spec)) <= 1e-10);
}

TEST_CASE("mixture rejects degenerate priors") {
  const Pomdp m = fixtures::default_model();
  const std::vector<SampleSet> sets = {draw_samples(m, fixtures::uniform_2x2(), fixtures::default_spec(), 10, 3)};
  const std::vector<Policy> behaviors = {fixtures::uniform_2x2()};
  CHECK_THROWS_AS((void)mixture_is_estimate(sets, behaviors, std::vector<double>{0.4}, fixtures::mild_2x2()),
                  validation_error);
  CHECK_THROWS_AS((void)mixture_is_estimate(sets, behaviors, std::vector<double>{-1.0}, fixtures::mild_2x2()),
                  validation_error);
}

TEST_CASE("eta bound formula") {
  CHECK(eta_bound(3, 0.0, 2) == 8.0);
  CHECK(eta_bound(2, 0.25, 2) == doctest::Approx(2.25).epsilon(1e-15));
  CHECK(eta_bound(7, 0.5, 2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eta_bound(5, 0.25, 4) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS((void)eta_bound(3, 0.7, 2), validation_error);
}

TEST_CASE("likelihood ratios against the uniform behavior never exceed eta") {
  const Pomdp m = fixtures::default_model();
  const ReturnSpec spec = fixtures::default_spec();
  const double eta = eta_bound(spec.horizon, 0.1, 2);
  std::mt19937_64 rng(404);
  for (int round = 0; round < 5; ++round) {
    const Policy target = fixtures::random_policy(rng, 2, 0.1, "t");
    double worst = 0.0;
    for_each_enumerated(m, spec, fixtures::uniform_2x2(), kDefaultEnumerationCap,
                        [&](const EnumeratedHistory& e) {
                          worst = std::max(worst, likelihood_ratio(target, e.history));
                        });
    CHECK(worst <= eta * (1.0 + 1e-12));
  }
}

TEST_CASE("optimal sampling distribution for constant rewards is the target distribution") {
  Pomdp m = fixtures::positive_model();
  m.reward = {{1.5, 1.5}, {1.5, 1.5}};
  const ReturnSpec spec = fixtures::default_spec();
  const Policy target = fixtures::mild_2x2();
  const OptimalSamplingResult res = optimal_sampling_check(m, target, spec);
  const auto entries = enumerate_histories(m, spec, target);
  REQUIRE(res.probabilities.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    CHECK(res.probabilities[i] ==
          doctest::Approx(entries[i].env_prob * entries[i].action_prob).epsilon(1e-12));
  CHECK(res.variance <= 1e-18);
}

TEST_CASE("optimal sampling gives zero variance and a pointwise identity") {
  const Pomdp m = fixtures::positive_model();
  const ReturnSpec spec = fixtures::default_spec();
  const Policy target = fixtures::near_deterministic_2x2();
  const OptimalSamplingResult res = optimal_sampling_check(m, target, spec);
  CHECK(res.variance <= 1e-18);
  const double v = exact_value(m, target, spec);
  const auto entries = enumerate_histories(m, spec, target);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (res.probabilities[i] == 0.0) continue;
    const double term =
        compute_return(entries[i].history, spec) * entries[i].env_prob * entries[i].action_prob /
        res.probabilities[i];
    CHECK(std::abs(term - v) <= 1e-9);
  }
}

TEST_CASE("zero-return histories receive zero optimal sampling probability") {
  Pomdp m = fixtures::positive_model();
  m.reward[0][1] = 0.0;  // paths that always take (s0, a1) have return 0
  const ReturnSpec spec = fixtures::default_spec();
  const Policy target = fixtures::mild_2x2();
  const OptimalSamplingResult res = optimal_sampling_check(m, target, spec);
  const auto entries = enumerate_histories(m, spec, target);
  bool saw_zero = false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (compute_return(entries[i].history, spec) == 0.0) {
      CHECK(res.probabilities[i] == 0.0);
      saw_zero = true;
    }
  }
  CHECK(saw_zero);
}

TEST_CASE("optimal sampling rejects mixed-sign and all-zero returns") {
  const ReturnSpec spec = fixtures::default_spec();
  CHECK_THROWS_AS((void)optimal_sampling_check(fixtures::default_model(), fixtures::mild_2x2(), spec),
                  validation_error);
  Pomdp zero = fixtures::positive_model();
  zero.reward = {{0.0, 0.0}, {0.0, 0.0}};
  CHECK_THROWS_AS((void)optimal_sampling_check(zero, fixtures::mild_2x2(), spec), validation_error);
}

TEST_CASE("sample sets validate cached returns and floors") {
  const Pomdp m = fixtures::default_model();
  SampleSet samples = draw_samples(m, fixtures::uniform_2x2(), fixtures::default_spec(), 20, 13);
  CHECK_NOTHROW(validate_sample_set(samples, 0.1));
  samples.returns[0] += 1.0;
  CHECK_THROWS_AS(validate_sample_set(samples, 0.1), validation_error);
}
