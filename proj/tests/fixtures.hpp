#ifndef PEVAL_TESTS_FIXTURES_HPP
#define PEVAL_TESTS_FIXTURES_HPP

#include <random>
#include <string>
#include <vector>

#include "peval/policy.hpp"
#include "peval/pomdp.hpp"

namespace fixtures {

// The desk-scale 2x2x2 instance used throughout: T=4 gives 4096 paths.
inline peval::Pomdp default_model() {
  peval::Pomdp m;
  m.id = "default-2x2x2";
  m.num_states = 2;
  m.num_observations = 2;
  m.num_actions = 2;
  m.r_max = 2.0;
  m.initial_dist = {0.6, 0.4};
  m.transition = {{0.7, 0.3}, {0.2, 0.8}, {0.4, 0.6}, {0.9, 0.1}};
  m.observation_fn = {{0.8, 0.2}, {0.3, 0.7}};
  m.reward = {{1.0, -0.5}, {0.25, 2.0}};
  return m;
}

inline peval::Pomdp positive_model() {
  peval::Pomdp m = default_model();
  m.id = "positive-2x2x2";
  m.reward = {{1.0, 0.5}, {0.25, 2.0}};
  return m;
}

inline peval::ReturnSpec default_spec() {
  peval::ReturnSpec spec;
  spec.kind = peval::ReturnKind::finite_horizon;
  spec.horizon = 4;
  spec.r_max = 2.0;
  return spec;
}

inline peval::Policy tabular(std::vector<std::vector<double>> rows, double floor, const std::string& id) {
  peval::Policy p;
  p.kind = peval::PolicyKind::tabular_reactive;
  p.num_observations = static_cast<int>(rows.size());
  p.num_actions = static_cast<int>(rows.front().size());
  p.window = 1;
  p.floor = floor;
  p.table = std::move(rows);
  p.id = id;
  return p;
}

inline peval::Policy uniform_2x2(double floor = 0.1) {
  return tabular({{0.5, 0.5}, {0.5, 0.5}}, floor, "uniform");
}

inline peval::Policy near_deterministic_2x2() {
  return tabular({{0.9, 0.1}, {0.1, 0.9}}, 0.1, "near-deterministic");
}

inline peval::Policy mild_2x2() { return tabular({{0.6, 0.4}, {0.3, 0.7}}, 0.1, "mild"); }

// Random binary-action reactive policy with the given floor.
inline peval::Policy random_policy(std::mt19937_64& rng, int num_observations, double floor,
                                   const std::string& id) {
  std::vector<std::vector<double>> rows;
  for (int o = 0; o < num_observations; ++o) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double p = floor + (1.0 - 2.0 * floor) * u;
    rows.push_back({p, 1.0 - p});
  }
  return tabular(std::move(rows), floor, id);
}

// The 8-member grid class used by coverage and covering-number tests.
inline peval::PolicyClass grid8_class() {
  peval::PolicyClass cls;
  cls.id = "grid8";
  cls.floor = 0.1;
  const std::vector<double> first = {0.2, 0.8};
  const std::vector<double> second = {0.1, 0.37, 0.63, 0.9};
  int k = 0;
  for (double a : first)
    for (double b : second)
      cls.members.push_back(tabular({{a, 1.0 - a}, {b, 1.0 - b}}, 0.1, "g" + std::to_string(k++)));
  cls.context_space = peval::all_contexts(2, 1);
  return cls;
}

}  // namespace fixtures

#endif
