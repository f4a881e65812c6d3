#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pcl/exact_oracle.hpp"
#include "pcl/softmax.hpp"

using namespace pcl;

namespace {

// One decision state with three actions, each leading straight to a terminal.
TabularMDP bandit(const std::vector<double>& rewards) {
  TabularMDP::Builder b(2, static_cast<int>(rewards.size()), 0.9);
  b.set_terminal(1);
  for (int a = 0; a < static_cast<int>(rewards.size()); ++a) b.set_deterministic(0, a, rewards[static_cast<std::size_t>(a)], 1);
  return std::move(b).build();
}

double sup_diff(const ValueTable& a, const ValueTable& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("bandit values are the softmax of the rewards") {
  const std::vector<double> r{1.0, 0.5, -0.25};
  const TabularMDP mdp = bandit(r);
  for (double tau : {0.05, 0.5, 2.0}) {
    const auto res = softmax_value_iteration(mdp, tau);
    long double sum = 0.0L;
    for (double x : r) sum += std::exp(static_cast<long double>(x) / tau);
    CHECK(res.values[0] == doctest::Approx(static_cast<double>(tau * std::log(sum))).epsilon(1e-12));
    CHECK(res.values[1] == 0.0);
    const PolicyTable pi = boltzmann_policy(mdp, res.values, tau);
    const auto f = soft_indmax(r, tau);
    for (int a = 0; a < 3; ++a) CHECK(pi.at(0, a) == doctest::Approx(f[static_cast<std::size_t>(a)]).epsilon(1e-12));
  }
  const auto hard = hardmax_value_iteration(mdp);
  CHECK(hard.values[0] == 1.0);
  CHECK(hard.greedy[0] == 0);
}

TEST_CASE("fixed point is stationary under the backup") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TabularMDP mdp = random_mdp({.num_states = 12, .num_actions = 3, .stochasticity = 0.7, .gamma = 0.9, .num_terminal = 1, .seed = seed});
    const auto res = softmax_value_iteration(mdp, 0.3);
    CHECK(sup_diff(bellman_backup(mdp, res.values, 0.3), res.values) <= 1e-10);
    CHECK(res.residual <= 1e-10);
    for (std::size_t k = 1; k < res.residual_trace.size(); ++k)
      CHECK(res.residual_trace[k] <= 0.9 * res.residual_trace[k - 1] + 1e-15);
  }
}

TEST_CASE("optimal policy is consistent and evaluates to the optimal values") {
  const TabularMDP mdp = random_mdp({.num_states = 10, .num_actions = 4, .stochasticity = 1.0, .gamma = 0.85, .num_terminal = 2, .seed = 3});
  const double tau = 0.2;
  const auto v = softmax_value_iteration(mdp, tau, {.tol = 1e-13}).values;
  const PolicyTable pi = boltzmann_policy(mdp, v, tau);
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) CHECK(std::fabs(consistency_residual(mdp, v, pi, tau, s, a)) <= 1e-10);
  }
  CHECK(sup_diff(on_policy_eval(mdp, pi, tau), v) <= 1e-9);
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Path path = sample_path(mdp, pi, static_cast<int>(rng.index(8)), 6, rng);
    CHECK(std::fabs(path_residual(mdp, v, pi, tau, path)) <= 1e-9);
  }
}

TEST_CASE("a non-optimal policy has non-zero consistency error") {
  const TabularMDP mdp = bandit({1.0, 0.0, 0.0});
  const auto v = softmax_value_iteration(mdp, 0.5).values;
  PolicyTable uniform{2, 3, std::vector<double>(6, 1.0 / 3.0)};
  CHECK(std::fabs(consistency_residual(mdp, v, uniform, 0.5, 0, 0)) > 1e-3);
}

TEST_CASE("on-policy evaluation of a uniform policy on a bandit") {
  const TabularMDP mdp = bandit({1.0, 0.0, -1.0});
  PolicyTable uniform{2, 3, std::vector<double>(6, 1.0 / 3.0)};
  const auto v = on_policy_eval(mdp, uniform, 0.5);
  CHECK(v[0] == doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-12));
  const auto h = discounted_entropy(mdp, uniform);
  CHECK(h[0] == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  PolicyTable greedy{2, 3, {1.0, 0.0, 0.0, 1.0 / 3, 1.0 / 3, 1.0 / 3}};
  CHECK_THROWS_AS(on_policy_eval(mdp, greedy, 0.5), std::invalid_argument);
  CHECK(on_policy_eval(mdp, greedy, 0.0)[0] == 1.0);
}

TEST_CASE("hard-max iteration matches brute force on a tree") {
  Rng rng(4);
  const TabularMDP tree = build_synthetic_tree(6, rng);
  const auto res = hardmax_value_iteration(tree);
  CHECK(res.values[0] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(brute_force_best_return(tree, 0, 6) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(brute_force_best_return(tree, 3, 4) == doctest::Approx(res.values[3]).epsilon(1e-12));
}

TEST_CASE("value iteration reports non-convergence") {
  const TabularMDP mdp = random_mdp({.num_states = 6, .gamma = 0.99, .seed = 2});
  CHECK_THROWS_AS(softmax_value_iteration(mdp, 0.1, {.tol = 1e-12, .max_iters = 3}), ConvergenceError);
}

TEST_CASE("contraction and converse verifiers pass") {
  const TabularMDP mdp = random_mdp({.num_states = 10, .num_actions = 3, .stochasticity = 1.0, .gamma = 0.9, .seed = 6});
  CHECK(verify_contraction(mdp, 0.3, 20, 1).passed);
  const ConverseReport rep = verify_converse(mdp, 0.5, 1e-10, 2);
  CHECK(rep.solver_converged);
  CHECK(rep.passed);
  CHECK(rep.value_distance <= 1e-4);
  CHECK(rep.policy_distance <= 1e-4);
}

TEST_CASE("pinning a wrong policy row leaves a residual") {
  const TabularMDP mdp = random_mdp({.num_states = 6, .num_actions = 3, .stochasticity = 0.0, .gamma = 0.9, .seed = 8});
  const double tau = 0.5;
  const auto v = softmax_value_iteration(mdp, tau).values;
  const PolicyTable pi = boltzmann_policy(mdp, v, tau);
  std::vector<double> row(pi.row(0).begin(), pi.row(0).end());
  CHECK(consistency_floor_with_fixed_row(mdp, tau, 0, row) <= 1e-8);
  const std::size_t top = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  row[top] -= 0.05;
  row[(top + 1) % row.size()] += 0.05;
  CHECK(consistency_floor_with_fixed_row(mdp, tau, 0, row) >= 1e-4);
}

TEST_CASE("total variation") {
  const std::vector<double> p{0.5, 0.5, 0.0}, q{0.25, 0.25, 0.5};
  CHECK(total_variation(p, q) == doctest::Approx(0.5));
  CHECK(total_variation(p, p) == 0.0);
}
