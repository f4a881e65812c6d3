#pragma once

// Exact dynamic programming on TabularMDPs: softmax and hard-max value
// iteration, entropy-regularized policy evaluation, consistency residuals,
// and verifiers for the optimality/consistency characterization.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pcl/tabular_mdp.hpp"

namespace pcl {

using ValueTable = std::vector<double>;  // one entry per state, 0 at terminals

// Row-major (state, action).
struct QTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> q;

  double& at(int s, int a) { return q[static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions) + static_cast<std::size_t>(a)]; }
  double at(int s, int a) const { return q[static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions) + static_cast<std::size_t>(a)]; }
  std::span<const double> row(int s) const { return {q.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions), static_cast<std::size_t>(num_actions)}; }
  std::span<double> row(int s) { return {q.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions), static_cast<std::size_t>(num_actions)}; }
};

// Same layout as QTable; rows of terminal states are unused (left uniform).
using PolicyTable = QTable;

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct ValueIterationResult {
  ValueTable values;
  int iterations = 0;
  double residual = 0.0;               // sup-norm of B V - V at the returned V
  std::vector<double> residual_trace;  // ||B V_k - V_k|| for every sweep
  std::vector<int> greedy;             // hard-max only: lowest-index argmax per state
};

struct IterationOptions {
  double tol = 1e-10;
  int max_iters = 0;  // 0 derives a bound from the contraction rate
  std::optional<ValueTable> init;
};

// Q(s, a) = r(s, a) + gamma * E[V(s')]
QTable q_from_values(const TabularMDP& mdp, const ValueTable& v);

// Applies one softmax (tau > 0) or hard-max (tau == 0) Bellman backup.
ValueTable bellman_backup(const TabularMDP& mdp, const ValueTable& v, double tau);

// One application of the on-policy backup.
ValueTable on_policy_backup(const TabularMDP& mdp, const PolicyTable& pi, double tau, const ValueTable& v);

// Iterates the backup until ||B V - V||_inf <= tol; throws ConvergenceError otherwise.
ValueIterationResult softmax_value_iteration(const TabularMDP& mdp, double tau, const IterationOptions& opts = {});
ValueIterationResult hardmax_value_iteration(const TabularMDP& mdp, const IterationOptions& opts = {});

// pi(.|s) = f_tau(Q(s, .)) with Q built from v.
PolicyTable boltzmann_policy(const TabularMDP& mdp, const ValueTable& v, double tau);

// Fixed point of the on-policy backup
//   V(s) = sum_a pi(a|s) [r(s,a) - tau log pi(a|s) + gamma E V(s')].
// Throws std::invalid_argument if tau > 0 and pi has a zero entry on a non-terminal state.
ValueTable on_policy_eval(const TabularMDP& mdp, const PolicyTable& pi, double tau, double tol = 1e-12);

// H(s) = sum_a pi(a|s) [-log pi(a|s) + gamma E H(s')]
ValueTable discounted_entropy(const TabularMDP& mdp, const PolicyTable& pi, double tol = 1e-12);

// E_{s'|s,a}[-V(s) + gamma V(s') + r(s,a) - tau log pi(a|s)]
double consistency_residual(const TabularMDP& mdp, const ValueTable& v, const PolicyTable& pi, double tau, int s,
                            int a);

struct Path {
  std::vector<int> states;   // s_0 .. s_t (one more than actions)
  std::vector<int> actions;  // a_0 .. a_{t-1}
};

// -V(s_0) + gamma^t V(s_t) + sum_i gamma^i (r_i - tau log pi(a_i|s_i)) evaluated on the
// realized path, plus the expectation correction sum_i gamma^{i+1} (E V(s'|s_i,a_i) - V(s_{i+1})),
// so that the result is the expected multi-step residual of the realized action sequence.
// The correction vanishes on deterministic MDPs.
double path_residual(const TabularMDP& mdp, const ValueTable& v, const PolicyTable& pi, double tau, const Path& path);

// Samples a path of up to `length` steps from `start` following pi (stops at terminals).
Path sample_path(const TabularMDP& mdp, const PolicyTable& pi, int start, int length, Rng& rng);

// Exhaustive best undiscounted/discounted return over all action sequences of
// `horizon` steps from `start` on a deterministic MDP.
double brute_force_best_return(const TabularMDP& mdp, int start, int horizon);

struct ConverseReport {
  bool solver_converged = false;
  int solver_iterations = 0;
  double max_residual = 0.0;
  double value_distance = 0.0;  // ||V - V*||_inf
  double policy_distance = 0.0; // max_s TV(pi(.|s), pi*(.|s))
  double bound = 0.0;           // 10 * solver_tol / (1 - gamma)
  bool passed = false;
};

// Solves the one-step consistency equations for (V, pi) from a random start
// with a damped Gauss-Newton (Levenberg-Marquardt) iteration that knows nothing
// about softmax backups, then measures the distance to (V*, pi*).
ConverseReport verify_converse(const TabularMDP& mdp, double tau, double solver_tol, std::uint64_t seed,
                               std::optional<std::pair<ValueTable, PolicyTable>> init = std::nullopt);

// Fixes pi(.|state) to `row` and minimizes the squared one-step residuals over
// everything else; returns the smallest max |residual| reached.
// The search starts from the exact optimum.
double consistency_floor_with_fixed_row(const TabularMDP& mdp, double tau, int state, const std::vector<double>& row);

struct ContractionReport {
  int trials = 0;
  double worst_ratio_excess = 0.0;  // max over pairs of ||B V1 - B V2|| - gamma ||V1 - V2||
  double init_disagreement = 0.0;   // ||V*_a - V*_b|| from two random initializations
  bool passed = false;
};

ContractionReport verify_contraction(const TabularMDP& mdp, double tau, int trials, std::uint64_t seed);

// Total variation distance between two probability rows.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace pcl
