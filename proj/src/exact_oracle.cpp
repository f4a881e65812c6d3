#include "pcl/exact_oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "pcl/softmax.hpp"

namespace pcl {

namespace {

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

double sup_distance(const ValueTable& a, const ValueTable& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

int default_max_iters(const TabularMDP& mdp, double tau, double tol, const std::optional<ValueTable>& init) {
  const double gamma = mdp.gamma();
  if (gamma < 1.0) {
    double scale = mdp.max_abs_reward() + tau * std::log(static_cast<double>(mdp.num_actions())) + 1.0;
    if (init)
      for (double x : *init) scale = std::max(scale, std::fabs(x) * (1.0 - gamma) + 1.0);
    const double target = std::max(tol, 1e-300) * (1.0 - gamma) / (4.0 * scale);
    const double k = std::ceil(std::log(target) / std::log(gamma));
    return static_cast<int>(std::max(k, 1.0)) + 100;
  }
  // gamma = 1 is only well posed on acyclic MDPs, where the longest path bounds the sweeps.
  return mdp.num_states() + 2;
}

ValueTable initial_values(const TabularMDP& mdp, const IterationOptions& opts) {
  ValueTable v(idx(mdp.num_states()), 0.0);
  if (opts.init) {
    if (opts.init->size() != v.size()) throw std::invalid_argument("value iteration: init has wrong size");
    v = *opts.init;
  }
  for (int s = 0; s < mdp.num_states(); ++s)
    if (mdp.terminal(s)) v[idx(s)] = 0.0;
  return v;
}

ValueIterationResult iterate(const TabularMDP& mdp, double tau, const IterationOptions& opts) {
  ValueIterationResult out;
  out.values = initial_values(mdp, opts);
  const int max_iters = opts.max_iters > 0 ? opts.max_iters : default_max_iters(mdp, tau, opts.tol, opts.init);
  for (int k = 0; k <= max_iters; ++k) {
    ValueTable next = bellman_backup(mdp, out.values, tau);
    const double residual = sup_distance(next, out.values);
    out.residual_trace.push_back(residual);
    out.residual = residual;
    if (residual <= opts.tol) {
      out.iterations = k;
      return out;
    }
    out.values = std::move(next);
  }
  throw ConvergenceError("value iteration did not converge within " + std::to_string(max_iters) +
                             " sweeps (last residual " + std::to_string(out.residual) + ")",
                         out.residual);
}

}  // namespace

double total_variation(std::span<const double> p, std::span<const double> q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::fabs(p[i] - q[i]);
  return 0.5 * d;
}

QTable q_from_values(const TabularMDP& mdp, const ValueTable& v) {
  QTable q{mdp.num_states(), mdp.num_actions(), std::vector<double>(idx(mdp.num_states() * mdp.num_actions()), 0.0)};
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) q.at(s, a) = mdp.reward(s, a) + mdp.gamma() * mdp.expected(s, a, v);
  }
  return q;
}

ValueTable bellman_backup(const TabularMDP& mdp, const ValueTable& v, double tau) {
  ValueTable out(v.size(), 0.0);
  std::vector<double> q(idx(mdp.num_actions()));
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) q[idx(a)] = mdp.reward(s, a) + mdp.gamma() * mdp.expected(s, a, v);
    out[idx(s)] = tau > 0.0 ? softmax_value(q, tau) : hard_max(q).value;
  }
  return out;
}

ValueIterationResult softmax_value_iteration(const TabularMDP& mdp, double tau, const IterationOptions& opts) {
  if (!(tau > 0.0)) throw std::invalid_argument("softmax_value_iteration: tau must be positive");
  return iterate(mdp, tau, opts);
}

ValueIterationResult hardmax_value_iteration(const TabularMDP& mdp, const IterationOptions& opts) {
  ValueIterationResult out = iterate(mdp, 0.0, opts);
  const QTable q = q_from_values(mdp, out.values);
  out.greedy.assign(idx(mdp.num_states()), 0);
  for (int s = 0; s < mdp.num_states(); ++s)
    if (!mdp.terminal(s)) out.greedy[idx(s)] = static_cast<int>(hard_max(q.row(s)).index);
  return out;
}

PolicyTable boltzmann_policy(const TabularMDP& mdp, const ValueTable& v, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("boltzmann_policy: tau must be positive");
  PolicyTable pi = q_from_values(mdp, v);
  std::vector<double> probs;
  for (int s = 0; s < mdp.num_states(); ++s) {
    auto row = pi.row(s);
    if (mdp.terminal(s)) {
      std::fill(row.begin(), row.end(), 1.0 / mdp.num_actions());
      continue;
    }
    soft_indmax(row, tau, probs);
    std::copy(probs.begin(), probs.end(), row.begin());
  }
  return pi;
}

namespace {

void check_policy(const TabularMDP& mdp, const PolicyTable& pi, double tau, const char* where) {
  if (pi.num_states != mdp.num_states() || pi.num_actions != mdp.num_actions())
    throw std::invalid_argument(std::string(where) + ": policy shape mismatch");
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    if (!is_probability_vector(pi.row(s), 1e-10))
      throw std::invalid_argument(std::string(where) + ": policy row is not a probability vector");
    if (tau > 0.0)
      for (double p : pi.row(s))
        if (p <= 0.0) throw std::invalid_argument(std::string(where) + ": zero-probability action with tau > 0");
  }
}

// Per-state expected immediate term sum_a pi (r_weight * r - tau log pi).
std::vector<double> policy_rewards(const TabularMDP& mdp, const PolicyTable& pi, double tau, double reward_weight) {
  std::vector<double> out(idx(mdp.num_states()), 0.0);
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    double acc = 0.0;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double p = pi.at(s, a);
      if (p <= 0.0) continue;
      acc += p * (reward_weight * mdp.reward(s, a) - (tau > 0.0 ? tau * std::log(p) : 0.0));
    }
    out[idx(s)] = acc;
  }
  return out;
}

ValueTable solve_policy_values(const TabularMDP& mdp, const PolicyTable& pi, const std::vector<double>& immediate,
                               double tol) {
  const int n = mdp.num_states();
  const double gamma = mdp.gamma();
  if (n <= 2000) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int s = 0; s < n; ++s) {
      if (mdp.terminal(s)) continue;
      b(s) = immediate[idx(s)];
      for (int act = 0; act < mdp.num_actions(); ++act) {
        const double p = pi.at(s, act);
        if (p == 0.0) continue;
        for (const Successor& nx : mdp.successors(s, act))
          if (!mdp.terminal(nx.state)) a(s, nx.state) -= gamma * p * nx.prob;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
      Eigen::VectorXd x = lu.solve(b);
      ValueTable v(idx(n));
      for (int s = 0; s < n; ++s) v[idx(s)] = x(s);
      return v;
    }
  }
  // Large or singular (gamma = 1 with cycles) systems: Gauss-Seidel sweeps in
  // reverse index order, which finish in one sweep on forward-acyclic MDPs.
  ValueTable v(idx(n), 0.0);
  const int max_sweeps = gamma < 1.0 ? 100000 : n + 2;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (int s = n - 1; s >= 0; --s) {
      if (mdp.terminal(s)) continue;
      double acc = immediate[idx(s)];
      for (int act = 0; act < mdp.num_actions(); ++act) {
        const double p = pi.at(s, act);
        if (p != 0.0) acc += gamma * p * mdp.expected(s, act, v);
      }
      change = std::max(change, std::fabs(acc - v[idx(s)]));
      v[idx(s)] = acc;
    }
    if (change <= tol) return v;
  }
  throw ConvergenceError("on-policy evaluation did not converge", tol);
}

}  // namespace

ValueTable on_policy_backup(const TabularMDP& mdp, const PolicyTable& pi, double tau, const ValueTable& v) {
  check_policy(mdp, pi, tau, "on_policy_backup");
  const std::vector<double> immediate = policy_rewards(mdp, pi, tau, 1.0);
  ValueTable out(v.size(), 0.0);
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    double acc = immediate[idx(s)];
    for (int a = 0; a < mdp.num_actions(); ++a) acc += mdp.gamma() * pi.at(s, a) * mdp.expected(s, a, v);
    out[idx(s)] = acc;
  }
  return out;
}

ValueTable on_policy_eval(const TabularMDP& mdp, const PolicyTable& pi, double tau, double tol) {
  if (tau < 0.0) throw std::invalid_argument("on_policy_eval: tau must be non-negative");
  check_policy(mdp, pi, tau, "on_policy_eval");
  return solve_policy_values(mdp, pi, policy_rewards(mdp, pi, tau, 1.0), tol);
}

ValueTable discounted_entropy(const TabularMDP& mdp, const PolicyTable& pi, double tol) {
  check_policy(mdp, pi, 0.0, "discounted_entropy");
  return solve_policy_values(mdp, pi, policy_rewards(mdp, pi, 1.0, 0.0), tol);
}

double consistency_residual(const TabularMDP& mdp, const ValueTable& v, const PolicyTable& pi, double tau, int s,
                            int a) {
  return -v[idx(s)] + mdp.gamma() * mdp.expected(s, a, v) + mdp.reward(s, a) - tau * std::log(pi.at(s, a));
}

double path_residual(const TabularMDP& mdp, const ValueTable& v, const PolicyTable& pi, double tau, const Path& path) {
  if (path.states.size() != path.actions.size() + 1) throw std::invalid_argument("path_residual: malformed path");
  const double gamma = mdp.gamma();
  const std::size_t t = path.actions.size();
  double discount = 1.0;
  double total = -v[idx(path.states[0])];
  double correction = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const int s = path.states[i];
    const int a = path.actions[i];
    total += discount * (mdp.reward(s, a) - tau * std::log(pi.at(s, a)));
    correction += discount * gamma * (mdp.expected(s, a, v) - v[idx(path.states[i + 1])]);
    discount *= gamma;
  }
  total += discount * v[idx(path.states[t])];
  return total + correction;
}

Path sample_path(const TabularMDP& mdp, const PolicyTable& pi, int start, int length, Rng& rng) {
  Path p;
  p.states.push_back(start);
  int s = start;
  for (int i = 0; i < length && !mdp.terminal(s); ++i) {
    const int a = static_cast<int>(rng.categorical(pi.row(s)));
    const auto next = mdp.successors(s, a);
    std::vector<double> w;
    for (const Successor& n : next) w.push_back(n.prob);
    s = next[rng.categorical(w)].state;
    p.actions.push_back(a);
    p.states.push_back(s);
  }
  return p;
}

double brute_force_best_return(const TabularMDP& mdp, int start, int horizon) {
  if (!mdp.deterministic()) throw std::invalid_argument("brute_force_best_return: needs deterministic dynamics");
  std::function<double(int, int)> best = [&](int s, int remaining) -> double {
    if (remaining == 0 || mdp.terminal(s)) return 0.0;
    double b = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.num_actions(); ++a)
      b = std::max(b, mdp.reward(s, a) + mdp.gamma() * best(mdp.successors(s, a)[0].state, remaining - 1));
    return b;
  };
  return best(start, horizon);
}

namespace {

// Unknowns: V on non-terminal states, then logits (s, a >= 1) with logit (s, 0) pinned
// at zero, for every non-terminal state except `fixed_state`.
struct ConsistencySystem {
  const TabularMDP& mdp;
  double tau;
  int fixed_state;            // -1 if none
  std::vector<double> fixed_row;
  std::vector<int> v_index;   // state -> unknown index or -1
  std::vector<int> l_index;   // state -> first logit unknown or -1
  int unknowns = 0;
  int equations = 0;

  ConsistencySystem(const TabularMDP& m, double t, int fixed, std::vector<double> row)
      : mdp(m), tau(t), fixed_state(fixed), fixed_row(std::move(row)) {
    const int n = m.num_states();
    v_index.assign(idx(n), -1);
    l_index.assign(idx(n), -1);
    for (int s = 0; s < n; ++s)
      if (!m.terminal(s)) v_index[idx(s)] = unknowns++;
    for (int s = 0; s < n; ++s)
      if (!m.terminal(s) && s != fixed) {
        l_index[idx(s)] = unknowns;
        unknowns += m.num_actions() - 1;
      }
    for (int s = 0; s < n; ++s)
      if (!m.terminal(s)) equations += m.num_actions();
  }

  ValueTable values(const Eigen::VectorXd& x) const {
    ValueTable v(idx(mdp.num_states()), 0.0);
    for (int s = 0; s < mdp.num_states(); ++s)
      if (v_index[idx(s)] >= 0) v[idx(s)] = x(v_index[idx(s)]);
    return v;
  }

  PolicyTable policy(const Eigen::VectorXd& x) const {
    const int na = mdp.num_actions();
    PolicyTable pi{mdp.num_states(), na, std::vector<double>(idx(mdp.num_states() * na), 1.0 / na)};
    std::vector<double> logits(idx(na)), probs;
    for (int s = 0; s < mdp.num_states(); ++s) {
      if (mdp.terminal(s)) continue;
      if (s == fixed_state) {
        std::copy(fixed_row.begin(), fixed_row.end(), pi.row(s).begin());
        continue;
      }
      logits[0] = 0.0;
      for (int a = 1; a < na; ++a) logits[idx(a)] = x(l_index[idx(s)] + a - 1);
      soft_indmax(logits, 1.0, probs);
      std::copy(probs.begin(), probs.end(), pi.row(s).begin());
    }
    return pi;
  }

  Eigen::VectorXd encode(const ValueTable& v, const PolicyTable& pi) const {
    Eigen::VectorXd x(unknowns);
    for (int s = 0; s < mdp.num_states(); ++s) {
      if (v_index[idx(s)] >= 0) x(v_index[idx(s)]) = v[idx(s)];
      if (l_index[idx(s)] >= 0)
        for (int a = 1; a < mdp.num_actions(); ++a)
          x(l_index[idx(s)] + a - 1) = std::log(pi.at(s, a)) - std::log(pi.at(s, 0));
    }
    return x;
  }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& f, Eigen::MatrixXd* jac) const {
    const ValueTable v = values(x);
    const PolicyTable pi = policy(x);
    const int na = mdp.num_actions();
    f.resize(equations);
    if (jac) jac->setZero(equations, unknowns);
    int row = 0;
    for (int s = 0; s < mdp.num_states(); ++s) {
      if (mdp.terminal(s)) continue;
      for (int a = 0; a < na; ++a, ++row) {
        f(row) = consistency_residual(mdp, v, pi, tau, s, a);
        if (!jac) continue;
        (*jac)(row, v_index[idx(s)]) -= 1.0;
        for (const Successor& n : mdp.successors(s, a))
          if (v_index[idx(n.state)] >= 0) (*jac)(row, v_index[idx(n.state)]) += mdp.gamma() * n.prob;
        if (l_index[idx(s)] >= 0)
          for (int b = 1; b < na; ++b)
            (*jac)(row, l_index[idx(s)] + b - 1) = -tau * ((a == b ? 1.0 : 0.0) - pi.at(s, b));
      }
    }
  }
};

struct SolveResult {
  Eigen::VectorXd x;
  double max_residual;
  int iterations;
  bool converged;
};

SolveResult levenberg_marquardt(const ConsistencySystem& sys, Eigen::VectorXd x, double tol, int max_iters) {
  Eigen::VectorXd f, f_try;
  Eigen::MatrixXd jac;
  sys.evaluate(x, f, &jac);
  double cost = 0.5 * f.squaredNorm();
  double lambda = 1e-3;
  int it = 0;
  for (; it < max_iters && f.lpNorm<Eigen::Infinity>() > tol; ++it) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * f;
    bool improved = false;
    for (int attempt = 0; attempt < 60 && !improved; ++attempt) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal().array() += lambda;
      const Eigen::VectorXd step = lhs.ldlt().solve(-g);
      const Eigen::VectorXd x_try = x + step;
      sys.evaluate(x_try, f_try, nullptr);
      const double cost_try = 0.5 * f_try.squaredNorm();
      if (std::isfinite(cost_try) && cost_try < cost) {
        x = x_try;
        cost = cost_try;
        lambda = std::max(lambda / 3.0, 1e-15);
        improved = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) break;
    sys.evaluate(x, f, &jac);
  }
  const double max_res = f.lpNorm<Eigen::Infinity>();
  return {x, max_res, it, max_res <= tol};
}

}  // namespace

ConverseReport verify_converse(const TabularMDP& mdp, double tau, double solver_tol, std::uint64_t seed,
                               std::optional<std::pair<ValueTable, PolicyTable>> init) {
  if (!(tau > 0.0)) throw std::invalid_argument("verify_converse: tau must be positive");
  if (!(mdp.gamma() < 1.0)) throw std::invalid_argument("verify_converse: needs gamma < 1");
  ConsistencySystem sys(mdp, tau, -1, {});
  Eigen::VectorXd x(sys.unknowns);
  if (init) {
    x = sys.encode(init->first, init->second);
  } else {
    Rng rng(seed);
    const double scale = (mdp.max_abs_reward() + 1.0) / (1.0 - mdp.gamma());
    for (int s = 0; s < mdp.num_states(); ++s) {
      if (sys.v_index[idx(s)] >= 0) x(sys.v_index[idx(s)]) = rng.uniform(-scale, scale);
      if (sys.l_index[idx(s)] >= 0)
        for (int a = 1; a < mdp.num_actions(); ++a) x(sys.l_index[idx(s)] + a - 1) = rng.uniform(-2.0, 2.0);
    }
  }

  ConverseReport report;
  const SolveResult solved = levenberg_marquardt(sys, x, solver_tol, 500);
  report.solver_converged = solved.converged;
  report.solver_iterations = solved.iterations;
  report.max_residual = solved.max_residual;

  IterationOptions opts;
  opts.tol = 1e-13;
  const ValueTable v_star = softmax_value_iteration(mdp, tau, opts).values;
  const PolicyTable pi_star = boltzmann_policy(mdp, v_star, tau);
  const ValueTable v = sys.values(solved.x);
  const PolicyTable pi = sys.policy(solved.x);
  report.value_distance = sup_distance(v, v_star);
  for (int s = 0; s < mdp.num_states(); ++s)
    if (!mdp.terminal(s)) report.policy_distance = std::max(report.policy_distance, total_variation(pi.row(s), pi_star.row(s)));
  report.bound = 10.0 * solver_tol / (1.0 - mdp.gamma());
  report.passed = report.solver_converged && report.value_distance <= report.bound && report.policy_distance <= report.bound;
  return report;
}

double consistency_floor_with_fixed_row(const TabularMDP& mdp, double tau, int state, const std::vector<double>& row) {
  if (state < 0 || state >= mdp.num_states() || mdp.terminal(state))
    throw std::invalid_argument("consistency_floor_with_fixed_row: state must be non-terminal");
  if (static_cast<int>(row.size()) != mdp.num_actions() || !is_probability_vector(row, 1e-10))
    throw std::invalid_argument("consistency_floor_with_fixed_row: row must be a probability vector");
  IterationOptions opts;
  opts.tol = 1e-13;
  const ValueTable v_star = softmax_value_iteration(mdp, tau, opts).values;
  const PolicyTable pi_star = boltzmann_policy(mdp, v_star, tau);
  ConsistencySystem sys(mdp, tau, state, row);
  const SolveResult solved = levenberg_marquardt(sys, sys.encode(v_star, pi_star), 0.0, 200);
  return solved.max_residual;
}

ContractionReport verify_contraction(const TabularMDP& mdp, double tau, int trials, std::uint64_t seed) {
  if (!(mdp.gamma() < 1.0)) throw std::invalid_argument("verify_contraction: needs gamma < 1");
  ContractionReport report;
  report.trials = trials;
  Rng rng(seed);
  const double scale = 10.0 * (mdp.max_abs_reward() + 1.0);
  auto random_values = [&] {
    ValueTable v(idx(mdp.num_states()), 0.0);
    for (int s = 0; s < mdp.num_states(); ++s)
      if (!mdp.terminal(s)) v[idx(s)] = rng.uniform(-scale, scale);
    return v;
  };
  report.worst_ratio_excess = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const ValueTable v1 = random_values();
    const ValueTable v2 = random_values();
    const double lhs = sup_distance(bellman_backup(mdp, v1, tau), bellman_backup(mdp, v2, tau));
    report.worst_ratio_excess = std::max(report.worst_ratio_excess, lhs - mdp.gamma() * sup_distance(v1, v2));
  }
  if (trials == 0) report.worst_ratio_excess = 0.0;
  IterationOptions a, b;
  a.tol = b.tol = 1e-12;
  a.init = random_values();
  b.init = random_values();
  report.init_disagreement =
      sup_distance(softmax_value_iteration(mdp, tau, a).values, softmax_value_iteration(mdp, tau, b).values);
  report.passed = report.worst_ratio_excess <= 1e-12 && report.init_disagreement <= 1e-8;
  return report;
}

}  // namespace pcl
