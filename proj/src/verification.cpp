#include "pcl/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "pcl/consistency.hpp"
#include "pcl/environment.hpp"
#include "pcl/exact_oracle.hpp"
#include "pcl/replay_buffer.hpp"
#include "pcl/softmax.hpp"
#include "pcl/trainer.hpp"

namespace pcl {

bool VerifyReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

void VerifyReport::print(std::ostream& out) const {
  char line[256];
  std::snprintf(line, sizeof line, "%-40s %14s %14s  %s\n", "check", "max_residual", "limit", "result");
  out << line;
  for (const CheckRow& r : rows) {
    std::snprintf(line, sizeof line, "%-40s %14.6g %2s%12.3g  %s\n", r.check.c_str(), r.value, r.at_least ? ">=" : "<=",
                  r.limit, r.pass ? "PASS" : "FAIL");
    out << line;
  }
}

const std::vector<std::string>& verify_scopes() {
  static const std::vector<std::string> scopes{"softmax_core", "contraction", "consistency", "converse",
                                               "limits",       "losses",      "replay",      "all"};
  return scopes;
}

namespace {

// Collects the worst value of each named check across trials.
class Table {
 public:
  void upper(const std::string& name, double value, double limit) { record(name, value, limit, false); }
  void lower(const std::string& name, double value, double limit) { record(name, value, limit, true); }

  VerifyReport finish(int trials) {
    VerifyReport report;
    report.vacuous = trials == 0;
    for (CheckRow& r : rows_) r.pass = std::isfinite(r.value) && (r.at_least ? r.value >= r.limit : r.value <= r.limit);
    report.rows = std::move(rows_);
    return report;
  }

 private:
  void record(const std::string& name, double value, double limit, bool at_least) {
    auto it = std::find_if(rows_.begin(), rows_.end(), [&](const CheckRow& r) { return r.check == name; });
    if (it == rows_.end()) {
      rows_.push_back({name, value, limit, at_least, false});
      return;
    }
    if (std::isnan(value) || std::isnan(it->value)) {
      it->value = std::nan("");
    } else {
      it->value = at_least ? std::min(it->value, value) : std::max(it->value, value);
    }
  }

  std::vector<CheckRow> rows_;
};

double sup_distance(const ValueTable& a, const ValueTable& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

std::vector<double> dirichlet(std::size_t n, Rng& rng) {
  std::vector<double> p(n);
  double total = 0.0;
  for (double& x : p) total += (x = rng.exponential());
  for (double& x : p) x /= total;
  return p;
}

TabularMDP random_test_mdp(Rng& rng, int max_states, int max_actions, int num_terminal) {
  RandomMdpOptions o;
  o.num_states = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(max_states - 1)));
  o.num_actions = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(max_actions - 1)));
  o.stochasticity = 1.0;
  o.gamma = 0.9;
  o.num_terminal = std::min(num_terminal, o.num_states - 1);
  o.seed = rng.next();
  return random_mdp(o);
}

PolicyTable random_policy(const TabularMDP& mdp, Rng& rng) {
  PolicyTable pi{mdp.num_states(), mdp.num_actions(),
                 std::vector<double>(static_cast<std::size_t>(mdp.num_states() * mdp.num_actions()))};
  for (int s = 0; s < mdp.num_states(); ++s) {
    const auto p = dirichlet(static_cast<std::size_t>(mdp.num_actions()), rng);
    std::copy(p.begin(), p.end(), pi.row(s).begin());
  }
  return pi;
}

double policy_entropy(std::span<const double> log_probs) {
  double h = 0.0;
  for (double l : log_probs) h -= std::exp(l) * l;
  return h;
}

}  // namespace

std::vector<double> finite_difference(std::vector<double>& params, const std::function<double()>& f, double step) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = f();
    params[i] = saved - step;
    const double down = f();
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

GradientComparison compare_gradients(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                     double rel_tol, double abs_tol) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("compare_gradients: size mismatch");
  GradientComparison c;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double diff = std::fabs(analytic[i] - numeric[i]);
    const double scale = abs_tol + rel_tol * std::max(std::fabs(analytic[i]), std::fabs(numeric[i]));
    c.max_abs_diff = std::max(c.max_abs_diff, diff);
    c.worst_ratio = std::max(c.worst_ratio, std::isfinite(diff) ? diff / scale : INFINITY);
  }
  return c;
}

double chi_square_upper_tail(double statistic, int dof) {
  if (dof < 1) throw std::invalid_argument("chi_square_upper_tail: dof must be >= 1");
  if (statistic <= 0.0) return 1.0;
  const double k = dof;
  const double z = (std::cbrt(statistic / k) - (1.0 - 2.0 / (9.0 * k))) / std::sqrt(2.0 / (9.0 * k));
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

VerifyReport verify_softmax_core(int trials, std::uint64_t seed) {
  Table t;
  Rng rng(seed);
  const double taus[] = {0.01, 0.1, 1.0};
  std::vector<double> f, logf;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t n = 1 + rng.index(8);
    const double scale = rng.uniform() < 0.5 ? 1.0 : 20.0;
    std::vector<double> q(n), shifted(n), q2(n);
    for (double& x : q) x = rng.uniform(-scale, scale);
    const double c = rng.uniform(-10.0, 10.0);
    for (std::size_t i = 0; i < n; ++i) {
      shifted[i] = q[i] + c;
      q2[i] = q[i] + rng.uniform(-1.0, 1.0);
    }
    const double qmax = hard_max(q).value;
    for (double tau : taus) {
      const double value = softmax_value(q, tau);
      soft_indmax(q, tau, f);
      log_soft_indmax(q, tau, logf);

      double inner = 0.0;
      for (std::size_t i = 0; i < n; ++i) inner += f[i] * q[i];
      t.upper("variational_identity_at_indmax", std::fabs(value - (inner + tau * entropy(f))), 1e-10);
      const auto p = dirichlet(n, rng);
      double other = 0.0;
      for (std::size_t i = 0; i < n; ++i) other += p[i] * q[i];
      t.upper("variational_upper_bound_excess", std::max(0.0, other + tau * entropy(p) - value), 1e-10);

      double one_shot = 0.0;
      for (std::size_t i = 0; i < n; ++i) one_shot = std::max(one_shot, std::fabs(q[i] - tau * logf[i] - value));
      t.upper("one_shot_consistency", one_shot, 1e-10);

      t.upper("translation", std::fabs(softmax_value(shifted, tau) - value - c), 1e-10);

      const double violation =
          std::max({0.0, qmax - value, value - qmax - tau * std::log(static_cast<double>(n))});
      t.upper("bounds_violation", violation, 1e-10);

      double dist = 0.0;
      for (std::size_t i = 0; i < n; ++i) dist = std::max(dist, std::fabs(q[i] - q2[i]));
      t.upper("sup_norm_contraction_excess", std::max(0.0, std::fabs(softmax_value(q2, tau) - value) - dist), 1e-10);
    }
  }
  return t.finish(trials);
}

VerifyReport verify_contraction_suite(int trials, std::uint64_t seed) {
  Table t;
  Rng rng(seed);
  const double taus[] = {0.01, 0.1, 1.0};
  for (int trial = 0; trial < trials; ++trial) {
    const TabularMDP mdp = random_test_mdp(rng, 20, 5, trial % 3 == 0 ? 1 : 0);
    const double tau = taus[trial % 3];
    const ContractionReport report = verify_contraction(mdp, tau, 20, rng.next());
    t.upper("bellman_contraction_excess", report.worst_ratio_excess, 1e-12);
    t.upper("two_initializations_disagree", report.init_disagreement, 1e-8);

    IterationOptions opts;
    opts.tol = 1e-11;
    const auto trace = softmax_value_iteration(mdp, tau, opts).residual_trace;
    double decay = 0.0;
    for (std::size_t k = 1; k < trace.size(); ++k) decay = std::max(decay, trace[k] - mdp.gamma() * trace[k - 1]);
    t.upper("geometric_decay_excess", decay, 1e-12);

    const PolicyTable pi = random_policy(mdp, rng);
    const ValueTable fixed = on_policy_eval(mdp, pi, tau);
    ValueTable v(fixed.size(), 0.0);
    for (int s = 0; s < mdp.num_states(); ++s)
      if (!mdp.terminal(s)) v[static_cast<std::size_t>(s)] = rng.uniform(-20.0, 20.0);
    const double d0 = sup_distance(v, fixed);
    double excess = 0.0, factor = 1.0;
    for (int k = 1; k <= 10; ++k) {
      v = on_policy_backup(mdp, pi, tau, v);
      factor *= mdp.gamma();
      excess = std::max(excess, sup_distance(v, fixed) - factor * d0);
    }
    t.upper("on_policy_contraction_excess", excess, 1e-9);
  }
  return t.finish(trials);
}

VerifyReport verify_consistency_suite(int trials, std::uint64_t seed) {
  Table t;
  Rng rng(seed);
  const double taus[] = {0.01, 0.1, 1.0};
  for (int trial = 0; trial < trials; ++trial) {
    const TabularMDP mdp = random_test_mdp(rng, 20, 5, trial % 2);
    const double tau = taus[trial % 3];
    IterationOptions opts;
    opts.tol = 1e-12;
    const ValueTable v_star = softmax_value_iteration(mdp, tau, opts).values;
    const PolicyTable pi_star = boltzmann_policy(mdp, v_star, tau);

    double one_step = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s)
      if (!mdp.terminal(s))
        for (int a = 0; a < mdp.num_actions(); ++a)
          one_step = std::max(one_step, std::fabs(consistency_residual(mdp, v_star, pi_star, tau, s, a)));
    t.upper("one_step_residual_at_optimum", one_step, 1e-9);

    std::vector<int> starts;
    for (int s = 0; s < mdp.num_states(); ++s)
      if (!mdp.terminal(s)) starts.push_back(s);
    double multi = 0.0;
    for (int k = 0; k < 100; ++k) {
      const int length = 2 + static_cast<int>(rng.index(9));
      const Path path = sample_path(mdp, pi_star, starts[rng.index(starts.size())], length, rng);
      multi = std::max(multi, std::fabs(path_residual(mdp, v_star, pi_star, tau, path)));
    }
    t.upper("path_residual_at_optimum", multi, 1e-8);

    // Telescoping: path residual equals the discounted sum of one-step residuals, for any (V, pi).
    ValueTable v(v_star.size(), 0.0);
    for (int s = 0; s < mdp.num_states(); ++s)
      if (!mdp.terminal(s)) v[static_cast<std::size_t>(s)] = rng.uniform(-5.0, 5.0);
    const PolicyTable pi = random_policy(mdp, rng);
    double telescoping = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Path path = sample_path(mdp, pi, starts[rng.index(starts.size())], 1 + static_cast<int>(rng.index(10)), rng);
      double sum = 0.0, discount = 1.0;
      for (std::size_t i = 0; i < path.actions.size(); ++i) {
        sum += discount * consistency_residual(mdp, v, pi, tau, path.states[i], path.actions[i]);
        discount *= mdp.gamma();
      }
      telescoping = std::max(telescoping, std::fabs(sum - path_residual(mdp, v, pi, tau, path)));
    }
    t.upper("path_residual_telescoping", telescoping, 1e-9);

    t.upper("on_policy_value_of_optimum", sup_distance(on_policy_eval(mdp, pi_star, tau), v_star), 1e-8);
    double improvement = -INFINITY, decomposition = 0.0;
    for (int k = 0; k < 100; ++k) {
      const PolicyTable other = random_policy(mdp, rng);
      const ValueTable reg = on_policy_eval(mdp, other, tau);
      for (std::size_t s = 0; s < reg.size(); ++s) improvement = std::max(improvement, reg[s] - v_star[s]);
      if (k < 5) {
        const ValueTable plain = on_policy_eval(mdp, other, 0.0);
        const ValueTable ent = discounted_entropy(mdp, other);
        for (std::size_t s = 0; s < reg.size(); ++s)
          decomposition = std::max(decomposition, std::fabs(reg[s] - plain[s] - tau * ent[s]));
      }
    }
    t.upper("random_policy_exceeds_optimum", improvement, 1e-8);
    t.upper("entropy_decomposition", decomposition, 1e-9);
  }
  return t.finish(trials);
}

VerifyReport verify_converse_suite(int trials, std::uint64_t seed) {
  Table t;
  Rng rng(seed);
  const double taus[] = {0.1, 0.5, 1.0};
  for (int trial = 0; trial < trials; ++trial) {
    RandomMdpOptions o;
    o.num_states = 10;
    o.num_actions = 2 + static_cast<int>(rng.index(3));
    o.gamma = 0.9;
    o.seed = rng.next();
    const TabularMDP mdp = random_mdp(o);
    const double tau = taus[trial % 3];

    const ConverseReport report = verify_converse(mdp, tau, 1e-10, rng.next());
    t.upper("converse_solver_residual", report.max_residual, 1e-10);
    t.upper("converse_value_distance", report.value_distance, 1e-4);
    t.upper("converse_policy_distance", report.policy_distance, 1e-4);

    // Move 1e-2 of probability mass between two actions at one state and pin that row.
    IterationOptions opts;
    opts.tol = 1e-13;
    const PolicyTable pi_star = boltzmann_policy(mdp, softmax_value_iteration(mdp, tau, opts).values, tau);
    const int state = static_cast<int>(rng.index(static_cast<std::size_t>(mdp.num_states())));
    std::vector<double> row(pi_star.row(state).begin(), pi_star.row(state).end());
    const auto hi = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const std::size_t lo = hi == 0 ? 1 : 0;
    row[hi] -= 1e-2;
    row[lo] += 1e-2;
    t.lower("injected_policy_error_residual", consistency_floor_with_fixed_row(mdp, tau, state, row), 1e-4);
  }
  return t.finish(trials);
}

VerifyReport verify_limits_suite(int trials, std::uint64_t seed) {
  Table t;
  Rng rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    const TabularMDP mdp = random_test_mdp(rng, 20, 5, trial % 2);
    IterationOptions opts;
    opts.tol = 1e-11;
    const ValueTable soft = softmax_value_iteration(mdp, 1e-4, opts).values;
    const ValueTable hard = hardmax_value_iteration(mdp, opts).values;
    const double bound = 1e-4 * std::log(static_cast<double>(mdp.num_actions())) / (1.0 - mdp.gamma());
    t.upper("small_tau_gap_over_bound", sup_distance(soft, hard) / bound, 1.0);

    auto shared = std::make_shared<const TabularMDP>(mdp);
    TabularEnv env(shared, 15);
    TabularModel model(mdp.num_states(), mdp.num_actions());
    for (double& x : model.policy_params()) x = rng.uniform(-2.0, 2.0);
    for (double& x : model.value_params()) x = rng.uniform(-2.0, 2.0);
    const double tau = 0.1 * (1 + trial % 5);
    TabularUnifiedModel unified(mdp.num_states(), mdp.num_actions(), tau);
    for (double& x : unified.policy_params()) x = rng.uniform(-2.0, 2.0);

    double mismatches = 0.0, unified_gap = 0.0;
    for (int k = 0; k < 5; ++k) {
      const Episode ep = sample_episode(model, env, rng.next(), rng, 15);
      LossConfig cfg{0.0, rng.uniform() < 0.5 ? 1.0 : 0.9, 1 + static_cast<int>(rng.index(5)), k % 2 == 0};
      const EpisodeForward fwd = model.forward(ep);
      for (const WindowView& w : episode_windows(ep, cfg))
        if (soft_consistency(w, fwd, cfg) != a2c_advantage(w, fwd, cfg)) mismatches += 1.0;

      LossConfig one{tau, cfg.gamma, 1, false};
      const EpisodeForward ufwd = unified.forward(ep);
      for (const WindowView& w : episode_windows(ep, one)) {
        const int s = ep.observations[w.start];
        const int next = ep.observations[w.start + 1];
        const bool end = ep.terminated && w.start + 1 == ep.length();
        const double v_next = end ? 0.0 : softmax_value(unified.q(next), tau);
        const double target = ep.rewards[w.start] + one.gamma * v_next - unified.q(s)[static_cast<std::size_t>(ep.actions[w.start])];
        unified_gap = std::max(unified_gap, std::fabs(soft_consistency(w, ufwd, one) - target));
      }
    }
    t.upper("zero_tau_consistency_vs_advantage_bitwise", mismatches, 0.0);
    t.upper("unified_single_step_td_identity", unified_gap, 1e-12);
  }
  return t.finish(trials);
}

namespace {

struct WindowTerms {
  WindowView window;
  double error;
  bool terminal_end;
};

std::vector<WindowTerms> frozen_errors(const Episode& ep, const PolicyValueModel& model, const LossConfig& cfg,
                                       bool advantage) {
  const EpisodeForward fwd = model.forward(ep);
  std::vector<WindowTerms> out;
  for (const WindowView& w : episode_windows(ep, cfg)) {
    const double e = advantage ? a2c_advantage(w, fwd, cfg) : soft_consistency(w, fwd, cfg);
    out.push_back({w, e, ep.terminated && w.start + w.length == ep.length()});
  }
  return out;
}

// sum_w C_w [policy_weight * sum_j gamma^j log pi(a_{t+j}|s_{t+j}) + value_weight (V(s_t) - gamma^d' V(s_end))]
// with the errors C_w held fixed.
double pcl_surrogate(const Episode& ep, const PolicyValueModel& model, const LossConfig& cfg,
                     const std::vector<WindowTerms>& terms, double policy_weight, double value_weight) {
  const EpisodeForward fwd = model.forward(ep);
  double total = 0.0;
  for (const WindowTerms& wt : terms) {
    double logp = 0.0, discount = 1.0;
    for (std::size_t j = 0; j < wt.window.length; ++j) {
      const std::size_t step = wt.window.start + j;
      logp += discount * fwd.log_policy(step)[static_cast<std::size_t>(ep.actions[step])];
      discount *= cfg.gamma;
    }
    double value = fwd.values[wt.window.start];
    if (!wt.terminal_end) value -= discount * fwd.values[wt.window.start + wt.window.length];
    total += wt.error * (policy_weight * logp + value_weight * value);
  }
  return total;
}

// sum_t A_t (log pi(a_t|s_t) + V(s_t)) + bonus * sum_t H(pi(.|s_t)) with A_t held fixed.
double a2c_surrogate(const Episode& ep, const PolicyValueModel& model, const std::vector<WindowTerms>& terms,
                     double bonus) {
  const EpisodeForward fwd = model.forward(ep);
  double total = 0.0;
  for (const WindowTerms& wt : terms) {
    const std::size_t t0 = wt.window.start;
    total += wt.error * (fwd.log_policy(t0)[static_cast<std::size_t>(ep.actions[t0])] + fwd.values[t0]);
  }
  for (std::size_t t0 = 0; t0 < ep.length(); ++t0) total += bonus * policy_entropy(fwd.log_policy(t0));
  return total;
}

std::vector<double> scaled(const std::vector<double>& v, double factor) {
  std::vector<double> out(v);
  for (double& x : out) x *= factor;
  return out;
}

void check_pcl(Table& t, const std::string& tag, PolicyValueModel& model, const Episode& ep, const LossConfig& cfg) {
  GradAccumulator acc = model.make_accumulator();
  acc.zero();
  pcl_gradients(ep, model, cfg, acc);
  const auto windows = episode_windows(ep, cfg);
  auto objective = [&] { return pcl_objective(windows, model, cfg); };
  t.upper("pcl_gradient_" + tag + "_policy",
          compare_gradients(scaled(acc.policy, -cfg.tau), finite_difference(model.policy_params(), objective)).worst_ratio,
          1.0);
  t.upper("pcl_gradient_" + tag + "_value",
          compare_gradients(scaled(acc.value, -1.0), finite_difference(model.value_params(), objective)).worst_ratio, 1.0);
}

void check_unified(Table& t, const std::string& tag, UnifiedQModel& model, const Episode& ep, const LossConfig& cfg) {
  const auto windows = episode_windows(ep, cfg);
  auto objective = [&] { return pcl_objective(windows, model, cfg); };
  GradAccumulator acc = model.make_accumulator();
  acc.zero();
  unified_pcl_gradients(ep, model, cfg, cfg.tau, 1.0, acc);
  t.upper("unified_gradient_" + tag + "_objective",
          compare_gradients(scaled(acc.policy, -1.0), finite_difference(model.policy_params(), objective)).worst_ratio,
          1.0);

  const auto terms = frozen_errors(ep, model, cfg, false);
  for (int part = 0; part < 2; ++part) {
    const double pw = part == 0 ? 1.0 : 0.0;
    acc.zero();
    unified_pcl_gradients(ep, model, cfg, pw, 1.0 - pw, acc);
    auto surrogate = [&] { return pcl_surrogate(ep, model, cfg, terms, pw, 1.0 - pw); };
    t.upper("unified_gradient_" + tag + (part == 0 ? "_policy_term" : "_value_term"),
            compare_gradients(acc.policy, finite_difference(model.policy_params(), surrogate)).worst_ratio, 1.0);
  }
}

void check_a2c(Table& t, const std::string& tag, PolicyValueModel& model, const Episode& ep, const LossConfig& cfg,
               double bonus) {
  GradAccumulator acc = model.make_accumulator();
  acc.zero();
  a2c_gradients(ep, model, cfg, acc, bonus);
  const auto terms = frozen_errors(ep, model, cfg, true);
  auto surrogate = [&] { return a2c_surrogate(ep, model, terms, bonus); };
  t.upper("a2c_gradient_" + tag + "_policy",
          compare_gradients(acc.policy, finite_difference(model.policy_params(), surrogate)).worst_ratio, 1.0);
  t.upper("a2c_gradient_" + tag + "_value",
          compare_gradients(acc.value, finite_difference(model.value_params(), surrogate)).worst_ratio, 1.0);
}

}  // namespace

VerifyReport verify_losses_suite(int trials, std::uint64_t seed) {
  Table t;
  Rng rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    const TabularMDP mdp = random_test_mdp(rng, 8, 3, 1 + trial % 2);
    auto shared = std::make_shared<const TabularMDP>(mdp);
    TabularEnv env(shared, 12);
    const int S = mdp.num_states(), A = mdp.num_actions();
    const double tau = rng.uniform(0.05, 1.0);
    LossConfig cfg{tau, trial % 2 == 0 ? 1.0 : 0.9, 1 + static_cast<int>(rng.index(4)), trial % 3 == 0};

    TabularModel tabular(S, A);
    for (double& x : tabular.policy_params()) x = rng.uniform(-1.0, 1.0);
    for (double& x : tabular.value_params()) x = rng.uniform(-1.0, 1.0);
    RecurrentModel recurrent(S, A, 8, rng.next());
    TabularUnifiedModel unified_tab(S, A, tau);
    for (double& x : unified_tab.policy_params()) x = rng.uniform(-1.0, 1.0);
    RecurrentUnifiedModel unified_rec(S, A, 8, tau, rng.next());

    const Episode ep = sample_episode(tabular, env, rng.next(), rng, 12);
    check_pcl(t, "tabular", tabular, ep, cfg);
    check_pcl(t, "recurrent", recurrent, ep, cfg);
    check_unified(t, "tabular", unified_tab, ep, cfg);
    check_unified(t, "recurrent", unified_rec, ep, cfg);
    check_a2c(t, "tabular", tabular, ep, cfg, tau);
    check_a2c(t, "recurrent", recurrent, ep, cfg, tau);
  }
  return t.finish(trials);
}

namespace {

Episode one_step_episode(double reward) {
  Episode ep;
  ep.observations = {0, 0};
  ep.actions = {0};
  ep.rewards = {reward};
  ep.terminated = true;
  return ep;
}

std::vector<std::uint64_t> regular_ids(const ReplayBuffer& buffer) {
  std::vector<std::uint64_t> ids;
  for (std::size_t i = 0; i < buffer.size(); ++i)
    if (!buffer.entry(i).pinned) ids.push_back(buffer.entry(i).insertion_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

VerifyReport verify_replay_suite(int trials, std::uint64_t seed, long draws) {
  Table t;
  Rng rng(seed);
  constexpr int kRegular = 8;
  std::vector<double> eviction_counts(kRegular + 1, 0.0);
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t n = 5 + rng.index(26);
    const double alpha = rng.uniform(0.0, 2.0);
    ReplayBuffer buffer({n, alpha, 0.1});
    const std::size_t pinned = rng.index(3);
    for (std::size_t i = 0; i < n + 5; ++i) buffer.insert(one_step_episode(rng.uniform(-3.0, 3.0)), rng, i < pinned);

    // Formula written out independently of the buffer's sum tree.
    const std::size_t size = buffer.size();
    double shift = -INFINITY;
    for (std::size_t i = 0; i < size; ++i) shift = std::max(shift, alpha * buffer.entry(i).total_reward);
    std::vector<double> expected(size);
    double z = 0.0;
    for (std::size_t i = 0; i < size; ++i) z += std::exp(alpha * buffer.entry(i).total_reward - shift);
    for (std::size_t i = 0; i < size; ++i)
      expected[i] = 0.1 / static_cast<double>(size) + 0.9 * std::exp(alpha * buffer.entry(i).total_reward - shift) / z;
    const auto probs = buffer.probabilities();
    double formula_gap = 0.0;
    for (std::size_t i = 0; i < size; ++i) formula_gap = std::max(formula_gap, std::fabs(probs[i] - expected[i]));
    t.upper("sampling_probabilities_formula", formula_gap, 1e-12);

    std::vector<double> counts(size, 0.0);
    for (long k = 0; k < draws; ++k) counts[buffer.sample_index(rng)] += 1.0;
    double tv = 0.0;
    for (std::size_t i = 0; i < size; ++i) tv += std::fabs(counts[i] / static_cast<double>(draws) - expected[i]);
    t.upper("sampling_total_variation", 0.5 * tv, 0.005);

    // Pinned entries survive 1e4 evictions.
    ReplayBuffer small({8, 1.0, 0.1});
    for (int i = 0; i < 3; ++i) small.insert(one_step_episode(-5.0), rng, true);
    for (int i = 0; i < 10005; ++i) small.insert(one_step_episode(rng.uniform(-1.0, 1.0)), rng);
    double lost = 0.0;
    for (std::uint64_t id = 0; id < 3; ++id) {
      bool found = false;
      for (std::size_t i = 0; i < small.size(); ++i)
        found = found || (small.entry(i).insertion_id == id && small.entry(i).pinned);
      if (!found) lost += 1.0;
    }
    t.upper("pinned_entries_lost", lost, 0.0);

    // Eviction victim rank among the regular entries plus the newcomer.
    ReplayBuffer ev({kRegular + 2, 1.0, 0.1});
    for (int i = 0; i < 2; ++i) ev.insert(one_step_episode(0.0), rng, true);
    for (int i = 0; i < kRegular; ++i) ev.insert(one_step_episode(rng.uniform(-1.0, 1.0)), rng);
    for (int i = 0; i < 10000; ++i) {
      const auto before = regular_ids(ev);
      ev.insert(one_step_episode(rng.uniform(-1.0, 1.0)), rng);
      const auto after = regular_ids(ev);
      std::size_t rank = kRegular;
      for (std::size_t r = 0; r < before.size(); ++r)
        if (!std::binary_search(after.begin(), after.end(), before[r])) rank = r;
      eviction_counts[rank] += 1.0;
    }
  }
  if (trials > 0) {
    double total = 0.0, stat = 0.0;
    for (double c : eviction_counts) total += c;
    const double e = total / static_cast<double>(eviction_counts.size());
    for (double c : eviction_counts) stat += (c - e) * (c - e) / e;
    t.lower("uniform_eviction_chi_square_p", chi_square_upper_tail(stat, kRegular), 0.001);
  }
  return t.finish(trials);
}

VerifyReport run_verification(std::string_view scope, int trials, std::uint64_t seed) {
  if (trials < 0) throw std::invalid_argument("verify: trials must be >= 0");
  if (scope == "softmax_core") return verify_softmax_core(trials, seed);
  if (scope == "contraction") return verify_contraction_suite(trials, seed);
  if (scope == "consistency") return verify_consistency_suite(trials, seed);
  if (scope == "converse") return verify_converse_suite(trials, seed);
  if (scope == "limits") return verify_limits_suite(trials, seed);
  if (scope == "losses") return verify_losses_suite(trials, seed);
  if (scope == "replay") return verify_replay_suite(trials, seed);
  if (scope == "all") {
    VerifyReport all;
    all.vacuous = trials == 0;
    for (const std::string& s : verify_scopes()) {
      if (s == "all") continue;
      VerifyReport part = run_verification(s, trials, seed);
      for (CheckRow& r : part.rows) {
        r.check = s + "/" + r.check;
        all.rows.push_back(std::move(r));
      }
    }
    return all;
  }
  throw std::invalid_argument("verify: unknown scope '" + std::string(scope) + "'");
}

}  // namespace pcl
