// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset, e.g. `acceptance 1 2 11`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pcl/consistency.hpp"
#include "pcl/exact_oracle.hpp"
#include "pcl/harness.hpp"
#include "pcl/trainer.hpp"
#include "pcl/verification.hpp"

using namespace pcl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Folds a verification report into one outcome; the worst failing row is named.
Outcome from_report(const VerifyReport& report) {
  Outcome o{report.passed() && !report.rows.empty(), ""};
  for (const CheckRow& row : report.rows) {
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += row.check + "=" + fmt(row.value) + (row.at_least ? ">=" : "<=") + fmt(row.limit);
    if (!row.pass) o.detail += " FAILED";
  }
  return o;
}

Outcome with_time_limit(Outcome o, double elapsed, double limit) {
  if (elapsed > limit) {
    o.pass = false;
    o.detail += "; runtime " + fmt(elapsed) + "s over " + fmt(limit) + "s";
  }
  return o;
}

Outcome softmax_suite() {
  const auto start = std::chrono::steady_clock::now();
  return with_time_limit(from_report(verify_softmax_core(1000, 101)), seconds_since(start), 5.0);
}

Outcome contraction() {
  const auto start = std::chrono::steady_clock::now();
  return with_time_limit(from_report(verify_contraction_suite(50, 202)), seconds_since(start), 30.0);
}

Outcome consistency_at_optimum() { return from_report(verify_consistency_suite(20, 303)); }

Outcome converse() { return from_report(verify_converse_suite(10, 404)); }

Outcome limits() { return from_report(verify_limits_suite(20, 505)); }

Outcome gradients() {
  const auto start = std::chrono::steady_clock::now();
  return with_time_limit(from_report(verify_losses_suite(10, 606)), seconds_since(start), 60.0);
}

// Sampled backups on deterministic MDPs and expected backups on stochastic ones:
// sampled backups on a stochastic kernel only approach Q* at the Robbins-Monro rate.
Outcome soft_q_learning() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const bool stochastic = k % 2 == 1;
    const TabularMDP mdp = random_mdp({.num_states = 10,
                                       .num_actions = 3,
                                       .stochasticity = stochastic ? 1.0 : 0.0,
                                       .gamma = 0.9,
                                       .num_terminal = 1,
                                       .seed = 700 + static_cast<std::uint64_t>(k)});
    TabularQOptions opts;
    opts.tau = 0.1 * (1 + k % 3);
    opts.updates = 400000;
    opts.sampled = !stochastic;
    opts.seed = static_cast<std::uint64_t>(k);
    const QTable q = train_tabular_q(mdp, opts, true);
    IterationOptions vi;
    vi.tol = 1e-13;
    const QTable exact = q_from_values(mdp, softmax_value_iteration(mdp, opts.tau, vi).values);
    for (int s = 0; s < mdp.num_states(); ++s) {
      if (mdp.terminal(s)) continue;
      for (int a = 0; a < mdp.num_actions(); ++a) worst = std::max(worst, std::fabs(q.at(s, a) - exact.at(s, a)));
    }
  }
  Outcome o{worst <= 1e-3, "max |Q - Q*| over 10 MDPs = " + fmt(worst) + " <= 0.001"};
  return with_time_limit(o, seconds_since(start), 30.0);
}

Outcome replay() { return from_report(verify_replay_suite(3, 808, 1000000)); }

// Mean over seeds of the final 100-episode average reward on depth-20 trees.
double tree_mean(Algorithm algorithm, const std::string& overrides, std::string& detail) {
  std::istringstream in("task = tree\ntree_depth = 20\nseeds = 0-9\nrollout = 3\nbatch_size = 10\ngamma = 1.0\n"
                        "buffer_capacity = 10000\nreplay_alpha = 1\noptimizer = sgd\niterations = 50000\n"
                        "eval_period = 50000\n" +
                        overrides);
  ExperimentConfig config = ExperimentConfig::parse(in, "criterion-9");
  config.algorithm = algorithm;
  const ExperimentWorld world(config);
  double total = 0.0;
  for (std::uint64_t seed : config.seeds) {
    const RunResult run = run_experiment(config, world, seed);
    total += run.metrics.back().avg_reward;
    detail += " " + fmt(run.metrics.back().avg_reward);
  }
  return total / static_cast<double>(config.seeds.size());
}

// Best points of the tree grid, found by sweeping (lr_policy, critic_weight, tau).
constexpr const char* kPclPoint = "lr_policy = 0.01\ncritic_weight = 1\ntau = 0.05\n";
constexpr const char* kUnifiedPoint = "lr_policy = 0.01\ncritic_weight = 0.1\ntau = 0.5\n";

Outcome synthetic_tree() {
  const auto start = std::chrono::steady_clock::now();
  std::string pcl_runs, unified_runs;
  const double pcl = tree_mean(Algorithm::Pcl, kPclPoint, pcl_runs);
  const double unified = tree_mean(Algorithm::UnifiedPcl, kUnifiedPoint, unified_runs);
  Outcome o{pcl >= 18.0 && unified >= 17.0, "PCL mean " + fmt(pcl) + " >= 18 (runs" + pcl_runs + "); Unified mean " +
                                                fmt(unified) + " >= 17 (runs" + unified_runs + ")"};
  return with_time_limit(o, seconds_since(start), 1800.0);
}

// Iterations until held-out episodes reach 95% of the target length, or -1.
int copy_iterations_to_threshold(bool seeded, std::uint64_t seed, int budget) {
  std::istringstream in("task = copy\nalgorithm = pcl\nhidden = 32\nrollout = 10\noptimizer = adam\n"
                        "lr_policy = 0.005\ncritic_weight = 1\ntau = 0.05\ngamma = 1.0\nreplay_alpha = 0.5\n"
                        "batch_size = 20\nmin_length = 2\ninitial_max_length = 2\nmax_length = 10\n"
                        "buffer_capacity = 100000\nclip_norm = 10\n");
  ExperimentConfig config = ExperimentConfig::parse(in, "criterion-10");
  config.hp.iterations = budget;
  config.hp.eval_period = 10;
  config.hp.seed = seed;
  const ExperimentWorld world(config);
  auto model = world.make_model(config, seed);

  AlgorithmicConfig held_out = config.algo;
  held_out.task = AlgoTask::Copy;
  held_out.initial_max_length = held_out.max_length;
  AlgorithmicEnv eval_env(held_out);

  TrainOptions options;
  if (seeded) options.experts = world.experts(10, 99 + seed);
  int reached = -1;
  options.stop = [&](const RunMetrics& m) {
    const EvalResult r = evaluate(*model, eval_env, 100, 1000000007ULL);
    if (r.mean_reward >= 0.95 * r.mean_max_reward) reached = m.iteration;
    return reached >= 0;
  };
  train_pcl(world.env_factory(), *model, config.hp, options);
  return reached;
}

// Five seeds per arm; the comparison uses mean iterations to the threshold.
Outcome copy_task() {
  const auto start = std::chrono::steady_clock::now();
  const int budget = 5000;
  double plain_total = 0.0, seeded_total = 0.0;
  bool all_reached = true;
  std::string plain_runs, seeded_runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const int plain = copy_iterations_to_threshold(false, seed, budget);
    const int seeded = copy_iterations_to_threshold(true, seed, budget);
    all_reached = all_reached && plain > 0 && seeded > 0;
    plain_total += plain;
    seeded_total += seeded;
    plain_runs += " " + std::to_string(plain);
    seeded_runs += " " + std::to_string(seeded);
  }
  const double ratio = seeded_total / plain_total;
  Outcome o{all_reached && ratio <= 0.5, "iterations to 0.95 of length: unseeded" + plain_runs + "; expert-seeded" +
                                             seeded_runs + "; seeded/unseeded mean ratio " + fmt(ratio) + " <= 0.5"};
  return with_time_limit(o, seconds_since(start), 7200.0);
}

Outcome off_policy() {
  Rng tree_rng(11);
  auto tree = std::make_shared<const TabularMDP>(build_synthetic_tree(6, tree_rng));
  Hyperparams hp;
  hp.tau = 0.5;
  hp.rollout = 3;
  hp.batch_size = 10;
  hp.lr_policy = 0.2;
  hp.critic_weight = 1.0;
  hp.replay_alpha = 0.1;
  hp.iterations = 20000;
  hp.eval_period = 20000;
  hp.uniform_behavior = true;
  hp.max_episode_steps = 6;
  hp.seed = 5;
  TabularModel model(tree->num_states(), tree->num_actions());
  train_pcl([tree](std::uint64_t) { return std::make_unique<TabularEnv>(tree, 6); }, model, hp);

  // Every window of every root-to-leaf path.
  const LossConfig cfg = hp.loss();
  double worst_c = 0.0;
  const int leaves = 1 << 6;
  for (int path = 0; path < leaves; ++path) {
    Episode ep;
    int s = 0;
    ep.observations.push_back(s);
    for (int depth = 5; depth >= 0; --depth) {
      const int a = (path >> depth) & 1;
      ep.actions.push_back(a);
      ep.rewards.push_back(tree->reward(s, a));
      s = tree->successors(s, a)[0].state;
      ep.observations.push_back(s);
    }
    ep.terminated = true;
    const EpisodeForward fwd = model.forward(ep);
    for (const WindowView& w : episode_windows(ep, cfg)) worst_c = std::max(worst_c, std::fabs(soft_consistency(w, fwd, cfg)));
  }

  const ValueTable v = softmax_value_iteration(*tree, hp.tau).values;
  const PolicyTable pi = boltzmann_policy(*tree, v, hp.tau);
  double worst_tv = 0.0;
  std::vector<double> lp;
  for (int s = 0; s < tree->num_states(); ++s) {
    if (tree->terminal(s)) continue;
    model.log_policy(s, lp);
    std::vector<double> p(lp.size());
    for (std::size_t a = 0; a < lp.size(); ++a) p[a] = std::exp(lp[a]);
    worst_tv = std::max(worst_tv, total_variation(p, pi.row(s)));
  }
  return {worst_c <= 1e-3 && worst_tv <= 1e-2,
          "max window |C| = " + fmt(worst_c) + " <= 0.001; max TV(pi, pi*) = " + fmt(worst_tv) + " <= 0.01"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"softmax operator suite", softmax_suite},
      {"fixed point and contraction", contraction},
      {"consistency at the optimum", consistency_at_optimum},
      {"converse from consistency", converse},
      {"small temperature and single step limits", limits},
      {"gradient correctness", gradients},
      {"tabular soft Q-learning convergence", soft_q_learning},
      {"replay distribution", replay},
      {"synthetic tree end to end", synthetic_tree},
      {"copy task with expert seeding", copy_task},
      {"off-policy soundness", off_policy},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d %-44s %s  [%.1fs] %s\n", number, criteria[i].first, o.pass ? "PASS" : "FAIL",
                seconds_since(start), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
