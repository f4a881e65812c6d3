#pragma once

// Training loops: PCL and Unified PCL (on-policy batch + replay batch per
// iteration), the A2C baseline, and tabular soft / hard Q-learning.

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "pcl/consistency.hpp"
#include "pcl/environment.hpp"
#include "pcl/exact_oracle.hpp"
#include "pcl/model.hpp"
#include "pcl/optimizer.hpp"
#include "pcl/replay_buffer.hpp"

namespace pcl {

enum class Algorithm { Pcl, UnifiedPcl, A2c, TabularQSoft, TabularQHard };

Algorithm parse_algorithm(std::string_view name);
std::string_view algorithm_name(Algorithm algorithm);

struct Hyperparams {
  double tau = 0.1;
  double gamma = 1.0;
  int rollout = 3;
  int batch_size = 10;
  int replay_batch_size = -1;  // -1: same as batch_size; 0 disables replay
  double lr_policy = 0.1;
  double critic_weight = 1.0;  // lr_value = critic_weight * lr_policy
  std::size_t buffer_capacity = 10000;
  double replay_alpha = 1.0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  int iterations = 1000;
  int eval_period = 100;  // metrics are emitted every eval_period iterations and at the end
  std::uint64_t seed = 0;
  bool strict_windows = false;
  double clip_norm = 0.0;      // 0 disables global-norm clipping
  bool average_batch = true;   // divide the summed update by the number of episodes
  bool uniform_behavior = false;  // collect episodes with a uniform random policy (off-policy only)
  int max_episode_steps = 1000;

  double lr_value() const { return critic_weight * lr_policy; }
  LossConfig loss() const { return {tau, gamma, rollout, strict_windows}; }
  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct RunMetrics {
  int iteration = 0;
  long env_steps = 0;
  double avg_reward = 0.0;  // mean undiscounted return of the last 100 on-policy episodes
  double loss = 0.0;        // mean per-episode objective over the iteration's on-policy batch
  std::size_t buffer_size = 0;
};

using MetricsSink = std::function<void(const RunMetrics&)>;

struct TrainOptions {
  std::vector<Episode> experts;  // pinned into the replay buffer before training
  MetricsSink sink;
  // Optional early exit, checked after every emitted metrics row.
  std::function<bool(const RunMetrics&)> stop;
  // When set, training uses (and leaves behind) this optimizer's state; its kind must match.
  Optimizer* optimizer = nullptr;
};

// Samples one episode following the model's policy (or uniformly at random).
Episode sample_episode(const PolicyValueModel& model, Environment& env, std::uint64_t seed, Rng& rng,
                       int max_steps, bool uniform = false);

std::vector<RunMetrics> train_pcl(const EnvFactory& make_env, PolicyValueModel& model, const Hyperparams& hp,
                                  const TrainOptions& options = {});
std::vector<RunMetrics> train_unified_pcl(const EnvFactory& make_env, UnifiedQModel& model, const Hyperparams& hp,
                                          const TrainOptions& options = {});
// On-policy only; tau weights the entropy bonus.
std::vector<RunMetrics> train_a2c(const EnvFactory& make_env, PolicyValueModel& model, const Hyperparams& hp,
                                  const TrainOptions& options = {});

struct TabularQOptions {
  double tau = 0.1;
  long updates = 1000000;
  double lr_exponent = 0.6;    // lr = (1 + visits(s, a))^-lr_exponent
  bool sampled = true;         // sample s' from the kernel; false uses the exact expectation
  std::uint64_t seed = 0;
};

// Asynchronous one-step backups at uniformly chosen (s, a) pairs:
//   Q(s,a) += lr (r + gamma backup(Q(s', .)) - Q(s,a)),  backup = F_tau (soft) or max.
QTable train_tabular_q(const TabularMDP& mdp, const TabularQOptions& options, bool soft);

struct EvalResult {
  double mean_reward = 0.0;
  double stddev = 0.0;
  double mean_max_reward = 0.0;  // mean of env.max_episode_reward() over the episodes
};

// Mean undiscounted return of episodes sampled from pi (not argmax).
EvalResult evaluate(const PolicyValueModel& model, Environment& env, int episodes, std::uint64_t seed,
                    int max_steps = 1000);

}  // namespace pcl
