#pragma once

// Experiment plumbing behind the `pcl` command: config files, environment and
// model construction, multi-seed runs, CSV output, grid sweeps and experts.
//
// Config files hold one `key = value` per line; `#` starts a comment. Keys:
//   task                  tree | copy | duplicated_input | repeat_copy | reverse |
//                         reversed_addition | reversed_addition3 | hard_reversed_addition
//   algorithm             pcl | unified_pcl | a2c | tabular_q_soft | tabular_q_hard
//   seeds                 comma-separated list, e.g. 0,1,2 or a range 0-9
//   experts, expert_count pin expert episodes into the replay buffer
//   output                output directory
//   tree_depth, tree_seed Synthetic Tree shape and reward draw (default: one tree per run seed)
//   vocab, min_length, initial_max_length, max_length, hidden
//   tau, gamma, rollout, batch_size, replay_batch_size, lr_policy, critic_weight,
//   buffer_capacity, replay_alpha, optimizer, iterations, eval_period, strict_windows,
//   clip_norm, average_batch, uniform_behavior, max_episode_steps
//   q_updates, q_lr_exponent, q_sampled     tabular Q-learning
//   grid.<key> = v1, v2, ...                sweep values for a hyperparameter key
//   sweep_preset          tree | algorithmic
//   grid_cap              largest allowed number of grid points

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcl/algorithmic.hpp"
#include "pcl/tabular_mdp.hpp"
#include "pcl/trainer.hpp"

namespace pcl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string task = "tree";
  Algorithm algorithm = Algorithm::Pcl;
  Hyperparams hp;
  std::vector<std::uint64_t> seeds{0};
  bool experts = false;
  int expert_count = 10;
  std::string output;  // empty: PCL_OUTPUT_DIR or ./pcl_output

  int tree_depth = 20;
  std::uint64_t tree_seed = 0;
  bool tree_seed_set = false;  // unset: every run draws its own tree from its run seed
  AlgorithmicConfig algo;
  int hidden = 32;

  TabularQOptions q;

  std::string sweep_preset;
  std::map<std::string, std::vector<std::string>> grid;  // ordered by key
  std::size_t grid_cap = 1000;

  bool is_tree() const { return task == "tree"; }
  // The config of one run: fixes tree_seed to the run seed unless the file set it.
  ExperimentConfig for_run(std::uint64_t seed) const;
  // Throws ConfigError ("<source>:<line>: message").
  static ExperimentConfig parse(std::istream& in, const std::string& source);
  static ExperimentConfig load(const std::string& path);
  // Applies one key; throws std::invalid_argument with a message on bad values.
  void set(const std::string& key, const std::string& value);
  // Cross-field checks after all keys are read; throws std::invalid_argument.
  void validate() const;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Shared, immutable environment description for all runs of one config. A tree
// config without tree_seed has no shared tree; run_experiment builds one per run.
class ExperimentWorld {
 public:
  explicit ExperimentWorld(const ExperimentConfig& config);

  EnvFactory env_factory() const;
  // Shapes come from the world; tau and hidden size from `config`.
  std::unique_ptr<PolicyValueModel> make_model(const ExperimentConfig& config, std::uint64_t seed) const;
  std::vector<Episode> experts(int count, std::uint64_t seed) const;
  const TabularMDP* tree() const { return tree_.get(); }
  int max_steps() const;

 private:
  ExperimentConfig config_;
  std::shared_ptr<const TabularMDP> tree_;
};

struct RunResult {
  std::string run_id;
  std::uint64_t seed = 0;
  std::vector<RunMetrics> metrics;
  std::string checkpoint;  // serialized checkpoint text
};

std::string run_id(const ExperimentConfig& config, std::uint64_t seed);
RunResult run_experiment(const ExperimentConfig& config, const ExperimentWorld& world, std::uint64_t seed);

// Runs jobs 0..count-1 on up to `parallelism` threads; rethrows the first failure.
void run_parallel(std::size_t count, int parallelism, const std::function<void(std::size_t)>& job);

void write_run_csv(std::ostream& out, const ExperimentConfig& config, const RunResult& run);
void write_aggregate_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<RunResult>& runs);

struct SweepPoint {
  std::vector<std::pair<std::string, std::string>> values;
  ExperimentConfig config;
};
// Cartesian product of the config's grid (preset first, explicit grid.* keys override).
// Throws std::invalid_argument when the product exceeds grid_cap.
std::vector<SweepPoint> sweep_points(const ExperimentConfig& config);
std::map<std::string, std::vector<std::string>> sweep_preset(const std::string& name);

std::string default_output_dir();

// Subcommands; return the process exit code and report to out/err.
struct CommandOptions {
  std::string config;
  std::string seeds;       // overrides the config when non-empty
  std::string out;         // overrides the config when non-empty
  int parallelism = 1;
  std::string scope = "all";
  int trials = 50;
  std::uint64_t seed = 0;
  int count = 10;
  std::string task;        // experts: overrides the config task
  std::string checkpoint;  // eval
  int episodes = 100;      // eval
};

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_verify(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_experts(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace pcl
