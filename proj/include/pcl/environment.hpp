#pragma once

// Episodic environment interface, recorded episodes, and the line-oriented
// episode file format shared by expert dumps and replay-buffer snapshots.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "pcl/tabular_mdp.hpp"

namespace pcl {

// observations has one more entry than actions/rewards: the state reached
// after the last action. `terminated` is false when the episode was cut off
// by a time limit, in which case the last state is still bootstrapped.
struct Episode {
  std::vector<int> observations;
  std::vector<int> actions;
  std::vector<double> rewards;
  bool terminated = false;
  std::uint64_t seed = 0;

  std::size_t length() const { return actions.size(); }
  double total_reward() const;
  // Throws std::invalid_argument if the size relations or finiteness fail.
  void validate() const;
};

struct StepResult {
  int observation;
  double reward;
  bool done;
  bool terminated;  // done because a terminal state was reached (not a time limit)
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual int num_actions() const = 0;
  // Observations are integers in [0, observation_size()).
  virtual int observation_size() const = 0;

  // Deterministic given the seed.
  virtual int reset(std::uint64_t seed) = 0;
  // Throws std::logic_error after the episode has ended.
  virtual StepResult step(int action) = 0;

  // Largest undiscounted reward attainable in the current episode.
  virtual double max_episode_reward() const = 0;
  // Called by the trainer with every finished on-policy episode.
  virtual void on_episode_end(const Episode&) {}
};

using EnvFactory = std::function<std::unique_ptr<Environment>(std::uint64_t seed)>;

// Walks a TabularMDP; observations are state indices. Stochastic transitions
// draw from a stream seeded by reset().
class TabularEnv final : public Environment {
 public:
  explicit TabularEnv(std::shared_ptr<const TabularMDP> mdp, int max_steps = 0);

  int num_actions() const override { return mdp_->num_actions(); }
  int observation_size() const override { return mdp_->num_states(); }
  int reset(std::uint64_t seed) override;
  StepResult step(int action) override;
  double max_episode_reward() const override { return max_reward_; }

  const TabularMDP& mdp() const { return *mdp_; }
  int state() const { return state_; }
  // Optimal undiscounted return from the initial state, used for normalizing.
  void set_max_episode_reward(double r) { max_reward_ = r; }

 private:
  std::shared_ptr<const TabularMDP> mdp_;
  int max_steps_;
  int state_ = 0;
  int steps_ = 0;
  bool done_ = true;
  double max_reward_ = 0.0;
  Rng rng_;
};

// Plays `actions` from reset(seed), stopping early if the episode ends.
Episode replay_actions(Environment& env, std::uint64_t seed, const std::vector<int>& actions);

struct EpisodeRecord {
  std::uint64_t id = 0;
  bool pinned = false;
  Episode episode;
};

// Tab-separated: id, seed, pinned, terminated, observations, actions, rewards.
// Lists are space separated ("-" when empty); rewards print with 17
// significant digits so a read/write cycle is exact.
void write_episodes(std::ostream& out, const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> read_episodes(std::istream& in);

}  // namespace pcl
