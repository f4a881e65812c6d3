#pragma once

// Explicit finite MDPs with (possibly stochastic) transition kernels. Terminal
// states are absorbing with zero reward and have no outgoing rows.

#include <cstdint>
#include <span>
#include <vector>

#include "pcl/random.hpp"

namespace pcl {

struct Successor {
  int state;
  double prob;
};

class TabularMDP {
 public:
  class Builder;

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double gamma() const { return gamma_; }
  int initial_state() const { return initial_state_; }

  bool terminal(int s) const { return terminal_[static_cast<std::size_t>(s)] != 0; }
  double reward(int s, int a) const { return reward_[row(s, a)]; }
  std::span<const Successor> successors(int s, int a) const {
    const std::size_t r = row(s, a);
    return {next_.data() + offset_[r], count_[r]};
  }

  // E_{s'|s,a}[values(s')]
  double expected(int s, int a, std::span<const double> values) const {
    double acc = 0.0;
    for (const Successor& n : successors(s, a)) acc += n.prob * values[static_cast<std::size_t>(n.state)];
    return acc;
  }

  bool deterministic() const;
  double max_abs_reward() const;
  // True if every transition moves to a strictly larger state index.
  bool forward_acyclic() const;

 private:
  TabularMDP() = default;
  std::size_t row(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(a);
  }

  int num_states_ = 0;
  int num_actions_ = 0;
  double gamma_ = 1.0;
  int initial_state_ = 0;
  std::vector<std::uint8_t> terminal_;
  std::vector<double> reward_;
  std::vector<std::uint32_t> offset_;
  std::vector<std::uint32_t> count_;
  std::vector<Successor> next_;
};

// Rows may be added in any order; build() checks that every non-terminal
// (state, action) pair has a row that is a valid probability vector.
class TabularMDP::Builder {
 public:
  Builder(int num_states, int num_actions, double gamma);

  Builder& set_terminal(int s);
  Builder& set_initial_state(int s);
  Builder& set_row(int s, int a, double reward, std::span<const Successor> next);
  Builder& set_deterministic(int s, int a, double reward, int next_state);

  TabularMDP build() &&;

 private:
  TabularMDP mdp_;
  std::vector<std::uint8_t> has_row_;
};

struct RandomMdpOptions {
  int num_states = 10;
  int num_actions = 3;
  // 0 gives one-hot rows; 1 gives Dirichlet(1) rows; in between mixes the two.
  double stochasticity = 1.0;
  double gamma = 0.9;
  int num_terminal = 0;  // the last num_terminal states are made terminal
  std::uint64_t seed = 0;
};

TabularMDP random_mdp(const RandomMdpOptions& options);

// Full binary tree of the given depth: node v has children 2v+1 (action 0) and
// 2v+2 (action 1); leaves are terminal. Edge rewards are uniform on [-1, 1],
// rescaled so the best root-to-leaf total is exactly `best_total`. gamma = 1.
TabularMDP build_synthetic_tree(int depth, Rng& rng, double best_total = 20.0);

int synthetic_tree_node_count(int depth);

}  // namespace pcl
