#include "pcl/tabular_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pcl {

bool TabularMDP::deterministic() const {
  for (std::size_t r = 0; r < count_.size(); ++r)
    if (count_[r] > 1) return false;
  return true;
}

double TabularMDP::max_abs_reward() const {
  double m = 0.0;
  for (double r : reward_) m = std::max(m, std::fabs(r));
  return m;
}

bool TabularMDP::forward_acyclic() const {
  for (int s = 0; s < num_states_; ++s) {
    if (terminal(s)) continue;
    for (int a = 0; a < num_actions_; ++a)
      for (const Successor& n : successors(s, a))
        if (n.prob > 0.0 && n.state <= s) return false;
  }
  return true;
}

TabularMDP::Builder::Builder(int num_states, int num_actions, double gamma) {
  if (num_states < 1 || num_actions < 1) throw std::invalid_argument("TabularMDP: need at least one state and action");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("TabularMDP: gamma must lie in [0, 1]");
  mdp_.num_states_ = num_states;
  mdp_.num_actions_ = num_actions;
  mdp_.gamma_ = gamma;
  const std::size_t rows = static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions);
  mdp_.terminal_.assign(static_cast<std::size_t>(num_states), 0);
  mdp_.reward_.assign(rows, 0.0);
  mdp_.offset_.assign(rows, 0);
  mdp_.count_.assign(rows, 0);
  has_row_.assign(rows, 0);
}

TabularMDP::Builder& TabularMDP::Builder::set_terminal(int s) {
  if (s < 0 || s >= mdp_.num_states_) throw std::out_of_range("TabularMDP: terminal state out of range");
  mdp_.terminal_[static_cast<std::size_t>(s)] = 1;
  return *this;
}

TabularMDP::Builder& TabularMDP::Builder::set_initial_state(int s) {
  if (s < 0 || s >= mdp_.num_states_) throw std::out_of_range("TabularMDP: initial state out of range");
  mdp_.initial_state_ = s;
  return *this;
}

TabularMDP::Builder& TabularMDP::Builder::set_row(int s, int a, double reward, std::span<const Successor> next) {
  if (s < 0 || s >= mdp_.num_states_ || a < 0 || a >= mdp_.num_actions_)
    throw std::out_of_range("TabularMDP: row index out of range");
  if (!std::isfinite(reward)) throw std::invalid_argument("TabularMDP: non-finite reward");
  const std::size_t r = mdp_.row(s, a);
  if (has_row_[r]) throw std::invalid_argument("TabularMDP: row set twice");
  double sum = 0.0;
  for (const Successor& n : next) {
    if (n.state < 0 || n.state >= mdp_.num_states_) throw std::out_of_range("TabularMDP: successor out of range");
    if (!(n.prob >= 0.0)) throw std::invalid_argument("TabularMDP: negative transition probability");
    sum += n.prob;
  }
  if (next.empty() || std::fabs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("TabularMDP: transition row for (" + std::to_string(s) + ", " + std::to_string(a) +
                                ") does not sum to 1");
  if (mdp_.next_.size() + next.size() > std::numeric_limits<std::uint32_t>::max())
    throw std::length_error("TabularMDP: too many transitions");
  mdp_.reward_[r] = reward;
  mdp_.offset_[r] = static_cast<std::uint32_t>(mdp_.next_.size());
  mdp_.count_[r] = static_cast<std::uint32_t>(next.size());
  mdp_.next_.insert(mdp_.next_.end(), next.begin(), next.end());
  has_row_[r] = 1;
  return *this;
}

TabularMDP::Builder& TabularMDP::Builder::set_deterministic(int s, int a, double reward, int next_state) {
  const Successor n{next_state, 1.0};
  return set_row(s, a, reward, std::span<const Successor>(&n, 1));
}

TabularMDP TabularMDP::Builder::build() && {
  for (int s = 0; s < mdp_.num_states_; ++s) {
    for (int a = 0; a < mdp_.num_actions_; ++a) {
      const std::size_t r = mdp_.row(s, a);
      if (mdp_.terminal(s)) {
        if (has_row_[r]) throw std::invalid_argument("TabularMDP: terminal states cannot have transitions");
      } else if (!has_row_[r]) {
        throw std::invalid_argument("TabularMDP: missing transition row for (" + std::to_string(s) + ", " +
                                    std::to_string(a) + ")");
      }
    }
  }
  if (mdp_.terminal(mdp_.initial_state_)) throw std::invalid_argument("TabularMDP: initial state is terminal");
  mdp_.next_.shrink_to_fit();
  return std::move(mdp_);
}

TabularMDP random_mdp(const RandomMdpOptions& o) {
  if (o.num_states < 1 || o.num_actions < 1) throw std::invalid_argument("random_mdp: sizes must be >= 1");
  if (o.num_terminal < 0 || o.num_terminal >= o.num_states)
    throw std::invalid_argument("random_mdp: need at least one non-terminal state");
  if (!(o.stochasticity >= 0.0 && o.stochasticity <= 1.0))
    throw std::invalid_argument("random_mdp: stochasticity must lie in [0, 1]");
  Rng rng(o.seed);
  TabularMDP::Builder b(o.num_states, o.num_actions, o.gamma);
  const int first_terminal = o.num_states - o.num_terminal;
  for (int s = first_terminal; s < o.num_states; ++s) b.set_terminal(s);

  std::vector<double> row(static_cast<std::size_t>(o.num_states));
  std::vector<Successor> next;
  for (int s = 0; s < first_terminal; ++s) {
    for (int a = 0; a < o.num_actions; ++a) {
      const double reward = rng.uniform(-1.0, 1.0);
      const auto target = rng.index(static_cast<std::size_t>(o.num_states));
      std::fill(row.begin(), row.end(), 0.0);
      if (o.stochasticity > 0.0) {
        double total = 0.0;
        for (double& x : row) total += (x = rng.exponential());
        for (double& x : row) x *= o.stochasticity / total;
      }
      row[target] += 1.0 - o.stochasticity;
      double total = 0.0;
      for (double x : row) total += x;
      next.clear();
      for (int t = 0; t < o.num_states; ++t)
        if (row[static_cast<std::size_t>(t)] > 0.0) next.push_back({t, row[static_cast<std::size_t>(t)] / total});
      b.set_row(s, a, reward, next);
    }
  }
  return std::move(b).build();
}

int synthetic_tree_node_count(int depth) { return (1 << (depth + 1)) - 1; }

TabularMDP build_synthetic_tree(int depth, Rng& rng, double best_total) {
  if (depth < 1 || depth > 24) throw std::invalid_argument("build_synthetic_tree: depth must lie in [1, 24]");
  const int nodes = synthetic_tree_node_count(depth);
  const int internal = (1 << depth) - 1;
  std::vector<double> edge(static_cast<std::size_t>(2 * internal));
  std::vector<double> best(static_cast<std::size_t>(nodes));
  double max_total = 0.0;
  // A non-positive best raw total cannot be rescaled without flipping signs; redraw.
  do {
    for (double& r : edge) r = rng.uniform(-1.0, 1.0);
    for (int v = nodes - 1; v >= 0; --v) {
      if (v >= internal) {
        best[static_cast<std::size_t>(v)] = 0.0;
        continue;
      }
      const double left = edge[static_cast<std::size_t>(2 * v)] + best[static_cast<std::size_t>(2 * v + 1)];
      const double right = edge[static_cast<std::size_t>(2 * v + 1)] + best[static_cast<std::size_t>(2 * v + 2)];
      best[static_cast<std::size_t>(v)] = std::max(left, right);
    }
    max_total = best[0];
  } while (!(max_total > 0.0));

  const double scale = best_total / max_total;
  TabularMDP::Builder b(nodes, 2, 1.0);
  for (int v = internal; v < nodes; ++v) b.set_terminal(v);
  for (int v = 0; v < internal; ++v)
    for (int a = 0; a < 2; ++a)
      b.set_deterministic(v, a, edge[static_cast<std::size_t>(2 * v + a)] * scale, 2 * v + 1 + a);
  return std::move(b).build();
}

}  // namespace pcl
