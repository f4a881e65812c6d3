#pragma once

// Capacity-bounded episode store. An episode with undiscounted return R is
// drawn with probability uniform_mix / N + (1 - uniform_mix) * exp(alpha R) / Z,
// N the current size. Over capacity, a uniformly random non-pinned episode is
// evicted; pinned (expert) episodes are never evicted.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pcl/environment.hpp"

namespace pcl {

struct BufferConfig {
  std::size_t capacity = 10000;
  double alpha = 1.0;
  double uniform_mix = 0.1;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(const BufferConfig& config);

  // Throws std::length_error if the buffer is over capacity and nothing is evictable.
  void insert(Episode episode, Rng& rng, bool pinned = false);
  void seed_experts(std::vector<Episode> experts, Rng& rng);

  // Throws std::logic_error when empty.
  std::size_t sample_index(Rng& rng) const;
  const Episode& sample(Rng& rng) const { return entries_[sample_index(rng)].episode; }

  // Exact sampling distribution over current slots, computed directly from the formula.
  std::vector<double> probabilities() const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t pinned_count() const { return entries_.size() - regular_.size(); }
  const BufferConfig& config() const { return config_; }

  struct Entry {
    Episode episode;
    double total_reward;
    bool pinned;
    std::uint64_t insertion_id;
  };
  const Entry& entry(std::size_t slot) const { return entries_[slot]; }

  // Episode-file dump (insertion id, pinned flag and episode per line) and restore.
  void dump(std::ostream& out) const;
  static ReplayBuffer restore(std::istream& in, const BufferConfig& config);

 private:
  void set_weight(std::size_t slot, double weight);
  double tree_total() const { return tree_.empty() ? 0.0 : tree_[1]; }
  void rebuild_weights();
  void remove_slot(std::size_t slot);

  BufferConfig config_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> regular_;      // slots of non-pinned entries
  std::vector<std::size_t> regular_pos_;  // slot -> position in regular_ (unused for pinned)
  std::size_t leaves_ = 1;
  std::vector<double> tree_;              // sum tree over exp(alpha R - shift_)
  double shift_ = 0.0;
  bool shift_set_ = false;
  std::uint64_t next_id_ = 0;
};

}  // namespace pcl
