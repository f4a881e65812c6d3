#include "pcl/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace pcl {

namespace {
// exp(x) stays comfortably finite for |x| below this; larger spreads trigger a re-shift.
constexpr double kShiftSlack = 300.0;
}  // namespace

ReplayBuffer::ReplayBuffer(const BufferConfig& config) : config_(config) {
  if (config.capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
  if (!(config.alpha >= 0.0)) throw std::invalid_argument("ReplayBuffer: alpha must be >= 0");
  if (!(config.uniform_mix >= 0.0 && config.uniform_mix <= 1.0))
    throw std::invalid_argument("ReplayBuffer: uniform mix must lie in [0, 1]");
  while (leaves_ < config.capacity + 1) leaves_ *= 2;
  tree_.assign(2 * leaves_, 0.0);
  regular_pos_.assign(config.capacity + 1, 0);
}

void ReplayBuffer::set_weight(std::size_t slot, double weight) {
  std::size_t node = leaves_ + slot;
  tree_[node] = weight;
  for (node /= 2; node >= 1; node /= 2) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

void ReplayBuffer::rebuild_weights() {
  double m = -std::numeric_limits<double>::infinity();
  for (const Entry& e : entries_) m = std::max(m, config_.alpha * e.total_reward);
  shift_ = entries_.empty() ? 0.0 : m;
  shift_set_ = !entries_.empty();
  std::fill(tree_.begin(), tree_.end(), 0.0);
  for (std::size_t i = 0; i < entries_.size(); ++i)
    tree_[leaves_ + i] = std::exp(config_.alpha * entries_[i].total_reward - shift_);
  for (std::size_t node = leaves_ - 1; node >= 1; --node) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

void ReplayBuffer::remove_slot(std::size_t slot) {
  const std::size_t last = entries_.size() - 1;
  if (!entries_[slot].pinned) {
    const std::size_t pos = regular_pos_[slot];
    regular_[pos] = regular_.back();
    regular_pos_[regular_[pos]] = pos;
    regular_.pop_back();
  }
  if (slot != last) {
    entries_[slot] = std::move(entries_[last]);
    if (!entries_[slot].pinned) {
      regular_pos_[slot] = regular_pos_[last];
      regular_[regular_pos_[slot]] = slot;
    }
    set_weight(slot, tree_[leaves_ + last]);
  }
  set_weight(last, 0.0);
  entries_.pop_back();
}

void ReplayBuffer::insert(Episode episode, Rng& rng, bool pinned) {
  episode.validate();
  const double total = episode.total_reward();
  if (entries_.size() >= config_.capacity && regular_.empty())
    throw std::length_error("ReplayBuffer: capacity exhausted by pinned episodes");
  const std::size_t slot = entries_.size();
  entries_.push_back({std::move(episode), total, pinned, next_id_++});
  if (!pinned) {
    regular_pos_[slot] = regular_.size();
    regular_.push_back(slot);
  }
  const double key = config_.alpha * total;
  if (!shift_set_ || key - shift_ > kShiftSlack) {
    rebuild_weights();
  } else {
    set_weight(slot, std::exp(key - shift_));
  }
  if (entries_.size() > config_.capacity) remove_slot(regular_[rng.index(regular_.size())]);
  if (!(tree_total() > 1e-200)) rebuild_weights();
}

void ReplayBuffer::seed_experts(std::vector<Episode> experts, Rng& rng) {
  for (Episode& e : experts) insert(std::move(e), rng, true);
}

std::size_t ReplayBuffer::sample_index(Rng& rng) const {
  if (entries_.empty()) throw std::logic_error("ReplayBuffer: sample from empty buffer");
  const double u = rng.uniform();
  if (u < config_.uniform_mix) return rng.index(entries_.size());
  double target = rng.uniform() * tree_total();
  std::size_t node = 1;
  while (node < leaves_) {
    if (target < tree_[2 * node] || tree_[2 * node + 1] <= 0.0) {
      node = 2 * node;
    } else {
      target -= tree_[2 * node];
      node = 2 * node + 1;
    }
  }
  return std::min(node - leaves_, entries_.size() - 1);
}

std::vector<double> ReplayBuffer::probabilities() const {
  const std::size_t n = entries_.size();
  std::vector<double> p(n, 0.0);
  if (n == 0) return p;
  double m = -std::numeric_limits<double>::infinity();
  for (const Entry& e : entries_) m = std::max(m, config_.alpha * e.total_reward);
  double z = 0.0;
  for (const Entry& e : entries_) z += std::exp(config_.alpha * e.total_reward - m);
  for (std::size_t i = 0; i < n; ++i)
    p[i] = config_.uniform_mix / static_cast<double>(n) +
           (1.0 - config_.uniform_mix) * std::exp(config_.alpha * entries_[i].total_reward - m) / z;
  return p;
}

void ReplayBuffer::dump(std::ostream& out) const {
  std::vector<EpisodeRecord> records;
  records.reserve(entries_.size());
  for (const Entry& e : entries_) records.push_back({e.insertion_id, e.pinned, e.episode});
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  write_episodes(out, records);
}

ReplayBuffer ReplayBuffer::restore(std::istream& in, const BufferConfig& config) {
  ReplayBuffer buffer(config);
  std::vector<EpisodeRecord> records = read_episodes(in);
  if (records.size() > config.capacity) throw std::length_error("ReplayBuffer::restore: more episodes than capacity");
  Rng unused(0);
  for (EpisodeRecord& r : records) {
    buffer.insert(std::move(r.episode), unused, r.pinned);
    buffer.entries_.back().insertion_id = r.id;
    buffer.next_id_ = std::max(buffer.next_id_, r.id + 1);
  }
  return buffer;
}

}  // namespace pcl
