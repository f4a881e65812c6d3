#pragma once

// Tape and grid tasks in the style of the classic algorithmic benchmarks: the
// agent reads one cell at a time, moves its read head, and optionally emits a
// symbol. Each correct emission earns +1; a wrong emission earns -0.5 and ends
// the episode; emitting the whole target ends the episode successfully.

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcl/environment.hpp"

namespace pcl {

enum class AlgoTask { Copy, DuplicatedInput, RepeatCopy, Reverse, ReversedAddition, ReversedAddition3, HardReversedAddition };

// Throws std::invalid_argument on unknown names.
AlgoTask parse_algo_task(std::string_view name);
std::string_view algo_task_name(AlgoTask task);
// 5 symbols for the character tasks, base 3 for the addition tasks.
int default_vocab(AlgoTask task);

// Input lengths are drawn uniformly from [min_length, max_length]. max_length
// grows by one (up to cap) each time the mean normalized reward over a full
// window reaches the threshold. A fixed curriculum always uses the cap.
class Curriculum {
 public:
  Curriculum(int min_length, int initial_max, int cap, bool fixed = false, double threshold = 0.9,
             std::size_t window = 100);

  int min_length() const { return fixed_ ? cap_ : min_length_; }
  int max_length() const { return fixed_ ? cap_ : max_length_; }
  int cap() const { return cap_; }
  bool fixed() const { return fixed_; }

  int sample_length(Rng& rng) const;

  // Applies one promotion decision for the given window success rate in [0, 1].
  void update(double success_rate);
  // Records reward / max_reward of one episode; decides once the window fills.
  void record(double reward, double max_reward);

 private:
  int min_length_;
  int max_length_;
  int cap_;
  bool fixed_;
  double threshold_;
  std::size_t window_;
  std::deque<double> recent_;
};

struct AlgorithmicConfig {
  AlgoTask task = AlgoTask::Copy;
  int vocab = 0;  // 0 selects default_vocab(task)
  int min_length = 2;
  int initial_max_length = 2;
  int max_length = 10;  // curriculum cap; the fixed length for HardReversedAddition
};

class AlgorithmicEnv final : public Environment {
 public:
  explicit AlgorithmicEnv(const AlgorithmicConfig& config);

  int num_actions() const override { return num_moves_ * (vocab_ + 1); }
  // vocab symbols plus the out-of-grid token (index vocab).
  int observation_size() const override { return vocab_ + 1; }
  int reset(std::uint64_t seed) override;
  StepResult step(int action) override;
  double max_episode_reward() const override { return static_cast<double>(target_.size()); }
  void on_episode_end(const Episode& episode) override;

  // Deterministic reset for tests: use exactly this input grid (rows x width).
  int reset_with_input(std::vector<std::vector<int>> grid);

  struct Decoded {
    int move;                    // 0 left, 1 right, 2 up, 3 down
    std::optional<int> write;    // emitted symbol, if any
  };
  Decoded decode(int action) const;
  int encode(int move, std::optional<int> write) const;

  // Action sequence of a scripted controller that solves the current episode.
  std::vector<int> scripted_solution() const;

  AlgoTask task() const { return config_.task; }
  int vocab() const { return vocab_; }
  int rows() const { return static_cast<int>(grid_.size()); }
  int width() const { return grid_.empty() ? 0 : static_cast<int>(grid_[0].size()); }
  int time_limit() const { return time_limit_; }
  const std::vector<int>& target() const { return target_; }
  const std::vector<std::vector<int>>& grid() const { return grid_; }
  const Curriculum& curriculum() const { return curriculum_; }
  Curriculum& curriculum() { return curriculum_; }

 private:
  int observe() const;
  void build_target();

  AlgorithmicConfig config_;
  int vocab_;
  int num_moves_;
  Curriculum curriculum_;
  std::vector<std::vector<int>> grid_;
  std::vector<int> target_;
  int head_row_ = 0;
  int head_col_ = 0;
  std::size_t written_ = 0;
  int steps_ = 0;
  int time_limit_ = 0;
  bool done_ = true;
};

}  // namespace pcl
