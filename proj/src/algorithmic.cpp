#include "pcl/algorithmic.hpp"

#include <algorithm>
#include <stdexcept>

namespace pcl {

namespace {

constexpr struct {
  AlgoTask task;
  std::string_view name;
} kTaskNames[] = {
    {AlgoTask::Copy, "copy"},
    {AlgoTask::DuplicatedInput, "duplicated_input"},
    {AlgoTask::RepeatCopy, "repeat_copy"},
    {AlgoTask::Reverse, "reverse"},
    {AlgoTask::ReversedAddition, "reversed_addition"},
    {AlgoTask::ReversedAddition3, "reversed_addition3"},
    {AlgoTask::HardReversedAddition, "hard_reversed_addition"},
};

bool is_addition(AlgoTask t) {
  return t == AlgoTask::ReversedAddition || t == AlgoTask::ReversedAddition3 || t == AlgoTask::HardReversedAddition;
}

int addition_rows(AlgoTask t) { return t == AlgoTask::ReversedAddition3 ? 3 : 2; }

}  // namespace

AlgoTask parse_algo_task(std::string_view name) {
  for (const auto& entry : kTaskNames)
    if (entry.name == name) return entry.task;
  throw std::invalid_argument("unknown algorithmic task '" + std::string(name) + "'");
}

std::string_view algo_task_name(AlgoTask task) {
  for (const auto& entry : kTaskNames)
    if (entry.task == task) return entry.name;
  return "unknown";
}

int default_vocab(AlgoTask task) { return is_addition(task) ? 3 : 5; }

Curriculum::Curriculum(int min_length, int initial_max, int cap, bool fixed, double threshold, std::size_t window)
    : min_length_(min_length),
      max_length_(initial_max),
      cap_(cap),
      fixed_(fixed),
      threshold_(threshold),
      window_(window) {
  if (min_length < 1 || initial_max < min_length || cap < initial_max)
    throw std::invalid_argument("Curriculum: need 1 <= min_length <= initial_max <= cap");
  if (window == 0) throw std::invalid_argument("Curriculum: window must be positive");
}

int Curriculum::sample_length(Rng& rng) const {
  const int lo = min_length();
  const int hi = max_length();
  return lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
}

void Curriculum::update(double success_rate) {
  if (!(success_rate >= 0.0 && success_rate <= 1.0))
    throw std::invalid_argument("Curriculum::update: success rate must lie in [0, 1]");
  if (fixed_) return;
  if (success_rate >= threshold_ && max_length_ < cap_) ++max_length_;
}

void Curriculum::record(double reward, double max_reward) {
  if (fixed_) return;
  const double rate = max_reward > 0.0 ? std::clamp(reward / max_reward, 0.0, 1.0) : 0.0;
  recent_.push_back(rate);
  if (recent_.size() < window_) return;
  double sum = 0.0;
  for (double r : recent_) sum += r;
  const int before = max_length_;
  update(sum / static_cast<double>(recent_.size()));
  if (max_length_ != before)
    recent_.clear();
  else
    recent_.pop_front();
}

AlgorithmicEnv::AlgorithmicEnv(const AlgorithmicConfig& config)
    : config_(config),
      vocab_(config.vocab > 0 ? config.vocab : default_vocab(config.task)),
      num_moves_(is_addition(config.task) ? 4 : 2),
      curriculum_(config.task == AlgoTask::HardReversedAddition ? config.max_length : config.min_length,
                  config.task == AlgoTask::HardReversedAddition ? config.max_length : config.initial_max_length,
                  config.max_length, config.task == AlgoTask::HardReversedAddition) {
  if (vocab_ < 2) throw std::invalid_argument("AlgorithmicEnv: vocabulary needs at least 2 symbols");
}

int AlgorithmicEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  const int n = curriculum_.sample_length(rng);
  std::vector<std::vector<int>> grid;
  auto symbol = [&] { return static_cast<int>(rng.index(static_cast<std::size_t>(vocab_))); };
  switch (config_.task) {
    case AlgoTask::DuplicatedInput: {
      std::vector<int> row;
      for (int i = 0; i < n; ++i) {
        const int c = symbol();
        row.push_back(c);
        row.push_back(c);
      }
      grid.push_back(std::move(row));
      break;
    }
    case AlgoTask::Copy:
    case AlgoTask::RepeatCopy:
    case AlgoTask::Reverse: {
      std::vector<int> row(static_cast<std::size_t>(n));
      for (int& c : row) c = symbol();
      grid.push_back(std::move(row));
      break;
    }
    default: {
      grid.assign(static_cast<std::size_t>(addition_rows(config_.task)), std::vector<int>(static_cast<std::size_t>(n)));
      for (auto& row : grid)
        for (int& c : row) c = symbol();
    }
  }
  return reset_with_input(std::move(grid));
}

int AlgorithmicEnv::reset_with_input(std::vector<std::vector<int>> grid) {
  if (grid.empty() || grid[0].empty()) throw std::invalid_argument("AlgorithmicEnv: empty input grid");
  const int expected_rows = is_addition(config_.task) ? addition_rows(config_.task) : 1;
  if (static_cast<int>(grid.size()) != expected_rows)
    throw std::invalid_argument("AlgorithmicEnv: wrong number of input rows for task");
  for (const auto& row : grid) {
    if (row.size() != grid[0].size()) throw std::invalid_argument("AlgorithmicEnv: ragged input grid");
    for (int c : row)
      if (c < 0 || c >= vocab_) throw std::invalid_argument("AlgorithmicEnv: input symbol out of range");
  }
  if (config_.task == AlgoTask::DuplicatedInput && grid[0].size() % 2 != 0)
    throw std::invalid_argument("AlgorithmicEnv: duplicated input needs even width");
  grid_ = std::move(grid);
  build_target();
  head_row_ = 0;
  head_col_ = 0;
  written_ = 0;
  steps_ = 0;
  time_limit_ = width() + static_cast<int>(target_.size()) + 4;
  done_ = false;
  return observe();
}

void AlgorithmicEnv::build_target() {
  const std::vector<int>& x = grid_[0];
  target_.clear();
  switch (config_.task) {
    case AlgoTask::Copy:
      target_ = x;
      break;
    case AlgoTask::DuplicatedInput:
      for (std::size_t i = 0; i < x.size(); i += 2) target_.push_back(x[i]);
      break;
    case AlgoTask::RepeatCopy:
      target_ = x;
      target_.insert(target_.end(), x.rbegin(), x.rend());
      target_.insert(target_.end(), x.begin(), x.end());
      break;
    case AlgoTask::Reverse:
      target_.assign(x.rbegin(), x.rend());
      break;
    default: {
      int carry = 0;
      for (std::size_t col = 0; col < x.size(); ++col) {
        int total = carry;
        for (const auto& row : grid_) total += row[col];
        target_.push_back(total % vocab_);
        carry = total / vocab_;
      }
      if (carry > 0) target_.push_back(carry);
    }
  }
}

int AlgorithmicEnv::observe() const {
  if (head_row_ < 0 || head_row_ >= rows() || head_col_ < 0 || head_col_ >= width()) return vocab_;
  return grid_[static_cast<std::size_t>(head_row_)][static_cast<std::size_t>(head_col_)];
}

AlgorithmicEnv::Decoded AlgorithmicEnv::decode(int action) const {
  if (action < 0 || action >= num_actions()) throw std::out_of_range("AlgorithmicEnv: action out of range");
  const int w = action % (vocab_ + 1);
  Decoded d{action / (vocab_ + 1), std::nullopt};
  if (w > 0) d.write = w - 1;
  return d;
}

int AlgorithmicEnv::encode(int move, std::optional<int> write) const {
  if (move < 0 || move >= num_moves_) throw std::out_of_range("AlgorithmicEnv: move out of range");
  if (write && (*write < 0 || *write >= vocab_)) throw std::out_of_range("AlgorithmicEnv: symbol out of range");
  return move * (vocab_ + 1) + (write ? *write + 1 : 0);
}

StepResult AlgorithmicEnv::step(int action) {
  if (done_) throw std::logic_error("AlgorithmicEnv: step after episode end");
  const Decoded d = decode(action);
  double reward = 0.0;
  bool terminated = false;
  if (d.write) {
    if (*d.write == target_[written_]) {
      reward = 1.0;
      if (++written_ == target_.size()) terminated = true;
    } else {
      reward = -0.5;
      terminated = true;
    }
  }
  switch (d.move) {
    case 0: head_col_ = std::max(head_col_ - 1, -1); break;
    case 1: head_col_ = std::min(head_col_ + 1, width()); break;
    case 2: head_row_ = std::max(head_row_ - 1, -1); break;
    default: head_row_ = std::min(head_row_ + 1, rows()); break;
  }
  ++steps_;
  done_ = terminated || steps_ >= time_limit_;
  return {observe(), reward, done_, terminated};
}

void AlgorithmicEnv::on_episode_end(const Episode& episode) {
  curriculum_.record(episode.total_reward(), max_episode_reward());
}

std::vector<int> AlgorithmicEnv::scripted_solution() const {
  if (grid_.empty()) throw std::logic_error("AlgorithmicEnv: scripted_solution before reset");
  constexpr int kLeft = 0, kRight = 1;
  const std::vector<int>& x = grid_[0];
  const int n = width();
  std::vector<int> actions;
  switch (config_.task) {
    case AlgoTask::Copy:
      for (int c : x) actions.push_back(encode(kRight, c));
      break;
    case AlgoTask::DuplicatedInput:
      for (int i = 0; i < n; ++i)
        actions.push_back(encode(kRight, i % 2 == 0 ? std::optional<int>(x[static_cast<std::size_t>(i)]) : std::nullopt));
      break;
    case AlgoTask::Reverse:
      for (int i = 0; i + 1 < n; ++i) actions.push_back(encode(kRight, std::nullopt));
      for (int i = n - 1; i >= 0; --i) actions.push_back(encode(kLeft, x[static_cast<std::size_t>(i)]));
      break;
    case AlgoTask::RepeatCopy:
      for (int c : x) actions.push_back(encode(kRight, c));
      actions.push_back(encode(kLeft, std::nullopt));
      for (int i = n - 1; i >= 0; --i) actions.push_back(encode(kLeft, x[static_cast<std::size_t>(i)]));
      actions.push_back(encode(kRight, std::nullopt));
      for (int c : x) actions.push_back(encode(kRight, c));
      break;
    default:
      for (int digit : target_) actions.push_back(encode(kRight, digit));
  }
  return actions;
}

}  // namespace pcl
