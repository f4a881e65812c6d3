#pragma once

// Parametric policies and value functions with exact analytic gradients.
//
// Every model maps an episode prefix to log pi(.|s_t) and V(s_t). Gradients are
// requested through accumulate_gradients(), which takes per-step weights on
// log pi(a_t|s_t), on V(s_t), and optionally on the policy entropy at s_t, and
// adds the weighted sum of their parameter gradients into a GradAccumulator.

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcl/environment.hpp"
#include "pcl/lstm.hpp"

namespace pcl {

// d/dtheta in `policy`, d/dphi in `value`. Unified models use `policy` for rho
// and leave `value` empty.
struct GradAccumulator {
  std::vector<double> policy;
  std::vector<double> value;

  // Sparse mode (tabular models): only entries recorded through touch_*() may
  // be non-zero, and every operation below visits only those.
  bool sparse = false;
  std::vector<std::size_t> policy_touched, value_touched;
  std::vector<unsigned char> policy_mark, value_mark;

  void make_sparse();
  void touch_policy(std::size_t i) {
    if (sparse && !policy_mark[i]) {
      policy_mark[i] = 1;
      policy_touched.push_back(i);
    }
  }
  void touch_value(std::size_t i) {
    if (sparse && !value_mark[i]) {
      value_mark[i] = 1;
      value_touched.push_back(i);
    }
  }
  // Calls f(index) for every entry that may be non-zero.
  template <typename F>
  void for_each_policy(F&& f) const {
    if (sparse) {
      for (std::size_t i : policy_touched) f(i);
    } else {
      for (std::size_t i = 0; i < policy.size(); ++i) f(i);
    }
  }
  template <typename F>
  void for_each_value(F&& f) const {
    if (sparse) {
      for (std::size_t i : value_touched) f(i);
    } else {
      for (std::size_t i = 0; i < value.size(); ++i) f(i);
    }
  }

  void zero();
  void scale(double factor);
  void add(const GradAccumulator& other);
  double squared_norm() const;
  bool all_finite() const;
};

// Per-step model outputs over a whole episode: rows t = 0..T.
struct EpisodeForward {
  int num_actions = 0;
  std::vector<double> log_probs;  // (T+1) x A
  std::vector<double> values;     // T+1

  std::span<const double> log_policy(std::size_t t) const {
    return {log_probs.data() + t * static_cast<std::size_t>(num_actions), static_cast<std::size_t>(num_actions)};
  }
};

// Incremental acting interface used while sampling episodes.
class PolicyCursor {
 public:
  virtual ~PolicyCursor() = default;
  // log pi(.|history, observation) for the next decision.
  virtual void log_policy(int observation, std::vector<double>& out) = 0;
  // Commits the action taken after the last log_policy() call.
  virtual void advance(int action) = 0;
};

class PolicyValueModel {
 public:
  virtual ~PolicyValueModel() = default;

  virtual int num_actions() const = 0;
  // One line, parseable by make_model(); fully determines parameter shapes.
  virtual std::string descriptor() const = 0;
  virtual bool unified() const { return false; }
  virtual bool recurrent() const { return false; }
  // Gradients touch only the rows visited by an episode.
  virtual bool sparse_gradients() const { return false; }

  std::vector<double>& policy_params() { return theta_; }
  const std::vector<double>& policy_params() const { return theta_; }
  std::vector<double>& value_params() { return phi_; }
  const std::vector<double>& value_params() const { return phi_; }
  // Arrays persisted by checkpoints (parameters plus any fixed inputs such as features).
  virtual std::vector<std::pair<std::string, std::vector<double>*>> named_arrays();

  GradAccumulator make_accumulator() const;

  virtual void forward(const Episode& episode, EpisodeForward& out) const = 0;
  EpisodeForward forward(const Episode& episode) const {
    EpisodeForward out;
    forward(episode, out);
    return out;
  }

  virtual std::unique_ptr<PolicyCursor> cursor() const = 0;

  // acc += sum_t logp_weights[t] grad log pi(a_t|s_t)        (t < T)
  //      + sum_t value_weights[t] grad V(s_t)                 (t <= T)
  //      + sum_t entropy_weights[t] grad H(pi(.|s_t))         (t < T, optional)
  // Throws NumericalError if a gradient entry is not finite.
  void accumulate_gradients(const Episode& episode, std::span<const double> logp_weights,
                            std::span<const double> value_weights, GradAccumulator& acc,
                            std::span<const double> entropy_weights = {}) const;

 protected:
  // dlogp is (T+1) x A: the gradient of the target scalar with respect to each
  // log-probability entry treated as a free coordinate; implementations push it
  // through the log-softmax.
  virtual void backward(const Episode& episode, const EpisodeForward& fwd, std::span<const double> dlogp,
                        std::span<const double> dvalue, GradAccumulator& acc) const = 0;

  std::vector<double> theta_;
  std::vector<double> phi_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two logits and one value per observation index (observations are state ids).
class TabularModel final : public PolicyValueModel {
 public:
  TabularModel(int num_states, int num_actions);

  int num_actions() const override { return num_actions_; }
  bool sparse_gradients() const override { return true; }
  int num_states() const { return num_states_; }
  std::string descriptor() const override;
  using PolicyValueModel::forward;
  void forward(const Episode& episode, EpisodeForward& out) const override;
  std::unique_ptr<PolicyCursor> cursor() const override;

  std::span<double> logits(int s) { return {theta_.data() + row(s), static_cast<std::size_t>(num_actions_)}; }
  std::span<const double> logits(int s) const { return {theta_.data() + row(s), static_cast<std::size_t>(num_actions_)}; }
  double& value(int s) { return phi_[static_cast<std::size_t>(s)]; }
  double value(int s) const { return phi_[static_cast<std::size_t>(s)]; }
  void log_policy(int s, std::vector<double>& out) const;

 protected:
  void backward(const Episode& episode, const EpisodeForward& fwd, std::span<const double> dlogp,
                std::span<const double> dvalue, GradAccumulator& acc) const override;

 private:
  std::size_t row(int s) const { return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_); }
  int num_states_;
  int num_actions_;
};

// Logits W_pi f(s) and value w_v . f(s) over a fixed feature table f (one row per observation).
class LinearModel final : public PolicyValueModel {
 public:
  LinearModel(std::vector<double> features, int num_observations, int num_features, int num_actions);

  int num_actions() const override { return num_actions_; }
  std::string descriptor() const override;
  std::vector<std::pair<std::string, std::vector<double>*>> named_arrays() override;
  using PolicyValueModel::forward;
  void forward(const Episode& episode, EpisodeForward& out) const override;
  std::unique_ptr<PolicyCursor> cursor() const override;
  void log_policy(int observation, std::vector<double>& out) const;

 protected:
  void backward(const Episode& episode, const EpisodeForward& fwd, std::span<const double> dlogp,
                std::span<const double> dvalue, GradAccumulator& acc) const override;

 private:
  std::span<const double> feature_row(int obs) const;
  std::vector<double> features_;
  int num_observations_;
  int num_features_;
  int num_actions_;
};

// Separate LSTM networks for the policy (theta) and the value (phi). The input
// at step t is one-hot(observation_t) concatenated with one-hot(action_{t-1}).
class RecurrentModel final : public PolicyValueModel {
 public:
  RecurrentModel(int observation_size, int num_actions, int hidden, std::uint64_t init_seed);

  int num_actions() const override { return num_actions_; }
  bool recurrent() const override { return true; }
  std::string descriptor() const override;
  using PolicyValueModel::forward;
  void forward(const Episode& episode, EpisodeForward& out) const override;
  std::unique_ptr<PolicyCursor> cursor() const override;

  const LstmShape& policy_shape() const { return policy_net_; }
  const LstmShape& value_shape() const { return value_net_; }

 protected:
  void backward(const Episode& episode, const EpisodeForward& fwd, std::span<const double> dlogp,
                std::span<const double> dvalue, GradAccumulator& acc) const override;

 private:
  friend class RecurrentCursor;
  int observation_size_;
  int num_actions_;
  int hidden_;
  LstmShape policy_net_;
  LstmShape value_net_;
};

// Single action-value model Q_rho with V_rho = F_tau(Q_rho(s, .)) and
// pi_rho = f_tau(Q_rho(s, .)). Parameters live in policy_params().
class UnifiedQModel : public PolicyValueModel {
 public:
  explicit UnifiedQModel(double tau);

  bool unified() const override { return true; }
  double tau() const { return tau_; }

  using PolicyValueModel::forward;
  void forward(const Episode& episode, EpisodeForward& out) const override;
  // Q_rho(s_t, .) for t = 0..T, row-major.
  virtual void q_values(const Episode& episode, std::vector<double>& q) const = 0;

 protected:
  void backward(const Episode& episode, const EpisodeForward& fwd, std::span<const double> dlogp,
                std::span<const double> dvalue, GradAccumulator& acc) const override;
  // acc.policy += sum_t <dq_t, grad Q(s_t, .)>
  virtual void q_backward(const Episode& episode, std::span<const double> dq, GradAccumulator& acc) const = 0;

  double tau_;
};

class TabularUnifiedModel final : public UnifiedQModel {
 public:
  TabularUnifiedModel(int num_states, int num_actions, double tau);

  int num_actions() const override { return num_actions_; }
  bool sparse_gradients() const override { return true; }
  std::string descriptor() const override;
  std::unique_ptr<PolicyCursor> cursor() const override;
  void q_values(const Episode& episode, std::vector<double>& q) const override;

  std::span<double> q(int s) { return {theta_.data() + row(s), static_cast<std::size_t>(num_actions_)}; }
  std::span<const double> q(int s) const { return {theta_.data() + row(s), static_cast<std::size_t>(num_actions_)}; }

 protected:
  void q_backward(const Episode& episode, std::span<const double> dq, GradAccumulator& acc) const override;

 private:
  std::size_t row(int s) const { return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_); }
  int num_states_;
  int num_actions_;
};

class RecurrentUnifiedModel final : public UnifiedQModel {
 public:
  RecurrentUnifiedModel(int observation_size, int num_actions, int hidden, double tau, std::uint64_t init_seed);

  int num_actions() const override { return num_actions_; }
  bool recurrent() const override { return true; }
  std::string descriptor() const override;
  std::unique_ptr<PolicyCursor> cursor() const override;
  void q_values(const Episode& episode, std::vector<double>& q) const override;

 protected:
  void q_backward(const Episode& episode, std::span<const double> dq, GradAccumulator& acc) const override;

 private:
  int observation_size_;
  int num_actions_;
  int hidden_;
  LstmShape net_;
};

// Rebuilds a zero-initialized model from descriptor(); throws std::invalid_argument.
std::unique_ptr<PolicyValueModel> make_model(const std::string& descriptor);

// Builds the recurrent input sequence (one-hot observation, one-hot previous action).
std::vector<double> recurrent_inputs(const Episode& episode, int observation_size, int num_actions);

}  // namespace pcl
