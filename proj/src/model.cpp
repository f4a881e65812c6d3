#include "pcl/model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "pcl/softmax.hpp"

namespace pcl {

namespace {

std::size_t sz(int x) { return static_cast<std::size_t>(x); }

// log-softmax of `logits` into `out`, and the matching probabilities into `probs`.
void log_softmax(std::span<const double> logits, std::span<double> out) {
  double m = logits[0];
  for (double x : logits) m = std::max(m, x);
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - m);
  const double lse = m + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

// Pushes a gradient on log-probabilities through the log-softmax: dlogits = G - pi * sum(G).
void logp_to_logits(std::span<const double> dlogp, std::span<const double> logp, std::span<double> dlogits) {
  double total = 0.0;
  for (double g : dlogp) total += g;
  for (std::size_t b = 0; b < dlogp.size(); ++b) dlogits[b] = dlogp[b] - std::exp(logp[b]) * total;
}

void check_observation(int obs, int limit, const char* where) {
  if (obs < 0 || obs >= limit) throw std::out_of_range(std::string(where) + ": observation out of range");
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void GradAccumulator::make_sparse() {
  sparse = true;
  policy_mark.assign(policy.size(), 0);
  value_mark.assign(value.size(), 0);
  policy_touched.clear();
  value_touched.clear();
  for (std::size_t i = 0; i < policy.size(); ++i)
    if (policy[i] != 0.0) touch_policy(i);
  for (std::size_t i = 0; i < value.size(); ++i)
    if (value[i] != 0.0) touch_value(i);
}

void GradAccumulator::zero() {
  if (!sparse) {
    std::fill(policy.begin(), policy.end(), 0.0);
    std::fill(value.begin(), value.end(), 0.0);
    return;
  }
  for (std::size_t i : policy_touched) policy[i] = 0.0, policy_mark[i] = 0;
  for (std::size_t i : value_touched) value[i] = 0.0, value_mark[i] = 0;
  policy_touched.clear();
  value_touched.clear();
}

void GradAccumulator::scale(double factor) {
  for_each_policy([&](std::size_t i) { policy[i] *= factor; });
  for_each_value([&](std::size_t i) { value[i] *= factor; });
}

void GradAccumulator::add(const GradAccumulator& other) {
  if (other.policy.size() != policy.size() || other.value.size() != value.size())
    throw std::invalid_argument("GradAccumulator::add: shape mismatch");
  other.for_each_policy([&](std::size_t i) {
    touch_policy(i);
    policy[i] += other.policy[i];
  });
  other.for_each_value([&](std::size_t i) {
    touch_value(i);
    value[i] += other.value[i];
  });
}

double GradAccumulator::squared_norm() const {
  double s = 0.0;
  for_each_policy([&](std::size_t i) { s += policy[i] * policy[i]; });
  for_each_value([&](std::size_t i) { s += value[i] * value[i]; });
  return s;
}

bool GradAccumulator::all_finite() const {
  bool ok = true;
  for_each_policy([&](std::size_t i) { ok = ok && std::isfinite(policy[i]); });
  for_each_value([&](std::size_t i) { ok = ok && std::isfinite(value[i]); });
  return ok;
}

std::vector<std::pair<std::string, std::vector<double>*>> PolicyValueModel::named_arrays() {
  return {{"theta", &theta_}, {"phi", &phi_}};
}

GradAccumulator PolicyValueModel::make_accumulator() const {
  GradAccumulator acc;
  acc.policy.assign(theta_.size(), 0.0);
  acc.value.assign(phi_.size(), 0.0);
  if (sparse_gradients()) acc.make_sparse();
  return acc;
}

void PolicyValueModel::accumulate_gradients(const Episode& episode, std::span<const double> logp_weights,
                                            std::span<const double> value_weights, GradAccumulator& acc,
                                            std::span<const double> entropy_weights) const {
  const std::size_t steps = episode.length();
  if (logp_weights.size() != steps || value_weights.size() != steps + 1 ||
      (!entropy_weights.empty() && entropy_weights.size() != steps))
    throw std::invalid_argument("accumulate_gradients: weight vectors do not match the episode length");
  if (acc.policy.size() != theta_.size() || acc.value.size() != phi_.size())
    throw std::invalid_argument("accumulate_gradients: accumulator shape mismatch");
  for (double w : logp_weights)
    if (!std::isfinite(w)) throw NumericalError("accumulate_gradients: non-finite log-prob weight");
  for (double w : value_weights)
    if (!std::isfinite(w)) throw NumericalError("accumulate_gradients: non-finite value weight");

  const EpisodeForward fwd = forward(episode);
  const auto na = static_cast<std::size_t>(num_actions());
  std::vector<double> dlogp((steps + 1) * na, 0.0);
  bool any = false;
  for (std::size_t t = 0; t < steps; ++t) {
    if (logp_weights[t] != 0.0) {
      dlogp[t * na + static_cast<std::size_t>(episode.actions[t])] += logp_weights[t];
      any = true;
    }
    if (!entropy_weights.empty() && entropy_weights[t] != 0.0) {
      const auto lp = fwd.log_policy(t);
      for (std::size_t b = 0; b < na; ++b) dlogp[t * na + b] -= entropy_weights[t] * std::exp(lp[b]) * (lp[b] + 1.0);
      any = true;
    }
  }
  for (double w : value_weights) any = any || w != 0.0;
  if (!any) return;

  backward(episode, fwd, dlogp, value_weights, acc);
  if (!acc.all_finite()) throw NumericalError("accumulate_gradients: non-finite gradient");
}

// ---------------------------------------------------------------------------
// Tabular

TabularModel::TabularModel(int num_states, int num_actions) : num_states_(num_states), num_actions_(num_actions) {
  if (num_states < 1 || num_actions < 1) throw std::invalid_argument("TabularModel: sizes must be positive");
  theta_.assign(sz(num_states) * sz(num_actions), 0.0);
  phi_.assign(sz(num_states), 0.0);
}

std::string TabularModel::descriptor() const {
  return "tabular " + std::to_string(num_states_) + " " + std::to_string(num_actions_);
}

void TabularModel::log_policy(int s, std::vector<double>& out) const {
  check_observation(s, num_states_, "TabularModel");
  out.resize(sz(num_actions_));
  log_softmax(logits(s), out);
}

void TabularModel::forward(const Episode& episode, EpisodeForward& out) const {
  const std::size_t rows = episode.observations.size();
  out.num_actions = num_actions_;
  out.log_probs.resize(rows * sz(num_actions_));
  out.values.resize(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    const int s = episode.observations[t];
    check_observation(s, num_states_, "TabularModel");
    log_softmax(logits(s), std::span<double>(out.log_probs.data() + t * sz(num_actions_), sz(num_actions_)));
    out.values[t] = phi_[sz(s)];
  }
}

void TabularModel::backward(const Episode& episode, const EpisodeForward& fwd, std::span<const double> dlogp,
                            std::span<const double> dvalue, GradAccumulator& acc) const {
  const auto na = sz(num_actions_);
  std::vector<double> dlogits(na);
  for (std::size_t t = 0; t < episode.observations.size(); ++t) {
    const auto s = sz(episode.observations[t]);
    logp_to_logits(dlogp.subspan(t * na, na), fwd.log_policy(t), dlogits);
    for (std::size_t b = 0; b < na; ++b) {
      acc.touch_policy(s * na + b);
      acc.policy[s * na + b] += dlogits[b];
    }
    acc.touch_value(s);
    acc.value[s] += dvalue[t];
  }
}

namespace {

class TabularCursor final : public PolicyCursor {
 public:
  explicit TabularCursor(const TabularModel& m) : model_(m) {}
  void log_policy(int observation, std::vector<double>& out) override { model_.log_policy(observation, out); }
  void advance(int) override {}

 private:
  const TabularModel& model_;
};

}  // namespace

std::unique_ptr<PolicyCursor> TabularModel::cursor() const { return std::make_unique<TabularCursor>(*this); }

// ---------------------------------------------------------------------------
// Linear

LinearModel::LinearModel(std::vector<double> features, int num_observations, int num_features, int num_actions)
    : features_(std::move(features)),
      num_observations_(num_observations),
      num_features_(num_features),
      num_actions_(num_actions) {
  if (num_observations < 1 || num_features < 1 || num_actions < 1)
    throw std::invalid_argument("LinearModel: sizes must be positive");
  if (features_.size() != sz(num_observations) * sz(num_features))
    throw std::invalid_argument("LinearModel: feature table has the wrong size");
  theta_.assign(sz(num_actions) * sz(num_features), 0.0);
  phi_.assign(sz(num_features), 0.0);
}

std::string LinearModel::descriptor() const {
  return "linear " + std::to_string(num_observations_) + " " + std::to_string(num_features_) + " " +
         std::to_string(num_actions_);
}

std::vector<std::pair<std::string, std::vector<double>*>> LinearModel::named_arrays() {
  return {{"theta", &theta_}, {"phi", &phi_}, {"features", &features_}};
}

std::span<const double> LinearModel::feature_row(int obs) const {
  check_observation(obs, num_observations_, "LinearModel");
  return {features_.data() + sz(obs) * sz(num_features_), sz(num_features_)};
}

void LinearModel::log_policy(int observation, std::vector<double>& out) const {
  const auto f = feature_row(observation);
  std::vector<double> logits(sz(num_actions_), 0.0);
  for (std::size_t b = 0; b < logits.size(); ++b)
    for (std::size_t k = 0; k < f.size(); ++k) logits[b] += theta_[b * f.size() + k] * f[k];
  out.resize(logits.size());
  log_softmax(logits, out);
}

void LinearModel::forward(const Episode& episode, EpisodeForward& out) const {
  const std::size_t rows = episode.observations.size();
  out.num_actions = num_actions_;
  out.log_probs.resize(rows * sz(num_actions_));
  out.values.resize(rows);
  std::vector<double> lp;
  for (std::size_t t = 0; t < rows; ++t) {
    const int obs = episode.observations[t];
    log_policy(obs, lp);
    std::copy(lp.begin(), lp.end(), out.log_probs.begin() + static_cast<std::ptrdiff_t>(t * sz(num_actions_)));
    const auto f = feature_row(obs);
    double v = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) v += phi_[k] * f[k];
    out.values[t] = v;
  }
}

void LinearModel::backward(const Episode& episode, const EpisodeForward& fwd, std::span<const double> dlogp,
                           std::span<const double> dvalue, GradAccumulator& acc) const {
  const auto na = sz(num_actions_);
  const auto nf = sz(num_features_);
  std::vector<double> dlogits(na);
  for (std::size_t t = 0; t < episode.observations.size(); ++t) {
    const auto f = feature_row(episode.observations[t]);
    logp_to_logits(dlogp.subspan(t * na, na), fwd.log_policy(t), dlogits);
    for (std::size_t b = 0; b < na; ++b)
      for (std::size_t k = 0; k < nf; ++k) acc.policy[b * nf + k] += dlogits[b] * f[k];
    for (std::size_t k = 0; k < nf; ++k) acc.value[k] += dvalue[t] * f[k];
  }
}

namespace {

class LinearCursor final : public PolicyCursor {
 public:
  explicit LinearCursor(const LinearModel& m) : model_(m) {}
  void log_policy(int observation, std::vector<double>& out) override { model_.log_policy(observation, out); }
  void advance(int) override {}

 private:
  const LinearModel& model_;
};

}  // namespace

std::unique_ptr<PolicyCursor> LinearModel::cursor() const { return std::make_unique<LinearCursor>(*this); }

// ---------------------------------------------------------------------------
// Recurrent

std::vector<double> recurrent_inputs(const Episode& episode, int observation_size, int num_actions) {
  const std::size_t rows = episode.observations.size();
  const std::size_t width = sz(observation_size + num_actions);
  std::vector<double> x(rows * width, 0.0);
  for (std::size_t t = 0; t < rows; ++t) {
    check_observation(episode.observations[t], observation_size, "recurrent model");
    x[t * width + sz(episode.observations[t])] = 1.0;
    if (t > 0) x[t * width + sz(observation_size) + sz(episode.actions[t - 1])] = 1.0;
  }
  return x;
}

namespace {

// Shared incremental state for both recurrent models.
class LstmCursor final : public PolicyCursor {
 public:
  // transform maps the raw read-out to log-probabilities in place.
  LstmCursor(const LstmShape& net, const std::vector<double>& params, int observation_size, int num_actions,
             double tau)
      : net_(net),
        params_(params),
        observation_size_(observation_size),
        num_actions_(num_actions),
        tau_(tau),
        state_(net.initial_state()),
        input_(sz(observation_size + num_actions), 0.0),
        raw_(sz(num_actions)) {}

  void log_policy(int observation, std::vector<double>& out) override {
    check_observation(observation, observation_size_, "recurrent model");
    std::fill(input_.begin(), input_.end(), 0.0);
    input_[sz(observation)] = 1.0;
    if (prev_action_ >= 0) input_[sz(observation_size_ + prev_action_)] = 1.0;
    pending_ = state_;
    net_.step(params_, pending_, input_, raw_);
    out.resize(raw_.size());
    if (tau_ > 0.0) {
      log_soft_indmax(raw_, tau_, out);
    } else {
      log_softmax(raw_, out);
    }
  }

  void advance(int action) override {
    if (action < 0 || action >= num_actions_) throw std::out_of_range("recurrent model: action out of range");
    state_ = pending_;
    prev_action_ = action;
  }

 private:
  const LstmShape& net_;
  const std::vector<double>& params_;
  int observation_size_;
  int num_actions_;
  double tau_;
  LstmState state_;
  LstmState pending_;
  std::vector<double> input_;
  std::vector<double> raw_;
  int prev_action_ = -1;
};

}  // namespace

RecurrentModel::RecurrentModel(int observation_size, int num_actions, int hidden, std::uint64_t init_seed)
    : observation_size_(observation_size),
      num_actions_(num_actions),
      hidden_(hidden),
      policy_net_(observation_size + num_actions, hidden, num_actions),
      value_net_(observation_size + num_actions, hidden, 1) {
  theta_.assign(policy_net_.size(), 0.0);
  phi_.assign(value_net_.size(), 0.0);
  Rng rng(init_seed);
  policy_net_.initialize(theta_, rng);
  value_net_.initialize(phi_, rng);
}

std::string RecurrentModel::descriptor() const {
  return "recurrent " + std::to_string(observation_size_) + " " + std::to_string(num_actions_) + " " +
         std::to_string(hidden_);
}

void RecurrentModel::forward(const Episode& episode, EpisodeForward& out) const {
  const std::size_t rows = episode.observations.size();
  const std::vector<double> x = recurrent_inputs(episode, observation_size_, num_actions_);
  std::vector<double> logits(rows * sz(num_actions_));
  policy_net_.forward(theta_, x, rows, logits, nullptr);
  out.num_actions = num_actions_;
  out.log_probs.resize(logits.size());
  for (std::size_t t = 0; t < rows; ++t)
    log_softmax(std::span<const double>(logits.data() + t * sz(num_actions_), sz(num_actions_)),
                std::span<double>(out.log_probs.data() + t * sz(num_actions_), sz(num_actions_)));
  out.values.resize(rows);
  value_net_.forward(phi_, x, rows, out.values, nullptr);
}

void RecurrentModel::backward(const Episode& episode, const EpisodeForward& fwd, std::span<const double> dlogp,
                              std::span<const double> dvalue, GradAccumulator& acc) const {
  const std::size_t rows = episode.observations.size();
  const auto na = sz(num_actions_);
  const std::vector<double> x = recurrent_inputs(episode, observation_size_, num_actions_);
  std::vector<double> scratch(rows * na);
  std::vector<double> dlogits(rows * na);
  for (std::size_t t = 0; t < rows; ++t)
    logp_to_logits(dlogp.subspan(t * na, na), fwd.log_policy(t), std::span<double>(dlogits.data() + t * na, na));
  LstmCache cache;
  policy_net_.forward(theta_, x, rows, scratch, &cache);
  policy_net_.backward(theta_, cache, dlogits, acc.policy);
  std::vector<double> values(rows);
  value_net_.forward(phi_, x, rows, values, &cache);
  value_net_.backward(phi_, cache, dvalue, acc.value);
}

std::unique_ptr<PolicyCursor> RecurrentModel::cursor() const {
  return std::make_unique<LstmCursor>(policy_net_, theta_, observation_size_, num_actions_, 0.0);
}

// ---------------------------------------------------------------------------
// Unified

UnifiedQModel::UnifiedQModel(double tau) : tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("UnifiedQModel: tau must be positive");
}

void UnifiedQModel::forward(const Episode& episode, EpisodeForward& out) const {
  std::vector<double> q;
  q_values(episode, q);
  const auto na = sz(num_actions());
  const std::size_t rows = episode.observations.size();
  out.num_actions = num_actions();
  out.log_probs.resize(rows * na);
  out.values.resize(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    const std::span<const double> qt(q.data() + t * na, na);
    const double v = softmax_value(qt, tau_);
    out.values[t] = v;
    for (std::size_t b = 0; b < na; ++b) out.log_probs[t * na + b] = (qt[b] - v) / tau_;
  }
}

void UnifiedQModel::backward(const Episode& episode, const EpisodeForward& fwd, std::span<const double> dlogp,
                             std::span<const double> dvalue, GradAccumulator& acc) const {
  // log pi = (Q - F(Q)) / tau and V = F(Q), with dF/dQ = pi.
  const auto na = sz(num_actions());
  const std::size_t rows = episode.observations.size();
  std::vector<double> dq(rows * na);
  for (std::size_t t = 0; t < rows; ++t) {
    const auto lp = fwd.log_policy(t);
    double total = 0.0;
    for (std::size_t b = 0; b < na; ++b) total += dlogp[t * na + b];
    for (std::size_t b = 0; b < na; ++b) {
      const double p = std::exp(lp[b]);
      dq[t * na + b] = (dlogp[t * na + b] - p * total) / tau_ + dvalue[t] * p;
    }
  }
  q_backward(episode, dq, acc);
}

TabularUnifiedModel::TabularUnifiedModel(int num_states, int num_actions, double tau)
    : UnifiedQModel(tau), num_states_(num_states), num_actions_(num_actions) {
  if (num_states < 1 || num_actions < 1) throw std::invalid_argument("TabularUnifiedModel: sizes must be positive");
  theta_.assign(sz(num_states) * sz(num_actions), 0.0);
}

std::string TabularUnifiedModel::descriptor() const {
  return "unified_tabular " + std::to_string(num_states_) + " " + std::to_string(num_actions_) + " " +
         format_double(tau_);
}

void TabularUnifiedModel::q_values(const Episode& episode, std::vector<double>& q) const {
  const auto na = sz(num_actions_);
  q.resize(episode.observations.size() * na);
  for (std::size_t t = 0; t < episode.observations.size(); ++t) {
    const int s = episode.observations[t];
    check_observation(s, num_states_, "TabularUnifiedModel");
    std::copy_n(theta_.begin() + static_cast<std::ptrdiff_t>(row(s)), na, q.begin() + static_cast<std::ptrdiff_t>(t * na));
  }
}

void TabularUnifiedModel::q_backward(const Episode& episode, std::span<const double> dq, GradAccumulator& acc) const {
  const auto na = sz(num_actions_);
  for (std::size_t t = 0; t < episode.observations.size(); ++t) {
    const std::size_t r = row(episode.observations[t]);
    for (std::size_t b = 0; b < na; ++b) {
      acc.touch_policy(r + b);
      acc.policy[r + b] += dq[t * na + b];
    }
  }
}

namespace {

class TabularUnifiedCursor final : public PolicyCursor {
 public:
  explicit TabularUnifiedCursor(const TabularUnifiedModel& m) : model_(m) {}
  void log_policy(int observation, std::vector<double>& out) override {
    log_soft_indmax(model_.q(observation), model_.tau(), out);
  }
  void advance(int) override {}

 private:
  const TabularUnifiedModel& model_;
};

}  // namespace

std::unique_ptr<PolicyCursor> TabularUnifiedModel::cursor() const {
  return std::make_unique<TabularUnifiedCursor>(*this);
}

RecurrentUnifiedModel::RecurrentUnifiedModel(int observation_size, int num_actions, int hidden, double tau,
                                             std::uint64_t init_seed)
    : UnifiedQModel(tau),
      observation_size_(observation_size),
      num_actions_(num_actions),
      hidden_(hidden),
      net_(observation_size + num_actions, hidden, num_actions) {
  theta_.assign(net_.size(), 0.0);
  Rng rng(init_seed);
  net_.initialize(theta_, rng);
}

std::string RecurrentUnifiedModel::descriptor() const {
  return "unified_recurrent " + std::to_string(observation_size_) + " " + std::to_string(num_actions_) + " " +
         std::to_string(hidden_) + " " + format_double(tau_);
}

void RecurrentUnifiedModel::q_values(const Episode& episode, std::vector<double>& q) const {
  const std::size_t rows = episode.observations.size();
  const std::vector<double> x = recurrent_inputs(episode, observation_size_, num_actions_);
  q.resize(rows * sz(num_actions_));
  net_.forward(theta_, x, rows, q, nullptr);
}

void RecurrentUnifiedModel::q_backward(const Episode& episode, std::span<const double> dq, GradAccumulator& acc) const {
  const std::size_t rows = episode.observations.size();
  const std::vector<double> x = recurrent_inputs(episode, observation_size_, num_actions_);
  std::vector<double> q(rows * sz(num_actions_));
  LstmCache cache;
  net_.forward(theta_, x, rows, q, &cache);
  net_.backward(theta_, cache, dq, acc.policy);
}

std::unique_ptr<PolicyCursor> RecurrentUnifiedModel::cursor() const {
  return std::make_unique<LstmCursor>(net_, theta_, observation_size_, num_actions_, tau_);
}

// ---------------------------------------------------------------------------

std::unique_ptr<PolicyValueModel> make_model(const std::string& descriptor) {
  std::istringstream in(descriptor);
  std::string kind;
  in >> kind;
  auto fail = [&]() -> std::unique_ptr<PolicyValueModel> {
    throw std::invalid_argument("make_model: malformed descriptor '" + descriptor + "'");
  };
  int a = 0, b = 0, c = 0;
  double tau = 0.0;
  if (kind == "tabular") {
    if (!(in >> a >> b)) return fail();
    return std::make_unique<TabularModel>(a, b);
  }
  if (kind == "linear") {
    if (!(in >> a >> b >> c)) return fail();
    return std::make_unique<LinearModel>(std::vector<double>(sz(a) * sz(b), 0.0), a, b, c);
  }
  if (kind == "recurrent") {
    if (!(in >> a >> b >> c)) return fail();
    return std::make_unique<RecurrentModel>(a, b, c, 0);
  }
  if (kind == "unified_tabular") {
    if (!(in >> a >> b >> tau)) return fail();
    return std::make_unique<TabularUnifiedModel>(a, b, tau);
  }
  if (kind == "unified_recurrent") {
    if (!(in >> a >> b >> c >> tau)) return fail();
    return std::make_unique<RecurrentUnifiedModel>(a, b, c, tau, 0);
  }
  return fail();
}

}  // namespace pcl
