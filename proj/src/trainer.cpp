#include "pcl/trainer.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

#include "pcl/softmax.hpp"

namespace pcl {

Algorithm parse_algorithm(std::string_view name) {
  if (name == "pcl") return Algorithm::Pcl;
  if (name == "unified_pcl") return Algorithm::UnifiedPcl;
  if (name == "a2c") return Algorithm::A2c;
  if (name == "tabular_q_soft") return Algorithm::TabularQSoft;
  if (name == "tabular_q_hard") return Algorithm::TabularQHard;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

std::string_view algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Pcl: return "pcl";
    case Algorithm::UnifiedPcl: return "unified_pcl";
    case Algorithm::A2c: return "a2c";
    case Algorithm::TabularQSoft: return "tabular_q_soft";
    case Algorithm::TabularQHard: return "tabular_q_hard";
  }
  return "unknown";
}

void Hyperparams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("hyperparameters: ") + what);
  };
  require(tau >= 0.0 && std::isfinite(tau), "tau must be >= 0");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(rollout >= 1, "rollout must be >= 1");
  require(batch_size >= 1, "batch size must be >= 1");
  require(replay_batch_size >= -1, "replay batch size must be >= -1");
  require(lr_policy >= 0.0 && critic_weight >= 0.0, "learning rates must be >= 0");
  require(buffer_capacity >= 1, "buffer capacity must be >= 1");
  require(replay_alpha >= 0.0, "replay alpha must be >= 0");
  require(iterations >= 0, "iterations must be >= 0");
  require(eval_period >= 1, "eval period must be >= 1");
  require(clip_norm >= 0.0, "clip norm must be >= 0");
  require(max_episode_steps >= 1, "max episode steps must be >= 1");
}

Episode sample_episode(const PolicyValueModel& model, Environment& env, std::uint64_t seed, Rng& rng,
                       int max_steps, bool uniform) {
  Episode ep;
  ep.seed = seed;
  auto cursor = model.cursor();
  int obs = env.reset(seed);
  ep.observations.push_back(obs);
  std::vector<double> log_probs, probs(static_cast<std::size_t>(model.num_actions()));
  for (int t = 0; t < max_steps; ++t) {
    int action;
    cursor->log_policy(obs, log_probs);
    if (uniform) {
      action = static_cast<int>(rng.index(static_cast<std::size_t>(model.num_actions())));
    } else {
      for (std::size_t b = 0; b < probs.size(); ++b) probs[b] = std::exp(log_probs[b]);
      action = static_cast<int>(rng.categorical(probs));
    }
    cursor->advance(action);
    const StepResult r = env.step(action);
    ep.actions.push_back(action);
    ep.rewards.push_back(r.reward);
    ep.observations.push_back(r.observation);
    obs = r.observation;
    if (r.done) {
      ep.terminated = r.terminated;
      break;
    }
  }
  return ep;
}

namespace {

using GradientFn = std::function<GradientStats(const Episode&, GradAccumulator&)>;

class RewardWindow {
 public:
  void push(double r) {
    recent_.push_back(r);
    if (recent_.size() > 100) recent_.pop_front();
  }
  double mean() const {
    if (recent_.empty()) return 0.0;
    double s = 0.0;
    for (double r : recent_) s += r;
    return s / static_cast<double>(recent_.size());
  }

 private:
  std::deque<double> recent_;
};

void apply_batch(PolicyValueModel& model, Optimizer& opt, GradAccumulator& acc, std::size_t count,
                 const Hyperparams& hp, double lr_policy, double lr_value) {
  if (count == 0) return;
  if (hp.average_batch) acc.scale(1.0 / static_cast<double>(count));
  clip_global_norm(acc, hp.clip_norm);
  if (!acc.all_finite()) throw NumericalError("training: non-finite update");
  opt.apply(model, acc, lr_policy, lr_value);
}

struct LoopSpec {
  GradientFn gradients;
  bool use_replay;
  double lr_policy;
  double lr_value;
};

std::vector<RunMetrics> run_loop(const EnvFactory& make_env, PolicyValueModel& model, const Hyperparams& hp,
                                 const TrainOptions& options, const LoopSpec& spec) {
  hp.validate();
  Rng rng(hp.seed);
  std::unique_ptr<Environment> env = make_env(rng.split());
  if (env->num_actions() != model.num_actions())
    throw std::invalid_argument("training: model and environment disagree on the number of actions");

  ReplayBuffer buffer({hp.buffer_capacity, hp.replay_alpha, 0.1});
  buffer.seed_experts(options.experts, rng);
  Optimizer local(hp.optimizer);
  Optimizer& opt = options.optimizer ? *options.optimizer : local;
  if (opt.kind() != hp.optimizer) throw std::invalid_argument("training: optimizer kind differs from hyperparameters");
  GradAccumulator acc = model.make_accumulator();
  RewardWindow window;
  std::vector<RunMetrics> metrics;
  std::vector<Episode> batch;
  long env_steps = 0;
  const int replay_batch = hp.replay_batch_size < 0 ? hp.batch_size : hp.replay_batch_size;

  for (int it = 1; it <= hp.iterations; ++it) {
    batch.clear();
    for (int b = 0; b < hp.batch_size; ++b) {
      const std::uint64_t seed = rng.next();
      batch.push_back(sample_episode(model, *env, seed, rng, hp.max_episode_steps, hp.uniform_behavior));
      env->on_episode_end(batch.back());
      env_steps += static_cast<long>(batch.back().length());
      window.push(batch.back().total_reward());
    }

    double loss = 0.0;
    acc.zero();
    for (const Episode& ep : batch) loss += spec.gradients(ep, acc).objective;
    loss /= static_cast<double>(batch.size());
    if (!std::isfinite(loss)) throw NumericalError("training: non-finite loss at iteration " + std::to_string(it));
    if (!hp.uniform_behavior) apply_batch(model, opt, acc, batch.size(), hp, spec.lr_policy, spec.lr_value);

    if (spec.use_replay) {
      for (Episode& ep : batch) buffer.insert(std::move(ep), rng);
      if (replay_batch > 0 && !buffer.empty()) {
        acc.zero();
        for (int b = 0; b < replay_batch; ++b) spec.gradients(buffer.sample(rng), acc);
        apply_batch(model, opt, acc, static_cast<std::size_t>(replay_batch), hp, spec.lr_policy, spec.lr_value);
      }
    }

    if (it % hp.eval_period == 0 || it == hp.iterations) {
      RunMetrics m{it, env_steps, window.mean(), loss, buffer.size()};
      metrics.push_back(m);
      if (options.sink) options.sink(m);
      if (options.stop && options.stop(m)) break;
    }
  }
  return metrics;
}

}  // namespace

std::vector<RunMetrics> train_pcl(const EnvFactory& make_env, PolicyValueModel& model, const Hyperparams& hp,
                                  const TrainOptions& options) {
  if (model.unified()) throw std::invalid_argument("train_pcl: use train_unified_pcl for unified models");
  const LossConfig cfg = hp.loss();
  LoopSpec spec{[&](const Episode& ep, GradAccumulator& acc) { return pcl_gradients(ep, model, cfg, acc); }, true,
                hp.lr_policy, hp.lr_value()};
  return run_loop(make_env, model, hp, options, spec);
}

std::vector<RunMetrics> train_unified_pcl(const EnvFactory& make_env, UnifiedQModel& model, const Hyperparams& hp,
                                          const TrainOptions& options) {
  LossConfig cfg = hp.loss();
  if (std::fabs(cfg.tau - model.tau()) > 0.0)
    throw std::invalid_argument("train_unified_pcl: model temperature differs from hyperparameter tau");
  // The value-term weight carries the critic weight; the optimizer then scales everything by lr_policy.
  LoopSpec spec{[&](const Episode& ep, GradAccumulator& acc) {
                  return unified_pcl_gradients(ep, model, cfg, 1.0, hp.critic_weight, acc);
                },
                true, hp.lr_policy, hp.lr_policy};
  return run_loop(make_env, model, hp, options, spec);
}

std::vector<RunMetrics> train_a2c(const EnvFactory& make_env, PolicyValueModel& model, const Hyperparams& hp,
                                  const TrainOptions& options) {
  if (model.unified()) throw std::invalid_argument("train_a2c: needs separate policy and value parameters");
  if (hp.uniform_behavior) throw std::invalid_argument("train_a2c: on-policy only");
  LossConfig cfg = hp.loss();
  const double bonus = cfg.tau;
  cfg.tau = 0.0;
  LoopSpec spec{[&](const Episode& ep, GradAccumulator& acc) { return a2c_gradients(ep, model, cfg, acc, bonus); },
                false, hp.lr_policy, hp.lr_value()};
  return run_loop(make_env, model, hp, options, spec);
}

QTable train_tabular_q(const TabularMDP& mdp, const TabularQOptions& o, bool soft) {
  if (soft && !(o.tau > 0.0)) throw std::invalid_argument("train_tabular_q: soft backups need tau > 0");
  if (o.updates < 0 || o.lr_exponent < 0.0) throw std::invalid_argument("train_tabular_q: bad options");
  const int na = mdp.num_actions();
  QTable q{mdp.num_states(), na, std::vector<double>(static_cast<std::size_t>(mdp.num_states() * na), 0.0)};
  std::vector<std::pair<int, int>> pairs;
  for (int s = 0; s < mdp.num_states(); ++s)
    if (!mdp.terminal(s))
      for (int a = 0; a < na; ++a) pairs.emplace_back(s, a);
  std::vector<long> visits(q.q.size(), 0);
  Rng rng(o.seed);

  auto backup = [&](int s) -> double {
    if (mdp.terminal(s)) return 0.0;
    return soft ? softmax_value(q.row(s), o.tau) : hard_max(q.row(s)).value;
  };
  std::vector<double> weights;
  for (long n = 0; n < o.updates; ++n) {
    const auto [s, a] = pairs[rng.index(pairs.size())];
    const auto next = mdp.successors(s, a);
    double future = 0.0;
    if (o.sampled) {
      if (next.size() == 1) {
        future = backup(next[0].state);
      } else {
        weights.clear();
        for (const Successor& nx : next) weights.push_back(nx.prob);
        future = backup(next[rng.categorical(weights)].state);
      }
    } else {
      for (const Successor& nx : next) future += nx.prob * backup(nx.state);
    }
    long& count = visits[static_cast<std::size_t>(s * na + a)];
    const double lr = std::pow(1.0 + static_cast<double>(count), -o.lr_exponent);
    ++count;
    double& cell = q.at(s, a);
    cell += lr * (mdp.reward(s, a) + mdp.gamma() * future - cell);
  }
  return q;
}

EvalResult evaluate(const PolicyValueModel& model, Environment& env, int episodes, std::uint64_t seed,
                    int max_steps) {
  if (episodes < 1) throw std::invalid_argument("evaluate: need at least one episode");
  Rng rng(seed);
  std::vector<double> returns;
  double max_total = 0.0;
  for (int i = 0; i < episodes; ++i) {
    const std::uint64_t episode_seed = rng.next();
    returns.push_back(sample_episode(model, env, episode_seed, rng, max_steps).total_reward());
    max_total += env.max_episode_reward();
  }
  EvalResult out;
  for (double r : returns) out.mean_reward += r;
  out.mean_reward /= episodes;
  for (double r : returns) out.stddev += (r - out.mean_reward) * (r - out.mean_reward);
  out.stddev = episodes > 1 ? std::sqrt(out.stddev / (episodes - 1)) : 0.0;
  out.mean_max_reward = max_total / episodes;
  return out;
}

}  // namespace pcl
