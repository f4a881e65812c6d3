#include "pcl/consistency.hpp"

#include <cmath>
#include <stdexcept>

namespace pcl {

namespace {

void check_config(const LossConfig& cfg) {
  if (cfg.tau < 0.0 || !(cfg.gamma >= 0.0 && cfg.gamma <= 1.0) || cfg.rollout < 1)
    throw std::invalid_argument("LossConfig: need tau >= 0, gamma in [0, 1], rollout >= 1");
}

double end_value(const WindowView& w, const EpisodeForward& fwd) {
  const std::size_t end = w.start + w.length;
  if (end == w.episode->length() && w.episode->terminated) return 0.0;
  return fwd.values[end];
}

// Shared arithmetic for both errors; tau = 0 drops the log-probability terms
// without touching the floating-point sequence of the reward sum.
double window_error(const WindowView& w, const EpisodeForward& fwd, const LossConfig& cfg, bool soft) {
  const Episode& ep = *w.episode;
  double discount = 1.0;
  double path = 0.0;
  for (std::size_t j = 0; j < w.length; ++j) {
    const std::size_t k = w.start + j;
    const double r = ep.rewards[k];
    if (soft) {
      path += discount * (r - cfg.tau * fwd.log_policy(k)[static_cast<std::size_t>(ep.actions[k])]);
    } else {
      path += discount * (r - 0.0);
    }
    discount *= cfg.gamma;
  }
  return -fwd.values[w.start] + discount * end_value(w, fwd) + path;
}

double discount_pow(double gamma, std::size_t n) {
  double d = 1.0;
  for (std::size_t i = 0; i < n; ++i) d *= gamma;
  return d;
}

}  // namespace

std::vector<WindowView> episode_windows(const Episode& episode, const LossConfig& cfg) {
  check_config(cfg);
  std::vector<WindowView> out;
  const std::size_t steps = episode.length();
  const auto d = static_cast<std::size_t>(cfg.rollout);
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t len = std::min(d, steps - t);
    if (cfg.strict_windows && len < d) break;
    out.push_back({&episode, t, len});
  }
  return out;
}

double soft_consistency(const WindowView& w, const EpisodeForward& fwd, const LossConfig& cfg) {
  return window_error(w, fwd, cfg, true);
}

double soft_consistency(const WindowView& w, const PolicyValueModel& model, const LossConfig& cfg) {
  return soft_consistency(w, model.forward(*w.episode), cfg);
}

double a2c_advantage(const WindowView& w, const EpisodeForward& fwd, const LossConfig& cfg) {
  return window_error(w, fwd, cfg, false);
}

double a2c_advantage(const WindowView& w, const PolicyValueModel& model, const LossConfig& cfg) {
  return a2c_advantage(w, model.forward(*w.episode), cfg);
}

double pcl_objective(std::span<const WindowView> windows, const PolicyValueModel& model, const LossConfig& cfg) {
  double total = 0.0;
  const Episode* cached_for = nullptr;
  EpisodeForward fwd;
  for (const WindowView& w : windows) {
    if (w.episode != cached_for) {
      model.forward(*w.episode, fwd);
      cached_for = w.episode;
    }
    const double c = soft_consistency(w, fwd, cfg);
    total += 0.5 * c * c;
  }
  return total;
}

ConsistencyWeights pcl_weights(const Episode& episode, const EpisodeForward& fwd, const LossConfig& cfg) {
  const std::size_t steps = episode.length();
  ConsistencyWeights out{std::vector<double>(steps, 0.0), std::vector<double>(steps + 1, 0.0), {}};
  for (const WindowView& w : episode_windows(episode, cfg)) {
    const double c = soft_consistency(w, fwd, cfg);
    if (!std::isfinite(c)) throw NumericalError("pcl_gradients: non-finite consistency error");
    double discount = 1.0;
    for (std::size_t j = 0; j < w.length; ++j) {
      out.logp[w.start + j] += c * discount;
      discount *= cfg.gamma;
    }
    out.value[w.start] += c;
    const std::size_t end = w.start + w.length;
    if (!(end == steps && episode.terminated)) out.value[end] -= c * discount_pow(cfg.gamma, w.length);
    out.stats.objective += 0.5 * c * c;
    out.stats.max_abs_error = std::max(out.stats.max_abs_error, std::fabs(c));
    ++out.stats.windows;
  }
  return out;
}

GradientStats pcl_gradients(const Episode& episode, const PolicyValueModel& model, const LossConfig& cfg,
                            GradAccumulator& acc) {
  const ConsistencyWeights w = pcl_weights(episode, model.forward(episode), cfg);
  model.accumulate_gradients(episode, w.logp, w.value, acc);
  return w.stats;
}

GradientStats unified_pcl_gradients(const Episode& episode, const UnifiedQModel& model, const LossConfig& cfg,
                                    double policy_rate, double value_rate, GradAccumulator& acc) {
  ConsistencyWeights w = pcl_weights(episode, model.forward(episode), cfg);
  for (double& x : w.logp) x *= policy_rate;
  for (double& x : w.value) x *= value_rate;
  model.accumulate_gradients(episode, w.logp, w.value, acc);
  return w.stats;
}

GradientStats a2c_gradients(const Episode& episode, const PolicyValueModel& model, const LossConfig& cfg,
                            GradAccumulator& acc, double entropy_bonus) {
  const EpisodeForward fwd = model.forward(episode);
  const std::size_t steps = episode.length();
  std::vector<double> logp(steps, 0.0), value(steps + 1, 0.0);
  GradientStats stats;
  for (const WindowView& w : episode_windows(episode, cfg)) {
    const double a = a2c_advantage(w, fwd, cfg);
    if (!std::isfinite(a)) throw NumericalError("a2c_gradients: non-finite advantage");
    logp[w.start] += a;
    value[w.start] += a;
    stats.objective += 0.5 * a * a;
    stats.max_abs_error = std::max(stats.max_abs_error, std::fabs(a));
    ++stats.windows;
  }
  std::vector<double> entropy;
  if (entropy_bonus != 0.0) entropy.assign(steps, entropy_bonus);
  model.accumulate_gradients(episode, logp, value, acc, entropy);
  return stats;
}

}  // namespace pcl
