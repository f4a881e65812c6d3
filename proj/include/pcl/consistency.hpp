#pragma once

// Soft consistency error over d-step sub-trajectories, the squared-consistency
// objective, and the gradient rules built on it (PCL, Unified PCL, A2C).
//
// Conventions: Delta quantities are ascent directions applied with `+=`. For
// PCL, Delta_phi = -grad_phi O and Delta_theta = -(1/tau) grad_theta O, i.e. the
// temperature is folded into the policy learning rate as in the published
// update rules.

#include <span>
#include <vector>

#include "pcl/model.hpp"

namespace pcl {

struct LossConfig {
  double tau = 0.0;
  double gamma = 1.0;
  int rollout = 1;
  // Only full-length windows (start <= T - d), as in the reference pseudocode.
  // Otherwise windows near the end are truncated so every action is covered.
  bool strict_windows = false;
};

// Sub-trajectory s_{start : start+length}; length is the effective length.
struct WindowView {
  const Episode* episode = nullptr;
  std::size_t start = 0;
  std::size_t length = 0;
};

std::vector<WindowView> episode_windows(const Episode& episode, const LossConfig& cfg);

// -V(s_i) + gamma^d' V(s_{i+d'}) + sum_j gamma^j [r_{i+j} - tau log pi(a_{i+j}|s_{i+j})],
// with V = 0 at a terminal end state.
double soft_consistency(const WindowView& w, const EpisodeForward& fwd, const LossConfig& cfg);
double soft_consistency(const WindowView& w, const PolicyValueModel& model, const LossConfig& cfg);

// Same as soft_consistency without the log-probability terms.
double a2c_advantage(const WindowView& w, const EpisodeForward& fwd, const LossConfig& cfg);
double a2c_advantage(const WindowView& w, const PolicyValueModel& model, const LossConfig& cfg);

// sum over windows of C^2 / 2
double pcl_objective(std::span<const WindowView> windows, const PolicyValueModel& model, const LossConfig& cfg);

struct GradientStats {
  double objective = 0.0;  // sum of C^2 / 2 (A^2 / 2 for A2C)
  std::size_t windows = 0;
  double max_abs_error = 0.0;
};

// Delta_theta += C sum_j gamma^j grad log pi(a_{t+j}|s_{t+j});
// Delta_phi   += C (grad V(s_t) - gamma^d' grad V(s_{t+d'}))   for every window.
GradientStats pcl_gradients(const Episode& episode, const PolicyValueModel& model, const LossConfig& cfg,
                            GradAccumulator& acc);

// Delta_rho += policy_rate * C sum_j gamma^j grad log pi_rho + value_rate * C (grad V_rho(s_t) - gamma^d' grad V_rho(s_{t+d'}))
GradientStats unified_pcl_gradients(const Episode& episode, const UnifiedQModel& model, const LossConfig& cfg,
                                    double policy_rate, double value_rate, GradAccumulator& acc);

// Delta_theta += A grad log pi(a_t|s_t) + entropy_bonus grad H(pi(.|s_t));
// Delta_phi   += A grad V(s_t). One window per start index.
GradientStats a2c_gradients(const Episode& episode, const PolicyValueModel& model, const LossConfig& cfg,
                            GradAccumulator& acc, double entropy_bonus = 0.0);

// Per-step weights used by pcl_gradients, exposed for tests: logp (T) and value (T+1).
struct ConsistencyWeights {
  std::vector<double> logp;
  std::vector<double> value;
  GradientStats stats;
};
ConsistencyWeights pcl_weights(const Episode& episode, const EpisodeForward& fwd, const LossConfig& cfg);

}  // namespace pcl
