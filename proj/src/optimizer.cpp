#include "pcl/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcl {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

Optimizer::Optimizer(OptimizerKind kind, double beta1, double beta2, double epsilon)
    : kind_(kind), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Optimizer::adam(std::vector<double>& params, const std::vector<double>& delta, std::vector<double>& m,
                     std::vector<double>& v, double lr) const {
  if (m.size() != params.size()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
  }
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1_ * m[i] + (1.0 - beta1_) * delta[i];
    v[i] = beta2_ * v[i] + (1.0 - beta2_) * delta[i] * delta[i];
    params[i] += lr * (m[i] / correction1) / (std::sqrt(v[i] / correction2) + epsilon_);
  }
}

void Optimizer::apply(PolicyValueModel& model, const GradAccumulator& delta, double lr_policy, double lr_value) {
  if (lr_policy < 0.0 || lr_value < 0.0) throw std::invalid_argument("Optimizer: learning rates must be >= 0");
  auto& theta = model.policy_params();
  auto& phi = model.value_params();
  if (delta.policy.size() != theta.size() || delta.value.size() != phi.size())
    throw std::invalid_argument("Optimizer: update shape mismatch");
  if (kind_ == OptimizerKind::Sgd) {
    delta.for_each_policy([&](std::size_t i) { theta[i] += lr_policy * delta.policy[i]; });
    delta.for_each_value([&](std::size_t i) { phi[i] += lr_value * delta.value[i]; });
    ++steps_;
    return;
  }
  ++steps_;
  adam(theta, delta.policy, m_policy, v_policy, lr_policy);
  if (!phi.empty()) adam(phi, delta.value, m_value, v_value, lr_value);
}

double clip_global_norm(GradAccumulator& delta, double max_norm) {
  const double norm = std::sqrt(delta.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) delta.scale(max_norm / norm);
  return norm;
}

}  // namespace pcl
