#pragma once

#include <string_view>
#include <vector>

#include "pcl/model.hpp"

namespace pcl {

enum class OptimizerKind { Sgd, Adam };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);

// Applies ascent directions: params += lr * step(delta). Policy parameters use
// lr_policy, value parameters lr_value (= critic weight * lr_policy).
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::Sgd, double beta1 = 0.9, double beta2 = 0.999,
                     double epsilon = 1e-8);

  void apply(PolicyValueModel& model, const GradAccumulator& delta, double lr_policy, double lr_value);

  OptimizerKind kind() const { return kind_; }
  long steps() const { return steps_; }

  // Adam moments, exposed for checkpointing.
  std::vector<double> m_policy, v_policy, m_value, v_value;
  long steps_ = 0;

 private:
  void adam(std::vector<double>& params, const std::vector<double>& delta, std::vector<double>& m,
            std::vector<double>& v, double lr) const;

  OptimizerKind kind_;
  double beta1_, beta2_, epsilon_;
};

// Rescales delta so its global norm is at most max_norm; returns the norm before clipping.
double clip_global_norm(GradAccumulator& delta, double max_norm);

}  // namespace pcl
