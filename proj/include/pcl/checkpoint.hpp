#pragma once

// Versioned text checkpoints. Parameters are written as hexadecimal floats so
// a save/load cycle restores every bit.

#include <iosfwd>
#include <memory>

#include "pcl/model.hpp"
#include "pcl/optimizer.hpp"

namespace pcl {

struct Checkpoint {
  std::unique_ptr<PolicyValueModel> model;
  Optimizer optimizer;
};

void save_checkpoint(std::ostream& out, PolicyValueModel& model, const Optimizer& optimizer);
// Throws std::runtime_error on malformed input or shape mismatches.
Checkpoint load_checkpoint(std::istream& in);

}  // namespace pcl
