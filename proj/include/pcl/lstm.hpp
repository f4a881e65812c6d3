#pragma once

// Single-layer LSTM with a linear read-out, operating on a flat parameter
// span. Layout: W (4H x (I+H)), b (4H), W_out (O x H), b_out (O); gate order
// input, forget, cell, output.

#include <span>
#include <vector>

#include "pcl/random.hpp"

namespace pcl {

struct LstmCache {
  std::size_t steps = 0;
  std::vector<double> inputs;  // T x I
  std::vector<double> gates;   // T x 4H, post-activation
  std::vector<double> cells;   // T x H
  std::vector<double> hidden;  // T x H
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

class LstmShape {
 public:
  LstmShape() = default;
  LstmShape(int input, int hidden, int output, std::size_t offset = 0);

  int input() const { return input_; }
  int hidden() const { return hidden_; }
  int output() const { return output_; }
  std::size_t offset() const { return offset_; }
  std::size_t size() const;

  // Uniform in [-0.08, 0.08]; forget-gate bias 1.
  void initialize(std::span<double> params, Rng& rng) const;

  LstmState initial_state() const;
  // Advances `state` by one input and writes the read-out to `out` (size O).
  void step(std::span<const double> params, LstmState& state, std::span<const double> x, std::span<double> out) const;

  // inputs: T x I; outputs: T x O. Fills `cache` when non-null.
  void forward(std::span<const double> params, std::span<const double> inputs, std::size_t steps,
               std::span<double> outputs, LstmCache* cache) const;
  // grad += d/dparams sum_t <doutputs_t, outputs_t>
  void backward(std::span<const double> params, const LstmCache& cache, std::span<const double> doutputs,
                std::span<double> grad) const;

 private:
  int input_ = 0;
  int hidden_ = 0;
  int output_ = 0;
  std::size_t offset_ = 0;
};

}  // namespace pcl
