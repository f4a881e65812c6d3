#pragma once

// Property suites behind `pcl verify`: randomized checks of the softmax
// operator, the Bellman fixed point, consistency at the optimum, the converse
// solve, the small-temperature and single-step limits, loss gradients, and
// replay sampling.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pcl/model.hpp"

namespace pcl {

struct CheckRow {
  std::string check;
  double value = 0.0;   // worst observed residual (or statistic)
  double limit = 0.0;
  bool at_least = false;  // pass means value >= limit instead of value <= limit
  bool pass = false;
};

struct VerifyReport {
  std::vector<CheckRow> rows;
  bool vacuous = false;  // trials == 0

  bool passed() const;
  void print(std::ostream& out) const;
};

const std::vector<std::string>& verify_scopes();

// Runs the suites for `scope` (one of verify_scopes()). The meaning of one
// trial depends on the suite: a score vector, an MDP, a model pair or a buffer.
// Throws std::invalid_argument for an unknown scope or negative trials.
VerifyReport run_verification(std::string_view scope, int trials, std::uint64_t seed);

VerifyReport verify_softmax_core(int trials, std::uint64_t seed);
VerifyReport verify_contraction_suite(int trials, std::uint64_t seed);
VerifyReport verify_consistency_suite(int trials, std::uint64_t seed);
VerifyReport verify_converse_suite(int trials, std::uint64_t seed);
VerifyReport verify_limits_suite(int trials, std::uint64_t seed);
VerifyReport verify_losses_suite(int trials, std::uint64_t seed);
VerifyReport verify_replay_suite(int trials, std::uint64_t seed, long draws = 1000000);

// Central finite differences of f with respect to every entry of params.
std::vector<double> finite_difference(std::vector<double>& params, const std::function<double()>& f,
                                      double step = 1e-5);

struct GradientComparison {
  double max_abs_diff = 0.0;
  double worst_ratio = 0.0;  // max |a - n| / (abs_tol + rel_tol * max(|a|, |n|)); <= 1 passes
  bool pass() const { return worst_ratio <= 1.0; }
};
GradientComparison compare_gradients(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                     double rel_tol = 1e-5, double abs_tol = 1e-7);

// Upper tail of the chi-square distribution (Wilson-Hilferty approximation).
double chi_square_upper_tail(double statistic, int dof);

}  // namespace pcl
