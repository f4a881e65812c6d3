#pragma once

// Log-sum-exp kernels: the softmax value F_tau(q) = tau * log sum_a exp(q_a / tau),
// its gradient the soft indmax f_tau(q), the Shannon entropy, and the hard max
// recovered in the tau -> 0 limit.

#include <cstddef>
#include <span>
#include <vector>

namespace pcl {

struct HardMax {
  double value;
  std::size_t index;  // smallest index attaining the max
};

// Throws std::invalid_argument for tau <= 0, an empty vector, or non-finite entries.
double softmax_value(std::span<const double> q, double tau);

// exp((q - F_tau(q)) / tau) written into `out` (resized to q.size()).
void soft_indmax(std::span<const double> q, double tau, std::vector<double>& out);
std::vector<double> soft_indmax(std::span<const double> q, double tau);

// log f_tau(q), i.e. (q - F_tau(q)) / tau, computed without exponentiating.
void log_soft_indmax(std::span<const double> q, double tau, std::vector<double>& out);

// -sum p log p with 0 log 0 = 0. Throws if p is not on the simplex (tolerance 1e-12).
double entropy(std::span<const double> p);

// Lowest-index tie-break. Throws on empty input.
HardMax hard_max(std::span<const double> q);

// Validation helpers shared by the other modules.
bool is_probability_vector(std::span<const double> p, double tol = 1e-12);
void require_scores(std::span<const double> q, const char* where);

}  // namespace pcl
