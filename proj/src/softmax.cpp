#include "pcl/softmax.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcl {

namespace {

void require_tau(double tau, const char* where) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument(std::string(where) +
                                ": temperature must be positive and finite (use hard_max for tau = 0)");
}

double max_of(std::span<const double> q) {
  double m = q[0];
  for (double x : q)
    if (x > m) m = x;
  return m;
}

}  // namespace

void require_scores(std::span<const double> q, const char* where) {
  if (q.empty()) throw std::invalid_argument(std::string(where) + ": empty score vector");
  for (double x : q)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(where) + ": non-finite score");
}

double softmax_value(std::span<const double> q, double tau) {
  require_scores(q, "softmax_value");
  require_tau(tau, "softmax_value");
  const double m = max_of(q);
  double sum = 0.0;
  for (double x : q) sum += std::exp((x - m) / tau);
  return m + tau * std::log(sum);
}

void log_soft_indmax(std::span<const double> q, double tau, std::vector<double>& out) {
  const double f = softmax_value(q, tau);
  out.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = (q[i] - f) / tau;
}

void soft_indmax(std::span<const double> q, double tau, std::vector<double>& out) {
  require_scores(q, "soft_indmax");
  require_tau(tau, "soft_indmax");
  const double m = max_of(q);
  out.resize(q.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    out[i] = std::exp((q[i] - m) / tau);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
}

std::vector<double> soft_indmax(std::span<const double> q, double tau) {
  std::vector<double> out;
  soft_indmax(q, tau, out);
  return out;
}

bool is_probability_vector(std::span<const double> p, double tol) {
  if (p.empty()) return false;
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    sum += x;
  }
  return std::fabs(sum - 1.0) <= tol;
}

double entropy(std::span<const double> p) {
  if (!is_probability_vector(p)) throw std::invalid_argument("entropy: not a probability vector");
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

HardMax hard_max(std::span<const double> q) {
  if (q.empty()) throw std::invalid_argument("hard_max: empty score vector");
  HardMax best{q[0], 0};
  for (std::size_t i = 1; i < q.size(); ++i)
    if (q[i] > best.value) best = {q[i], i};
  return best;
}

}  // namespace pcl
