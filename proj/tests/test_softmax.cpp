#include <cmath>
#include <vector>

#include "doctest.h"
#include "pcl/random.hpp"
#include "pcl/softmax.hpp"

using namespace pcl;

TEST_CASE("softmax value of symmetric and single-entry scores") {
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(softmax_value(zeros, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> one{-3.25};
  CHECK(softmax_value(one, 0.01) == -3.25);
  CHECK(softmax_value(one, 7.0) == -3.25);
}

TEST_CASE("softmax value against long double direct evaluation") {
  const std::vector<double> q{1.0, 0.3, -0.2};
  long double sum = 0.0L;
  for (double x : q) sum += std::exp(static_cast<long double>(x) / 0.5L);
  const double direct = static_cast<double>(0.5L * std::log(sum));
  CHECK(std::fabs(softmax_value(q, 0.5) - direct) <= 1e-15);
}

TEST_CASE("softmax value stays finite at tiny temperature") {
  const std::vector<double> q{1000.0, 999.0, -5.0};
  const double v = softmax_value(q, 1e-3);
  CHECK(std::isfinite(v));
  CHECK(v == 1000.0);
}

TEST_CASE("softmax value rejects bad input") {
  const std::vector<double> q{1.0, 2.0};
  CHECK_THROWS_AS(softmax_value(q, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(softmax_value(q, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(softmax_value(std::vector<double>{}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(softmax_value(std::vector<double>{1.0, NAN}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(hard_max(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("soft indmax examples") {
  const auto third = soft_indmax(std::vector<double>{4.0, 4.0, 4.0}, 0.3);
  for (double p : third) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto p = soft_indmax(std::vector<double>{std::log(2.0), 0.0}, 1.0);
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("soft indmax is the gradient of the softmax value") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q(1 + rng.index(6));
    for (double& x : q) x = rng.uniform(-3.0, 3.0);
    const auto f = soft_indmax(q, 0.7);
    for (std::size_t i = 0; i < q.size(); ++i) {
      auto up = q, down = q;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      const double fd = (softmax_value(up, 0.7) - softmax_value(down, 0.7)) / 2e-6;
      CHECK(std::fabs(fd - f[i]) <= 1e-8);
    }
  }
}

TEST_CASE("log soft indmax matches log of soft indmax and survives underflow") {
  const std::vector<double> q{0.0, -50.0, 2.0};
  std::vector<double> logf;
  log_soft_indmax(q, 0.01, logf);
  CHECK(std::isfinite(logf[1]));
  CHECK(logf[1] == doctest::Approx((-50.0 - 2.0) / 0.01).epsilon(1e-12));
  const auto f = soft_indmax(q, 1.0);
  log_soft_indmax(q, 1.0, logf);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::exp(logf[i]) == doctest::Approx(f[i]).epsilon(1e-14));
}

TEST_CASE("soft indmax is translation invariant") {
  const std::vector<double> q{0.2, -1.0, 3.0};
  std::vector<double> shifted(q);
  for (double& x : shifted) x += 42.0;
  const auto a = soft_indmax(q, 0.4), b = soft_indmax(shifted, 0.4);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= 1e-14);
}

TEST_CASE("entropy examples") {
  for (int n = 1; n <= 8; ++n) {
    const std::vector<double> uniform(static_cast<std::size_t>(n), 1.0 / n);
    CHECK(entropy(uniform) == doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-14));
  }
  CHECK(entropy(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
  const std::vector<double> p{0.2, 0.3, 0.5};
  long double direct = 0.0L;
  for (double x : p) direct -= static_cast<long double>(x) * std::log(static_cast<long double>(x));
  CHECK(std::fabs(entropy(p) - static_cast<double>(direct)) <= 1e-15);
  CHECK_THROWS_AS(entropy(std::vector<double>{0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(entropy(std::vector<double>{1.5, -0.5}), std::invalid_argument);
}

TEST_CASE("hard max uses the lowest index on ties") {
  const auto m = hard_max(std::vector<double>{1.0, 3.0, 3.0});
  CHECK(m.value == 3.0);
  CHECK(m.index == 1);
  const auto single = hard_max(std::vector<double>{-5.0});
  CHECK(single.value == -5.0);
  CHECK(single.index == 0);
}

TEST_CASE("softmax approaches hard max as tau shrinks") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> q(1 + rng.index(8));
    for (double& x : q) x = rng.uniform(-1.0, 1.0);
    const double gap = softmax_value(q, 1e-6) - hard_max(q).value;
    CHECK(gap >= 0.0);
    CHECK(gap <= 1e-6 * std::log(static_cast<double>(q.size())) + 1e-15);
  }
}

TEST_CASE("variational identity holds against many random distributions") {
  Rng rng(5);
  const std::vector<double> q{0.5, -0.25, 1.75, 0.0};
  for (double tau : {0.01, 0.1, 1.0}) {
    const double value = softmax_value(q, tau);
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> p(q.size());
      double total = 0.0;
      for (double& x : p) total += (x = rng.exponential());
      double score = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) score += (p[i] /= total) * q[i];
      CHECK(score + tau * entropy(p) <= value + 1e-10);
    }
  }
}
