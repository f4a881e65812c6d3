#include <cmath>
#include <sstream>

#include "doctest.h"
#include "pcl/replay_buffer.hpp"
#include "pcl/verification.hpp"

using namespace pcl;

namespace {

Episode with_reward(double r) { return Episode{{0, 1}, {0}, {r}, true, 0}; }

}  // namespace

TEST_CASE("sampling probabilities follow the mixture formula") {
  Rng rng(0);
  ReplayBuffer buf({.capacity = 10, .alpha = 1.0, .uniform_mix = 0.1});
  buf.insert(with_reward(0.0), rng);
  buf.insert(with_reward(std::log(2.0)), rng);
  const auto p = buf.probabilities();
  CHECK(p[0] == doctest::Approx(0.35).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.65).epsilon(1e-14));

  ReplayBuffer flat({.capacity = 10, .alpha = 0.0, .uniform_mix = 0.1});
  for (double r : {-3.0, 0.0, 5.0, 100.0}) flat.insert(with_reward(r), rng);
  for (double x : flat.probabilities()) CHECK(x == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("empirical draws match the probabilities") {
  Rng rng(1);
  ReplayBuffer buf({.capacity = 100, .alpha = 0.5, .uniform_mix = 0.1});
  for (int i = 0; i < 5; ++i) buf.insert(with_reward(i), rng);
  const auto p = buf.probabilities();
  std::vector<double> counts(5, 0.0);
  const int draws = 200000;
  for (int k = 0; k < draws; ++k) counts[buf.sample_index(rng)] += 1.0;
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::fabs(counts[i] / draws - p[i]) < 0.005);
}

TEST_CASE("large returns do not overflow") {
  Rng rng(2);
  ReplayBuffer buf({.capacity = 10, .alpha = 1.0});
  buf.insert(with_reward(1000.0), rng);
  buf.insert(with_reward(-1000.0), rng);
  buf.insert(with_reward(2000.0), rng);
  const auto p = buf.probabilities();
  for (double x : p) CHECK(std::isfinite(x));
  CHECK(p[2] == doctest::Approx(0.1 / 3 + 0.9).epsilon(1e-12));
  CHECK(buf.sample_index(rng) < 3);
}

TEST_CASE("capacity, pinning and eviction") {
  Rng rng(3);
  ReplayBuffer buf({.capacity = 4});
  buf.seed_experts({with_reward(1.0), with_reward(2.0)}, rng);
  CHECK(buf.pinned_count() == 2);
  for (int i = 0; i < 50; ++i) buf.insert(with_reward(0.0), rng);
  CHECK(buf.size() == 4);
  int pinned = 0;
  for (std::size_t s = 0; s < buf.size(); ++s) pinned += buf.entry(s).pinned ? 1 : 0;
  CHECK(pinned == 2);

  ReplayBuffer full({.capacity = 1});
  full.insert(with_reward(0.0), rng, true);
  CHECK_THROWS_AS(full.insert(with_reward(0.0), rng), std::length_error);
  ReplayBuffer empty({.capacity = 1});
  CHECK_THROWS_AS(empty.sample_index(rng), std::logic_error);
}

TEST_CASE("dump and restore keep the contents") {
  Rng rng(4);
  ReplayBuffer buf({.capacity = 8, .alpha = 0.7});
  buf.insert(with_reward(0.25), rng, true);
  for (int i = 0; i < 3; ++i) buf.insert(with_reward(-i / 3.0), rng);
  std::stringstream ss;
  buf.dump(ss);
  const ReplayBuffer back = ReplayBuffer::restore(ss, buf.config());
  REQUIRE(back.size() == buf.size());
  CHECK(back.pinned_count() == 1);
  CHECK(back.probabilities() == buf.probabilities());
  for (std::size_t s = 0; s < buf.size(); ++s) CHECK(back.entry(s).episode.rewards == buf.entry(s).episode.rewards);
}

TEST_CASE("replay suite passes") {
  const VerifyReport report = verify_replay_suite(1, 5);
  for (const CheckRow& row : report.rows) {
    INFO(row.check << " " << row.value);
    CHECK(row.pass);
  }
}

TEST_CASE("chi-square tail") {
  CHECK(chi_square_upper_tail(0.0, 4) == doctest::Approx(1.0).epsilon(1e-6));
  // 95th percentile of chi-square with 8 degrees of freedom.
  CHECK(chi_square_upper_tail(15.507, 8) == doctest::Approx(0.05).epsilon(0.05));
  CHECK(chi_square_upper_tail(100.0, 8) < 1e-10);
}
