#include <cmath>

#include "doctest.h"
#include "pcl/consistency.hpp"
#include "pcl/verification.hpp"

using namespace pcl;

namespace {

Episode two_step() { return Episode{{0, 1, 2}, {0, 1}, {1.0, 2.0}, true, 0}; }

}  // namespace

TEST_CASE("windows cover every action unless strict") {
  const Episode ep{{0, 1, 2, 3, 4}, {0, 0, 0, 0}, {0, 0, 0, 0}, true, 0};
  const auto loose = episode_windows(ep, {0.1, 1.0, 3, false});
  REQUIRE(loose.size() == 4);
  CHECK(loose[0].length == 3);
  CHECK(loose[3].start == 3);
  CHECK(loose[3].length == 1);
  const auto strict = episode_windows(ep, {0.1, 1.0, 3, true});
  REQUIRE(strict.size() == 2);
  CHECK(strict[1].start == 1);
  CHECK(episode_windows(Episode{{0}, {}, {}, true, 0}, {0.1, 1.0, 3, false}).empty());
}

TEST_CASE("soft consistency by hand") {
  TabularModel model(3, 2);
  model.value(0) = 0.5;
  model.value(2) = 7.0;  // terminal end state contributes nothing
  const Episode ep = two_step();
  const LossConfig cfg{0.1, 0.9, 2, false};
  const auto w = episode_windows(ep, cfg);
  const double expected = -0.5 + (1.0 + 0.1 * std::log(2.0)) + 0.9 * (2.0 + 0.1 * std::log(2.0));
  CHECK(soft_consistency(w[0], model, cfg) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(a2c_advantage(w[0], model, cfg) == doctest::Approx(-0.5 + 1.0 + 0.9 * 2.0).epsilon(1e-14));
  CHECK(pcl_objective(w, model, cfg) ==
        doctest::Approx(0.5 * expected * expected + 0.5 * std::pow(2.0 + 0.1 * std::log(2.0), 2)).epsilon(1e-14));
}

TEST_CASE("truncated episodes bootstrap from the last state") {
  TabularModel model(3, 2);
  model.value(2) = 4.0;
  Episode ep = two_step();
  ep.terminated = false;
  const LossConfig cfg{0.0, 0.5, 2, false};
  const auto w = episode_windows(ep, cfg);
  CHECK(soft_consistency(w[0], model, cfg) == doctest::Approx(1.0 + 0.5 * 2.0 + 0.25 * 4.0));
}

TEST_CASE("pcl weights give the stated update") {
  TabularModel model(3, 2);
  const Episode ep = two_step();
  const LossConfig cfg{0.2, 0.9, 2, false};
  const auto fwd = model.forward(ep);
  const auto w = pcl_weights(ep, fwd, cfg);
  const auto windows = episode_windows(ep, cfg);
  const double c0 = soft_consistency(windows[0], fwd, cfg), c1 = soft_consistency(windows[1], fwd, cfg);
  CHECK(w.logp[0] == doctest::Approx(c0));
  CHECK(w.logp[1] == doctest::Approx(0.9 * c0 + c1));
  CHECK(w.value[0] == doctest::Approx(c0));
  CHECK(w.value[1] == doctest::Approx(c1));
  CHECK(w.stats.windows == 2);
  CHECK(w.stats.objective == doctest::Approx(0.5 * (c0 * c0 + c1 * c1)));
}

TEST_CASE("loss gradients agree with finite differences") {
  const VerifyReport report = verify_losses_suite(2, 13);
  for (const CheckRow& row : report.rows) {
    INFO(row.check << " " << row.value);
    CHECK(row.pass);
  }
}

TEST_CASE("bad loss configs are rejected") {
  const Episode ep = two_step();
  CHECK_THROWS_AS(episode_windows(ep, {0.1, 1.0, 0, false}), std::invalid_argument);
  CHECK_THROWS_AS(episode_windows(ep, {-0.1, 1.0, 1, false}), std::invalid_argument);
  CHECK_THROWS_AS(episode_windows(ep, {0.1, 1.5, 1, false}), std::invalid_argument);
}
