#include <cmath>

#include "doctest.h"
#include "pcl/softmax.hpp"
#include "pcl/trainer.hpp"

using namespace pcl;

namespace {

std::shared_ptr<const TabularMDP> tree(int depth, std::uint64_t seed) {
  Rng rng(seed);
  return std::make_shared<const TabularMDP>(build_synthetic_tree(depth, rng));
}

EnvFactory tree_factory(std::shared_ptr<const TabularMDP> mdp) {
  return [mdp](std::uint64_t) {
    auto env = std::make_unique<TabularEnv>(mdp);
    env->set_max_episode_reward(20.0);
    return env;
  };
}

Hyperparams small_hp() {
  Hyperparams hp;
  hp.tau = 0.1;
  hp.rollout = 2;
  hp.batch_size = 4;
  hp.iterations = 30;
  hp.eval_period = 10;
  hp.seed = 3;
  return hp;
}

}  // namespace

TEST_CASE("algorithm names round trip") {
  for (Algorithm a : {Algorithm::Pcl, Algorithm::UnifiedPcl, Algorithm::A2c, Algorithm::TabularQSoft, Algorithm::TabularQHard})
    CHECK(parse_algorithm(algorithm_name(a)) == a);
  CHECK_THROWS_AS(parse_algorithm("dqn"), std::invalid_argument);
}

TEST_CASE("hyperparameter validation") {
  Hyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.tau = -1.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = Hyperparams{};
  hp.rollout = 0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = Hyperparams{};
  hp.gamma = 1.5;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = Hyperparams{};
  hp.batch_size = 0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}

TEST_CASE("training is deterministic in the seed") {
  const auto mdp = tree(5, 1);
  TabularModel a(mdp->num_states(), 2), b(mdp->num_states(), 2), c(mdp->num_states(), 2);
  const Hyperparams hp = small_hp();
  const auto ma = train_pcl(tree_factory(mdp), a, hp);
  const auto mb = train_pcl(tree_factory(mdp), b, hp);
  CHECK(a.policy_params() == b.policy_params());
  CHECK(a.value_params() == b.value_params());
  REQUIRE(ma.size() == mb.size());
  for (std::size_t i = 0; i < ma.size(); ++i) CHECK(ma[i].avg_reward == mb[i].avg_reward);
  Hyperparams other = hp;
  other.seed = 4;
  train_pcl(tree_factory(mdp), c, other);
  CHECK(c.policy_params() != a.policy_params());
}

TEST_CASE("metrics rows follow the evaluation period") {
  const auto mdp = tree(4, 2);
  TabularModel model(mdp->num_states(), 2);
  Hyperparams hp = small_hp();
  hp.iterations = 25;
  std::vector<int> seen;
  TrainOptions opts;
  opts.sink = [&](const RunMetrics& m) { seen.push_back(m.iteration); };
  const auto metrics = train_pcl(tree_factory(mdp), model, hp, opts);
  CHECK(seen == std::vector<int>{10, 20, 25});
  CHECK(metrics.back().env_steps == 25L * 4 * 4);
  CHECK(metrics.back().buffer_size > 0);
}

TEST_CASE("pcl on a bandit reaches the softmax-optimal policy") {
  TabularMDP::Builder builder(2, 3, 1.0);
  builder.set_terminal(1);
  const std::vector<double> r{1.0, 0.5, 0.0};
  for (int a = 0; a < 3; ++a) builder.set_deterministic(0, a, r[static_cast<std::size_t>(a)], 1);
  const auto mdp = std::make_shared<const TabularMDP>(std::move(builder).build());
  TabularModel model(2, 3);
  Hyperparams hp;
  hp.tau = 0.5;
  hp.rollout = 1;
  hp.batch_size = 10;
  hp.lr_policy = 0.05;
  hp.iterations = 3000;
  hp.eval_period = 3000;
  train_pcl([mdp](std::uint64_t) { return std::make_unique<TabularEnv>(mdp); }, model, hp);
  std::vector<double> lp;
  model.log_policy(0, lp);
  const auto target = soft_indmax(r, 0.5);
  for (std::size_t a = 0; a < 3; ++a) CHECK(std::exp(lp[a]) == doctest::Approx(target[a]).epsilon(0.03));
  CHECK(model.value(0) == doctest::Approx(softmax_value(r, 0.5)).epsilon(0.02));
}

TEST_CASE("unified pcl and a2c run and improve on a small tree") {
  const auto mdp = tree(4, 5);
  Hyperparams hp = small_hp();
  hp.iterations = 300;
  hp.eval_period = 300;
  TabularUnifiedModel q(mdp->num_states(), 2, hp.tau);
  const auto mu = train_unified_pcl(tree_factory(mdp), q, hp);
  CHECK(mu.back().avg_reward > 10.0);
  TabularModel pg(mdp->num_states(), 2);
  hp.lr_policy = 0.5;
  const auto ma = train_a2c(tree_factory(mdp), pg, hp);
  CHECK(std::isfinite(ma.back().avg_reward));
  TabularUnifiedModel wrong(mdp->num_states(), 2, 0.3);
  CHECK_THROWS_AS(train_unified_pcl(tree_factory(mdp), wrong, hp), std::invalid_argument);
}

TEST_CASE("sampled episodes respect the step limit") {
  const auto mdp = tree(6, 1);
  TabularModel model(mdp->num_states(), 2);
  TabularEnv env(mdp);
  Rng rng(0);
  const Episode ep = sample_episode(model, env, 1, rng, 3);
  CHECK(ep.length() == 3);
  CHECK_FALSE(ep.terminated);
  const Episode full = sample_episode(model, env, 1, rng, 100, true);
  CHECK(full.length() == 6);
  CHECK(full.terminated);
}

TEST_CASE("evaluating the optimal policy on a depth-5 tree") {
  const auto mdp = tree(5, 8);
  const auto opt = hardmax_value_iteration(*mdp);
  TabularModel model(mdp->num_states(), 2);
  for (int s = 0; s < mdp->num_states(); ++s)
    if (!mdp->terminal(s)) model.logits(s)[static_cast<std::size_t>(opt.greedy[static_cast<std::size_t>(s)])] = 50.0;
  TabularEnv env(mdp);
  env.set_max_episode_reward(20.0);
  const EvalResult res = evaluate(model, env, 200, 0);
  CHECK(res.mean_reward >= 19.9);
  CHECK(res.mean_max_reward == 20.0);
}

TEST_CASE("tabular soft Q-learning reaches the soft fixed point") {
  const TabularMDP mdp = random_mdp({.num_states = 6, .num_actions = 2, .stochasticity = 0.0, .gamma = 0.8, .num_terminal = 1, .seed = 5});
  TabularQOptions opts;
  opts.tau = 0.3;
  opts.updates = 200000;
  const QTable q = train_tabular_q(mdp, opts, true);
  const auto v = softmax_value_iteration(mdp, 0.3).values;
  const QTable exact = q_from_values(mdp, v);
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 2; ++a) CHECK(std::fabs(q.at(s, a) - exact.at(s, a)) < 1e-3);
  const QTable hard = train_tabular_q(mdp, opts, false);
  const QTable hard_exact = q_from_values(mdp, hardmax_value_iteration(mdp).values);
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 2; ++a) CHECK(std::fabs(hard.at(s, a) - hard_exact.at(s, a)) < 1e-3);
}
