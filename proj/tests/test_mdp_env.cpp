#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "pcl/algorithmic.hpp"
#include "pcl/environment.hpp"
#include "pcl/tabular_mdp.hpp"

using namespace pcl;

namespace {

// Best root-to-leaf total by explicit recursion over the children.
double best_total(const TabularMDP& mdp, int s) {
  if (mdp.terminal(s)) return 0.0;
  double best = -1e300;
  for (int a = 0; a < mdp.num_actions(); ++a)
    best = std::max(best, mdp.reward(s, a) + best_total(mdp, mdp.successors(s, a)[0].state));
  return best;
}

}  // namespace

TEST_CASE("synthetic tree shape and best total") {
  CHECK(synthetic_tree_node_count(20) == 2097151);
  CHECK(synthetic_tree_node_count(2) == 7);
  for (int depth : {1, 2, 5, 10}) {
    Rng rng(static_cast<std::uint64_t>(depth));
    const TabularMDP tree = build_synthetic_tree(depth, rng);
    CHECK(tree.num_states() == synthetic_tree_node_count(depth));
    CHECK(tree.num_actions() == 2);
    CHECK(tree.gamma() == 1.0);
    CHECK(tree.deterministic());
    CHECK(tree.forward_acyclic());
    CHECK(best_total(tree, 0) == doctest::Approx(20.0).epsilon(1e-12));
    for (int s = 0; s < tree.num_states(); ++s) CHECK(tree.terminal(s) == (s >= (1 << depth) - 1));
  }
}

TEST_CASE("depth-2 tree enumeration") {
  Rng rng(9);
  const TabularMDP tree = build_synthetic_tree(2, rng);
  CHECK(tree.successors(0, 0)[0].state == 1);
  CHECK(tree.successors(0, 1)[0].state == 2);
  CHECK(tree.successors(2, 1)[0].state == 6);
  double best = -1e300;
  for (int a0 = 0; a0 < 2; ++a0)
    for (int a1 = 0; a1 < 2; ++a1) {
      const int mid = 2 * 0 + 1 + a0;
      best = std::max(best, tree.reward(0, a0) + tree.reward(mid, a1));
    }
  CHECK(best == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("tree builder rejects bad depth") {
  Rng rng(0);
  CHECK_THROWS_AS(build_synthetic_tree(0, rng), std::invalid_argument);
  CHECK_THROWS_AS(build_synthetic_tree(25, rng), std::invalid_argument);
}

TEST_CASE("builder validates rows") {
  TabularMDP::Builder b(2, 1, 0.9);
  b.set_terminal(1);
  const Successor bad[] = {{1, 0.5}};
  CHECK_THROWS(b.set_row(0, 0, 1.0, bad));
  TabularMDP::Builder missing(2, 1, 0.9);
  missing.set_terminal(1);
  CHECK_THROWS(std::move(missing).build());
}

TEST_CASE("random MDP rows are distributions") {
  const TabularMDP mdp = random_mdp({.num_states = 8, .num_actions = 3, .stochasticity = 0.5, .gamma = 0.9, .num_terminal = 2, .seed = 4});
  CHECK(mdp.terminal(7));
  CHECK_FALSE(mdp.terminal(0));
  for (int s = 0; s < 6; ++s)
    for (int a = 0; a < 3; ++a) {
      double total = 0.0;
      for (const Successor& n : mdp.successors(s, a)) {
        CHECK(n.prob >= 0.0);
        total += n.prob;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  CHECK(random_mdp({.stochasticity = 0.0, .seed = 1}).deterministic());
}

TEST_CASE("tabular env walks the tree and refuses steps after the end") {
  Rng rng(2);
  auto tree = std::make_shared<const TabularMDP>(build_synthetic_tree(3, rng));
  TabularEnv env(tree);
  CHECK(env.reset(0) == 0);
  double total = 0.0;
  StepResult r{};
  for (int k = 0; k < 3; ++k) {
    r = env.step(1);
    total += r.reward;
  }
  CHECK(r.done);
  CHECK(r.terminated);
  CHECK(r.observation == 14);
  CHECK(total == doctest::Approx(tree->reward(0, 1) + tree->reward(2, 1) + tree->reward(6, 1)));
  CHECK_THROWS_AS(env.step(0), std::logic_error);
}

TEST_CASE("tabular env time limit cuts episodes without terminating") {
  Rng rng(2);
  auto tree = std::make_shared<const TabularMDP>(build_synthetic_tree(5, rng));
  TabularEnv env(tree, 2);
  env.reset(0);
  env.step(0);
  const StepResult r = env.step(0);
  CHECK(r.done);
  CHECK_FALSE(r.terminated);
}

TEST_CASE("copy AB earns two") {
  AlgorithmicEnv env({.task = AlgoTask::Copy});
  env.reset_with_input({{0, 1}});
  CHECK(env.target() == std::vector<int>{0, 1});
  double total = 0.0;
  StepResult r{};
  for (int a : env.scripted_solution()) {
    r = env.step(a);
    total += r.reward;
  }
  CHECK(total == 2.0);
  CHECK(r.terminated);
}

TEST_CASE("copy rewards and penalties") {
  AlgorithmicEnv env({.task = AlgoTask::Copy});
  env.reset_with_input({{0, 1}});
  CHECK(env.vocab() == 5);
  CHECK(env.num_actions() == 2 * 6);
  StepResult r = env.step(env.encode(1, 0));
  CHECK(r.reward == 1.0);
  CHECK_FALSE(r.done);
  r = env.step(env.encode(1, 3));
  CHECK(r.reward == -0.5);
  CHECK(r.done);
}

TEST_CASE("moving off the tape shows the blank token") {
  AlgorithmicEnv env({.task = AlgoTask::Copy});
  CHECK(env.reset_with_input({{2, 3}}) == 2);
  CHECK(env.step(env.encode(0, std::nullopt)).observation == env.vocab());
}

TEST_CASE("encode and decode are inverse") {
  AlgorithmicEnv env({.task = AlgoTask::ReversedAddition});
  for (int a = 0; a < env.num_actions(); ++a) {
    const auto d = env.decode(a);
    CHECK(env.encode(d.move, d.write) == a);
  }
  CHECK_THROWS_AS(env.decode(env.num_actions()), std::out_of_range);
}

TEST_CASE("task targets") {
  AlgorithmicEnv reverse({.task = AlgoTask::Reverse});
  reverse.reset_with_input({{0, 1, 2}});
  CHECK(reverse.target() == std::vector<int>{2, 1, 0});

  AlgorithmicEnv dup({.task = AlgoTask::DuplicatedInput});
  dup.reset_with_input({{3, 3, 1, 1}});
  CHECK(dup.target() == std::vector<int>{3, 1});

  AlgorithmicEnv repeat({.task = AlgoTask::RepeatCopy});
  repeat.reset_with_input({{0, 1}});
  CHECK(repeat.target() == std::vector<int>{0, 1, 1, 0, 0, 1});

  AlgorithmicEnv add({.task = AlgoTask::ReversedAddition});
  add.reset_with_input({{1}, {2}});
  CHECK(add.target() == std::vector<int>{0, 1});

  AlgorithmicEnv add3({.task = AlgoTask::ReversedAddition3});
  add3.reset_with_input({{2, 0}, {2, 1}, {2, 0}});
  CHECK(add3.target() == std::vector<int>{0, 0, 1});
}

TEST_CASE("scripted solutions solve random episodes of every task") {
  for (AlgoTask task : {AlgoTask::Copy, AlgoTask::DuplicatedInput, AlgoTask::RepeatCopy, AlgoTask::Reverse,
                        AlgoTask::ReversedAddition, AlgoTask::ReversedAddition3, AlgoTask::HardReversedAddition}) {
    AlgorithmicEnv env({.task = task, .min_length = 2, .initial_max_length = 6, .max_length = 6});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      env.reset(seed);
      const Episode ep = replay_actions(env, seed, env.scripted_solution());
      CHECK(ep.total_reward() == env.max_episode_reward());
      CHECK(ep.terminated);
      CHECK(static_cast<int>(ep.length()) <= env.time_limit());
    }
  }
}

TEST_CASE("reset is deterministic in the seed") {
  AlgorithmicEnv a({.task = AlgoTask::Reverse, .initial_max_length = 8, .max_length = 8});
  AlgorithmicEnv b({.task = AlgoTask::Reverse, .initial_max_length = 8, .max_length = 8});
  a.reset(77);
  b.reset(77);
  CHECK(a.grid() == b.grid());
}

TEST_CASE("curriculum promotes after a full successful window") {
  Curriculum c(2, 2, 4, false, 0.9, 3);
  c.record(1.0, 1.0);
  c.record(1.0, 1.0);
  CHECK(c.max_length() == 2);
  c.record(1.0, 1.0);
  CHECK(c.max_length() == 3);
  c.record(0.5, 1.0);
  c.record(0.5, 1.0);
  c.record(0.5, 1.0);
  CHECK(c.max_length() == 3);
  c.update(1.0);
  CHECK(c.max_length() == 4);
  c.update(1.0);
  CHECK(c.max_length() == 4);
  Curriculum fixed(2, 2, 7, true);
  CHECK(fixed.min_length() == 7);
  Rng rng(0);
  CHECK(fixed.sample_length(rng) == 7);
}

TEST_CASE("episode validation and file round trip") {
  Episode ep;
  ep.observations = {0, 2, 5};
  ep.actions = {1, 0};
  ep.rewards = {0.1, -1.0 / 3.0};
  ep.terminated = true;
  ep.seed = 12;
  CHECK_NOTHROW(ep.validate());
  std::stringstream ss;
  write_episodes(ss, {{7, true, ep}, {8, false, Episode{{3}, {}, {}, false, 1}}});
  const auto back = read_episodes(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == 7);
  CHECK(back[0].pinned);
  CHECK(back[0].episode.rewards == ep.rewards);
  CHECK(back[0].episode.observations == ep.observations);
  CHECK(back[0].episode.terminated);
  CHECK(back[1].episode.length() == 0);
  Episode bad = ep;
  bad.observations.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  std::stringstream junk("not an episode\n");
  CHECK_THROWS(read_episodes(junk));
}
