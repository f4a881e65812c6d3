#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "pcl/harness.hpp"

using namespace pcl;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return ExperimentConfig::parse(in, "test.cfg");
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pcl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse("# comment\ntask = copy\nalgorithm = unified_pcl\nseeds = 0-2, 7\ntau = 0.05  # trailing\n"
                       "optimizer = adam\nhidden = 16\n");
  CHECK(c.task == "copy");
  CHECK(c.algorithm == Algorithm::UnifiedPcl);
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2, 7});
  CHECK(c.hp.tau == 0.05);
  CHECK(c.hp.optimizer == OptimizerKind::Adam);
  CHECK(c.hidden == 16);
}

TEST_CASE("config errors name the line") {
  auto message = [](const std::string& text) {
    try {
      parse(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("task = tree\n\ntau = abc\n").rfind("test.cfg:3:", 0) == 0);
  CHECK(message("nonsense line\n").rfind("test.cfg:1:", 0) == 0);
  CHECK(message("tau = 0.1\ntau = 0.2\n").rfind("test.cfg:2:", 0) == 0);
  CHECK(message("colour = blue\n").rfind("test.cfg:1:", 0) == 0);
  CHECK(message("algorithm = sarsa\n").rfind("test.cfg:1:", 0) == 0);
  CHECK(message("grid.colour = 1, 2\n").rfind("test.cfg:1:", 0) == 0);
  CHECK(message("task = tree\n") == "no error");
}

TEST_CASE("trees are drawn per run unless the seed is fixed") {
  const auto per_run = parse("task = tree\ntree_depth = 3\n");
  CHECK_FALSE(per_run.tree_seed_set);
  CHECK(per_run.for_run(5).tree_seed == 5);
  const auto fixed = parse("task = tree\ntree_depth = 3\ntree_seed = 9\n");
  CHECK(fixed.for_run(5).tree_seed == 9);
  const ExperimentWorld a(per_run.for_run(1)), b(per_run.for_run(2));
  CHECK(a.tree()->reward(0, 0) != b.tree()->reward(0, 0));
}

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("0,1") == std::vector<std::uint64_t>{0, 1});
  CHECK(parse_seed_list("3-5") == std::vector<std::uint64_t>{3, 4, 5});
  CHECK_THROWS(parse_seed_list("5-3"));
  CHECK_THROWS(parse_seed_list("x"));
}

TEST_CASE("sweep grids") {
  auto c = parse("sweep_preset = tree\n");
  CHECK(sweep_points(c).size() == 72);
  c = parse("sweep_preset = algorithmic\ntask = copy\n");
  CHECK(sweep_points(c).size() == 48);
  c = parse("grid.tau = 0.1, 0.2\ngrid.rollout = 1, 2, 3\n");
  const auto points = sweep_points(c);
  REQUIRE(points.size() == 6);
  CHECK(points[1].config.hp.rollout == 1);
  CHECK(points[1].config.hp.tau == 0.2);
  CHECK(points[5].config.hp.rollout == 3);
  c = parse("grid.tau = 0.1, 0.2\ngrid.rollout = 1, 2, 3\ngrid_cap = 5\n");
  CHECK_THROWS_AS(sweep_points(c), std::invalid_argument);
}

TEST_CASE("experts are optimal") {
  auto tree = parse("task = tree\ntree_depth = 6\n");
  CHECK_THROWS_AS(ExperimentWorld(tree).experts(1, 0), std::logic_error);
  const ExperimentWorld world(tree.for_run(3));
  CHECK(world.tree() != nullptr);
  for (const Episode& e : world.experts(5, 1)) CHECK(e.total_reward() == doctest::Approx(20.0).epsilon(1e-12));
  auto copy = parse("task = reverse\nmin_length = 2\nmax_length = 5\n");
  const ExperimentWorld algo(copy);
  for (const Episode& e : algo.experts(5, 1)) {
    CHECK(e.terminated);
    CHECK(e.total_reward() >= 2.0);
  }
}

TEST_CASE("train writes CSVs whose aggregate is recomputable") {
  const fs::path dir = scratch("train");
  std::ofstream(dir / "run.cfg") << "task = tree\ntree_depth = 4\nalgorithm = pcl\nseeds = 0-2\n"
                                    "iterations = 20\neval_period = 10\nbatch_size = 2\n";
  CommandOptions o;
  o.config = (dir / "run.cfg").string();
  o.out = (dir / "out").string();
  o.parallelism = 2;
  std::ostringstream out, err;
  REQUIRE(cmd_train(o, out, err) == 0);

  std::map<std::string, std::vector<double>> by_iteration;
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "out" / "runs")) {
    ++files;
    const auto rows = read_csv(entry.path());
    CHECK(rows[0] == std::vector<std::string>{"run_id", "algorithm", "task", "seed", "iteration", "env_steps",
                                              "avg_reward", "loss"});
    for (std::size_t i = 1; i < rows.size(); ++i) by_iteration[rows[i][4]].push_back(std::stod(rows[i][6]));
  }
  CHECK(files == 3);
  CHECK(fs::exists(dir / "out" / "checkpoints"));
  const auto agg = read_csv(dir / "out" / "aggregate.csv");
  REQUIRE(agg.size() == 3);
  for (std::size_t i = 1; i < agg.size(); ++i) {
    const auto& values = by_iteration[agg[i][2]];
    REQUIRE(values.size() == 3);
    double mean = 0.0;
    for (double v : values) mean += v / 3.0;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean) / 2.0;
    CHECK(std::stod(agg[i][5]) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(std::stod(agg[i][6]) == doctest::Approx(std::sqrt(var)).epsilon(1e-9));
  }
  fs::remove_all(dir);
}

TEST_CASE("train and eval reload a checkpoint") {
  const fs::path dir = scratch("eval");
  std::ofstream(dir / "run.cfg") << "task = copy\nalgorithm = pcl\nseeds = 4\niterations = 3\neval_period = 3\n"
                                    "batch_size = 2\nhidden = 8\n";
  CommandOptions o;
  o.config = (dir / "run.cfg").string();
  o.out = (dir / "out").string();
  std::ostringstream out, err;
  REQUIRE(cmd_train(o, out, err) == 0);
  const auto ckpt = fs::directory_iterator(dir / "out" / "checkpoints")->path();
  o.checkpoint = ckpt.string();
  o.episodes = 5;
  std::ostringstream eval_out;
  CHECK(cmd_eval(o, eval_out, err) == 0);
  CHECK(eval_out.str().find("mean") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("commands report bad input with exit code 2") {
  const fs::path dir = scratch("bad");
  std::ofstream(dir / "bad.cfg") << "task = tree\ntau = minus one\n";
  CommandOptions o;
  o.config = (dir / "bad.cfg").string();
  o.out = (dir / "out").string();
  std::ostringstream out, err;
  CHECK(cmd_train(o, out, err) == 2);
  CHECK(err.str().find("bad.cfg:2:") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out"));
  o.config = (dir / "missing.cfg").string();
  CHECK(cmd_train(o, out, err) == 2);
  CommandOptions v;
  v.scope = "nope";
  CHECK(cmd_verify(v, out, err) == 2);
  v.scope = "softmax_core";
  v.trials = 0;
  CHECK(cmd_verify(v, out, err) == 0);
  fs::remove_all(dir);
}

TEST_CASE("experts command writes readable episodes") {
  CommandOptions o;
  o.task = "copy";
  o.count = 3;
  std::ostringstream out, err;
  REQUIRE(cmd_experts(o, out, err) == 0);
  std::istringstream in(out.str());
  const auto records = read_episodes(in);
  CHECK(records.size() == 3);
}
