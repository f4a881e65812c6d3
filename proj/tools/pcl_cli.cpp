#include <iostream>

#include "CLI11.hpp"
#include "pcl/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Path consistency learning: training, sweeps, verification and experts"};
  app.require_subcommand(1);
  pcl::CommandOptions o;

  auto* train = app.add_subcommand("train", "train every seed of a config and write CSVs and checkpoints");
  train->add_option("--config", o.config, "config file")->required();
  train->add_option("--seeds", o.seeds, "seed list overriding the config, e.g. 0-9");
  train->add_option("--out", o.out, "output directory");
  train->add_option("--parallelism", o.parallelism, "concurrent runs")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "train every grid point and rank by final average reward");
  sweep->add_option("--config", o.config, "config file with grid.* keys or sweep_preset")->required();
  sweep->add_option("--seeds", o.seeds, "seed list overriding the config");
  sweep->add_option("--out", o.out, "output directory");
  sweep->add_option("--parallelism", o.parallelism, "concurrent runs")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "run property suites on random instances");
  verify->add_option("--scope", o.scope, "softmax_core|contraction|consistency|converse|limits|losses|replay|all");
  verify->add_option("--trials", o.trials, "random instances per suite");
  verify->add_option("--seed", o.seed, "random seed");

  auto* experts = app.add_subcommand("experts", "write optimal episodes in the episode file format");
  experts->add_option("--config", o.config, "config file (task and environment keys)");
  experts->add_option("--task", o.task, "task overriding the config");
  experts->add_option("--count", o.count, "number of episodes");
  experts->add_option("--seed", o.seed, "random seed");
  experts->add_option("--out", o.out, "output file (stdout when omitted)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint by sampling from its policy");
  eval->add_option("--config", o.config, "config file describing the environment")->required();
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  eval->add_option("--episodes", o.episodes, "evaluation episodes");
  eval->add_option("--seed", o.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (train->parsed()) return pcl::cmd_train(o, std::cout, std::cerr);
  if (sweep->parsed()) return pcl::cmd_sweep(o, std::cout, std::cerr);
  if (verify->parsed()) return pcl::cmd_verify(o, std::cout, std::cerr);
  if (experts->parsed()) return pcl::cmd_experts(o, std::cout, std::cerr);
  return pcl::cmd_eval(o, std::cout, std::cerr);
}
