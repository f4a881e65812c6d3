#include "pcl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "pcl/checkpoint.hpp"
#include "pcl/exact_oracle.hpp"
#include "pcl/softmax.hpp"
#include "pcl/verification.hpp"

namespace pcl {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw std::invalid_argument("bad value '" + text + "' for " + key);
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw std::invalid_argument("non-finite value for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw std::invalid_argument("bad boolean '" + text + "' for " + key);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

// Keys a sweep may vary; everything else shapes the environment or the run set.
const std::set<std::string>& grid_keys() {
  static const std::set<std::string> keys{
      "tau",          "gamma",           "rollout",    "batch_size",     "replay_batch_size", "lr_policy",
      "critic_weight", "buffer_capacity", "replay_alpha", "optimizer",    "iterations",        "eval_period",
      "strict_windows", "clip_norm",     "average_batch", "uniform_behavior", "max_episode_steps", "hidden",
      "q_updates",    "q_lr_exponent",   "q_sampled"};
  return keys;
}

bool tabular_q(Algorithm a) { return a == Algorithm::TabularQSoft || a == Algorithm::TabularQHard; }

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  Rng rng(seed ^ (salt * 0x9e3779b97f4a7c15ULL));
  return rng.next();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& part : split_list(text)) {
    const auto dash = part.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = parse_number<std::uint64_t>("seeds", trim(part.substr(0, dash)));
      const auto hi = parse_number<std::uint64_t>("seeds", trim(part.substr(dash + 1)));
      if (hi < lo || hi - lo > 100000) throw std::invalid_argument("bad seed range '" + part + "'");
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_number<std::uint64_t>("seeds", part));
    }
  }
  if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
  return seeds;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (value.empty()) throw std::invalid_argument("missing value for " + key);
  if (key.rfind("grid.", 0) == 0) {
    const std::string sub = key.substr(5);
    if (!grid_keys().count(sub)) throw std::invalid_argument("'" + sub + "' cannot be swept");
    std::vector<std::string> values = split_list(value);
    ExperimentConfig probe = *this;
    for (const std::string& v : values) probe.set(sub, v);
    grid[sub] = std::move(values);
    return;
  }
  if (key == "task") {
    if (value != "tree") parse_algo_task(value);
    task = value;
  } else if (key == "algorithm") {
    algorithm = parse_algorithm(value);
  } else if (key == "seeds") {
    seeds = parse_seed_list(value);
  } else if (key == "experts") {
    experts = parse_bool(key, value);
  } else if (key == "expert_count") {
    expert_count = parse_number<int>(key, value);
  } else if (key == "output") {
    output = value;
  } else if (key == "tree_depth") {
    tree_depth = parse_number<int>(key, value);
  } else if (key == "tree_seed") {
    tree_seed = parse_number<std::uint64_t>(key, value);
    tree_seed_set = true;
  } else if (key == "vocab") {
    algo.vocab = parse_number<int>(key, value);
  } else if (key == "min_length") {
    algo.min_length = parse_number<int>(key, value);
  } else if (key == "initial_max_length") {
    algo.initial_max_length = parse_number<int>(key, value);
  } else if (key == "max_length") {
    algo.max_length = parse_number<int>(key, value);
  } else if (key == "hidden") {
    hidden = parse_number<int>(key, value);
  } else if (key == "tau") {
    hp.tau = parse_number<double>(key, value);
    q.tau = hp.tau;
  } else if (key == "gamma") {
    hp.gamma = parse_number<double>(key, value);
  } else if (key == "rollout") {
    hp.rollout = parse_number<int>(key, value);
  } else if (key == "batch_size") {
    hp.batch_size = parse_number<int>(key, value);
  } else if (key == "replay_batch_size") {
    hp.replay_batch_size = parse_number<int>(key, value);
  } else if (key == "lr_policy") {
    hp.lr_policy = parse_number<double>(key, value);
  } else if (key == "critic_weight") {
    hp.critic_weight = parse_number<double>(key, value);
  } else if (key == "buffer_capacity") {
    hp.buffer_capacity = parse_number<std::size_t>(key, value);
  } else if (key == "replay_alpha") {
    hp.replay_alpha = parse_number<double>(key, value);
  } else if (key == "optimizer") {
    hp.optimizer = parse_optimizer(value);
  } else if (key == "iterations") {
    hp.iterations = parse_number<int>(key, value);
  } else if (key == "eval_period") {
    hp.eval_period = parse_number<int>(key, value);
  } else if (key == "strict_windows") {
    hp.strict_windows = parse_bool(key, value);
  } else if (key == "clip_norm") {
    hp.clip_norm = parse_number<double>(key, value);
  } else if (key == "average_batch") {
    hp.average_batch = parse_bool(key, value);
  } else if (key == "uniform_behavior") {
    hp.uniform_behavior = parse_bool(key, value);
  } else if (key == "max_episode_steps") {
    hp.max_episode_steps = parse_number<int>(key, value);
  } else if (key == "q_updates") {
    q.updates = parse_number<long>(key, value);
  } else if (key == "q_lr_exponent") {
    q.lr_exponent = parse_number<double>(key, value);
  } else if (key == "q_sampled") {
    q.sampled = parse_bool(key, value);
  } else if (key == "sweep_preset") {
    if (value != "tree" && value != "algorithmic") throw std::invalid_argument("unknown sweep preset '" + value + "'");
    sweep_preset = value;
  } else if (key == "grid_cap") {
    grid_cap = parse_number<std::size_t>(key, value);
  } else {
    throw std::invalid_argument("unknown key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  hp.validate();
  require(!seeds.empty(), "seeds must not be empty");
  require(expert_count >= 0, "expert_count must be >= 0");
  require(hidden >= 1, "hidden must be >= 1");
  if (is_tree()) {
    require(tree_depth >= 1 && tree_depth <= 24, "tree_depth must lie in [1, 24]");
  } else {
    require(!tabular_q(algorithm), "tabular Q-learning needs task = tree");
    require(algo.vocab >= 0, "vocab must be >= 0");
    require(algo.min_length >= 1 && algo.min_length <= algo.initial_max_length &&
                algo.initial_max_length <= algo.max_length,
            "need 1 <= min_length <= initial_max_length <= max_length");
  }
  if (algorithm == Algorithm::UnifiedPcl || algorithm == Algorithm::TabularQSoft)
    require(hp.tau > 0.0, "this algorithm needs tau > 0");
  if (algorithm == Algorithm::A2c) require(!hp.uniform_behavior, "a2c is on-policy only");
  require(q.updates >= 0 && q.lr_exponent >= 0.0, "q_updates and q_lr_exponent must be >= 0");
}

ExperimentConfig ExperimentConfig::parse(std::istream& in, const std::string& source) {
  ExperimentConfig config;
  std::string line;
  int number = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    auto fail = [&](const std::string& what) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + what);
    };
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) fail("missing key");
    if (!seen.insert(key).second) fail("duplicate key '" + key + "'");
    try {
      config.set(key, value);
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return config;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ": cannot open config file");
  return parse(f, path);
}

ExperimentConfig ExperimentConfig::for_run(std::uint64_t seed) const {
  ExperimentConfig c = *this;
  if (!c.tree_seed_set) {
    c.tree_seed = seed;
    c.tree_seed_set = true;
  }
  return c;
}

ExperimentWorld::ExperimentWorld(const ExperimentConfig& config) : config_(config) {
  if (config_.is_tree() && config_.tree_seed_set) {
    Rng rng(config_.tree_seed);
    tree_ = std::make_shared<const TabularMDP>(build_synthetic_tree(config_.tree_depth, rng));
  }
}

int ExperimentWorld::max_steps() const { return config_.is_tree() ? config_.tree_depth : config_.hp.max_episode_steps; }

EnvFactory ExperimentWorld::env_factory() const {
  if (config_.is_tree() && !tree_) throw std::logic_error("ExperimentWorld: tree config without a tree seed");
  if (tree_) {
    auto tree = tree_;
    const int depth = config_.tree_depth;
    return [tree, depth](std::uint64_t) -> std::unique_ptr<Environment> {
      auto env = std::make_unique<TabularEnv>(tree, depth);
      env->set_max_episode_reward(20.0);
      return env;
    };
  }
  AlgorithmicConfig algo = config_.algo;
  algo.task = parse_algo_task(config_.task);
  return [algo](std::uint64_t) -> std::unique_ptr<Environment> { return std::make_unique<AlgorithmicEnv>(algo); };
}

std::unique_ptr<PolicyValueModel> ExperimentWorld::make_model(const ExperimentConfig& config, std::uint64_t seed) const {
  if (config_.is_tree() && !tree_) throw std::logic_error("ExperimentWorld: tree config without a tree seed");
  const bool unified = config.algorithm == Algorithm::UnifiedPcl;
  if (tree_) {
    if (unified) return std::make_unique<TabularUnifiedModel>(tree_->num_states(), tree_->num_actions(), config.hp.tau);
    return std::make_unique<TabularModel>(tree_->num_states(), tree_->num_actions());
  }
  const auto probe = env_factory()(0);
  const std::uint64_t init = mix_seed(seed, 1);
  if (unified)
    return std::make_unique<RecurrentUnifiedModel>(probe->observation_size(), probe->num_actions(), config.hidden,
                                                   config.hp.tau, init);
  return std::make_unique<RecurrentModel>(probe->observation_size(), probe->num_actions(), config.hidden, init);
}

std::vector<Episode> ExperimentWorld::experts(int count, std::uint64_t seed) const {
  if (count < 0) throw std::invalid_argument("experts: count must be >= 0");
  if (config_.is_tree() && !tree_) throw std::logic_error("ExperimentWorld: tree config without a tree seed");
  std::vector<Episode> out;
  Rng rng(seed);
  if (tree_) {
    IterationOptions opts;
    opts.tol = 1e-12;
    const ValueTable v = hardmax_value_iteration(*tree_, opts).values;
    const QTable q = q_from_values(*tree_, v);
    auto env = env_factory()(0);
    for (int i = 0; i < count; ++i) {
      std::vector<int> actions;
      int s = tree_->initial_state();
      while (!tree_->terminal(s)) {
        const double best = hard_max(q.row(s)).value;
        std::vector<int> ties;
        for (int a = 0; a < tree_->num_actions(); ++a)
          if (q.at(s, a) >= best - 1e-9) ties.push_back(a);
        const int a = ties[rng.index(ties.size())];
        actions.push_back(a);
        s = tree_->successors(s, a)[0].state;
      }
      out.push_back(replay_actions(*env, rng.next(), actions));
    }
    return out;
  }
  AlgorithmicConfig algo = config_.algo;
  algo.task = parse_algo_task(config_.task);
  const bool fixed = algo.task == AlgoTask::HardReversedAddition;
  for (int i = 0; i < count; ++i) {
    AlgorithmicConfig sized = algo;
    const int length = fixed ? algo.max_length
                             : algo.min_length + static_cast<int>(rng.index(
                                                     static_cast<std::size_t>(algo.max_length - algo.min_length + 1)));
    sized.min_length = sized.initial_max_length = sized.max_length = length;
    AlgorithmicEnv env(sized);
    const std::uint64_t episode_seed = rng.next();
    env.reset(episode_seed);
    out.push_back(replay_actions(env, episode_seed, env.scripted_solution()));
  }
  return out;
}

std::string run_id(const ExperimentConfig& config, std::uint64_t seed) {
  return config.task + "-" + std::string(algorithm_name(config.algorithm)) + "-seed" + std::to_string(seed);
}

namespace {

RunResult run_tabular_q(const ExperimentConfig& config, const ExperimentWorld& world, std::uint64_t seed) {
  const TabularMDP& mdp = *world.tree();
  const bool soft = config.algorithm == Algorithm::TabularQSoft;
  TabularQOptions opts = config.q;
  opts.seed = seed;
  const QTable q = train_tabular_q(mdp, opts, soft);

  PolicyTable pi{mdp.num_states(), mdp.num_actions(), std::vector<double>(q.q.size(), 0.0)};
  ValueTable backed(static_cast<std::size_t>(mdp.num_states()), 0.0);
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    if (soft) {
      const auto p = soft_indmax(q.row(s), opts.tau);
      std::copy(p.begin(), p.end(), pi.row(s).begin());
      backed[static_cast<std::size_t>(s)] = softmax_value(q.row(s), opts.tau);
    } else {
      const HardMax best = hard_max(q.row(s));
      pi.at(s, static_cast<int>(best.index)) = 1.0;
      backed[static_cast<std::size_t>(s)] = best.value;
    }
  }
  // Bellman residual of the learned table.
  const QTable target = q_from_values(mdp, backed);
  double residual = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s)
    if (!mdp.terminal(s))
      for (int a = 0; a < mdp.num_actions(); ++a) residual = std::max(residual, std::fabs(target.at(s, a) - q.at(s, a)));

  RunResult run;
  run.run_id = run_id(config, seed);
  run.seed = seed;
  const double value = on_policy_eval(mdp, pi, 0.0)[static_cast<std::size_t>(mdp.initial_state())];
  run.metrics.push_back({1, opts.updates, value, residual, 0});

  TabularUnifiedModel table(mdp.num_states(), mdp.num_actions(), opts.tau > 0.0 ? opts.tau : 1.0);
  table.policy_params() = q.q;
  std::ostringstream ckpt;
  save_checkpoint(ckpt, table, Optimizer(OptimizerKind::Sgd));
  run.checkpoint = ckpt.str();
  return run;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const ExperimentWorld& world, std::uint64_t seed) {
  if (config.is_tree() && !world.tree()) {
    const ExperimentConfig own = config.for_run(seed);
    return run_experiment(own, ExperimentWorld(own), seed);
  }
  if (tabular_q(config.algorithm)) return run_tabular_q(config, world, seed);
  Hyperparams hp = config.hp;
  hp.seed = seed;
  if (config.is_tree()) hp.max_episode_steps = world.max_steps();
  auto model = world.make_model(config, seed);
  Optimizer optimizer(hp.optimizer);
  TrainOptions options;
  options.optimizer = &optimizer;
  if (config.experts) options.experts = world.experts(config.expert_count, mix_seed(seed, 2));

  RunResult run;
  run.run_id = run_id(config, seed);
  run.seed = seed;
  const EnvFactory factory = world.env_factory();
  switch (config.algorithm) {
    case Algorithm::Pcl: run.metrics = train_pcl(factory, *model, hp, options); break;
    case Algorithm::UnifiedPcl:
      run.metrics = train_unified_pcl(factory, dynamic_cast<UnifiedQModel&>(*model), hp, options);
      break;
    case Algorithm::A2c: run.metrics = train_a2c(factory, *model, hp, options); break;
    default: throw std::logic_error("run_experiment: unexpected algorithm");
  }
  std::ostringstream ckpt;
  save_checkpoint(ckpt, *model, optimizer);
  run.checkpoint = ckpt.str();
  return run;
}

void run_parallel(std::size_t count, int parallelism, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, parallelism)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

void write_run_csv(std::ostream& out, const ExperimentConfig& config, const RunResult& run) {
  out << "run_id,algorithm,task,seed,iteration,env_steps,avg_reward,loss\n";
  for (const RunMetrics& m : run.metrics)
    out << run.run_id << ',' << algorithm_name(config.algorithm) << ',' << config.task << ',' << run.seed << ','
        << m.iteration << ',' << m.env_steps << ',' << format_double(m.avg_reward) << ',' << format_double(m.loss)
        << '\n';
}

void write_aggregate_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<RunResult>& runs) {
  out << "algorithm,task,iteration,runs,env_steps_mean,avg_reward_mean,avg_reward_std,loss_mean,loss_std\n";
  std::map<int, std::vector<const RunMetrics*>> rows;
  for (const RunResult& r : runs)
    for (const RunMetrics& m : r.metrics) rows[m.iteration].push_back(&m);
  auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
    return std::pair{mean, sd};
  };
  for (const auto& [iteration, ms] : rows) {
    std::vector<double> steps, reward, loss;
    for (const RunMetrics* m : ms) {
      steps.push_back(static_cast<double>(m->env_steps));
      reward.push_back(m->avg_reward);
      loss.push_back(m->loss);
    }
    const auto [r_mean, r_sd] = mean_std(reward);
    const auto [l_mean, l_sd] = mean_std(loss);
    out << algorithm_name(config.algorithm) << ',' << config.task << ',' << iteration << ',' << ms.size() << ','
        << format_double(mean_std(steps).first) << ',' << format_double(r_mean) << ',' << format_double(r_sd) << ','
        << format_double(l_mean) << ',' << format_double(l_sd) << '\n';
  }
}

std::map<std::string, std::vector<std::string>> sweep_preset(const std::string& name) {
  if (name == "tree")
    return {{"lr_policy", {"0.01", "0.05", "0.1"}},
            {"critic_weight", {"0.1", "0.5", "1"}},
            {"tau", {"0.005", "0.01", "0.025", "0.05", "0.1", "0.25", "0.5", "1.0"}}};
  if (name == "algorithmic")
    return {{"gamma", {"0.9", "1.0"}},
            {"replay_alpha", {"0.1", "0.5"}},
            {"critic_weight", {"0.1", "1"}},
            {"tau", {"0.005", "0.01", "0.025", "0.05", "0.1", "0.15"}}};
  throw std::invalid_argument("unknown sweep preset '" + name + "'");
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& config) {
  std::map<std::string, std::vector<std::string>> grid;
  if (!config.sweep_preset.empty()) grid = sweep_preset(config.sweep_preset);
  for (const auto& [key, values] : config.grid) grid[key] = values;

  std::size_t total = 1;
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw std::invalid_argument("grid." + key + " has no values");
    total = total > config.grid_cap ? total : total * values.size();
  }
  if (total > config.grid_cap)
    throw std::invalid_argument("grid has more than grid_cap = " + std::to_string(config.grid_cap) + " points");

  std::vector<SweepPoint> points;
  std::vector<std::size_t> digit(grid.size(), 0);
  for (std::size_t p = 0; p < total; ++p) {
    SweepPoint point;
    point.config = config;
    point.config.grid.clear();
    point.config.sweep_preset.clear();
    std::size_t k = 0;
    for (const auto& [key, values] : grid) {
      point.values.emplace_back(key, values[digit[k]]);
      point.config.set(key, values[digit[k]]);
      ++k;
    }
    point.config.validate();
    points.push_back(std::move(point));
    // Last key varies fastest.
    for (std::size_t d = grid.size(); d-- > 0;) {
      auto it = grid.begin();
      std::advance(it, static_cast<long>(d));
      if (++digit[d] < it->second.size()) break;
      digit[d] = 0;
    }
  }
  return points;
}

std::string default_output_dir() {
  const char* env = std::getenv("PCL_OUTPUT_DIR");
  return env && *env ? env : "pcl_output";
}

namespace {

// Loads the config and applies CLI overrides; reports and returns false on error.
bool load_config(const CommandOptions& options, ExperimentConfig& config, std::ostream& err) {
  try {
    config = options.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(options.config);
    if (!options.seeds.empty()) config.seeds = parse_seed_list(options.seeds);
    if (!options.task.empty()) {
      config.set("task", options.task);
      config.validate();
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return false;
  }
  return true;
}

fs::path output_dir(const CommandOptions& options, const ExperimentConfig& config) {
  if (!options.out.empty()) return options.out;
  if (!config.output.empty()) return config.output;
  return default_output_dir();
}

}  // namespace

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  if (options.config.empty()) {
    err << "error: train needs --config\n";
    return 2;
  }
  if (!load_config(options, config, err)) return 2;
  const fs::path dir = output_dir(options, config);
  std::vector<RunResult> runs(config.seeds.size());
  try {
    const ExperimentWorld world(config);
    run_parallel(config.seeds.size(), options.parallelism,
                 [&](std::size_t i) { runs[i] = run_experiment(config, world, config.seeds[i]); });
    fs::create_directories(dir / "runs");
    fs::create_directories(dir / "checkpoints");
    for (const RunResult& run : runs) {
      std::ostringstream csv;
      write_run_csv(csv, config, run);
      write_file(dir / "runs" / (run.run_id + ".csv"), csv.str());
      write_file(dir / "checkpoints" / (run.run_id + ".ckpt"), run.checkpoint);
      const double final_reward = run.metrics.empty() ? 0.0 : run.metrics.back().avg_reward;
      out << run.run_id << " final avg_reward " << format_double(final_reward) << '\n';
    }
    std::ostringstream agg;
    write_aggregate_csv(agg, config, runs);
    write_file(dir / "aggregate.csv", agg.str());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  out << "wrote " << runs.size() << " run(s) to " << dir.string() << '\n';
  return 0;
}

int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  if (options.config.empty()) {
    err << "error: sweep needs --config\n";
    return 2;
  }
  if (!load_config(options, config, err)) return 2;
  std::vector<SweepPoint> points;
  try {
    points = sweep_points(config);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  const fs::path dir = output_dir(options, config);
  const std::size_t seeds = config.seeds.size();
  std::vector<double> finals(points.size() * seeds, 0.0);
  try {
    const ExperimentWorld world(config);
    run_parallel(points.size() * seeds, options.parallelism, [&](std::size_t job) {
      const SweepPoint& point = points[job / seeds];
      const RunResult run = run_experiment(point.config, world, config.seeds[job % seeds]);
      finals[job] = run.metrics.empty() ? 0.0 : run.metrics.back().avg_reward;
    });

    struct Ranked {
      std::size_t point;
      double mean, sd;
    };
    std::vector<Ranked> ranked;
    for (std::size_t p = 0; p < points.size(); ++p) {
      double mean = 0.0, var = 0.0;
      for (std::size_t s = 0; s < seeds; ++s) mean += finals[p * seeds + s];
      mean /= static_cast<double>(seeds);
      for (std::size_t s = 0; s < seeds; ++s) var += std::pow(finals[p * seeds + s] - mean, 2);
      ranked.push_back({p, mean, seeds > 1 ? std::sqrt(var / static_cast<double>(seeds - 1)) : 0.0});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.mean > b.mean; });

    std::ostringstream csv;
    csv << "rank,point";
    if (!points.empty())
      for (const auto& kv : points.front().values) csv << ',' << kv.first;
    csv << ",runs,final_reward_mean,final_reward_std\n";
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      csv << r + 1 << ',' << ranked[r].point;
      for (const auto& kv : points[ranked[r].point].values) csv << ',' << kv.second;
      csv << ',' << seeds << ',' << format_double(ranked[r].mean) << ',' << format_double(ranked[r].sd) << '\n';
    }
    fs::create_directories(dir);
    write_file(dir / "sweep_ranking.csv", csv.str());
    if (!ranked.empty()) {
      out << "best point " << ranked.front().point << ":";
      for (const auto& kv : points[ranked.front().point].values) out << ' ' << kv.first << '=' << kv.second;
      out << " final avg_reward " << format_double(ranked.front().mean) << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  out << "ranked " << points.size() << " grid point(s); wrote " << (dir / "sweep_ranking.csv").string() << '\n';
  return 0;
}

int cmd_verify(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const auto& scopes = verify_scopes();
  if (std::find(scopes.begin(), scopes.end(), options.scope) == scopes.end()) {
    err << "error: unknown scope '" << options.scope << "'\n";
    return 2;
  }
  if (options.trials < 0) {
    err << "error: trials must be >= 0\n";
    return 2;
  }
  try {
    const VerifyReport report = run_verification(options.scope, options.trials, options.seed);
    if (report.vacuous) err << "warning: trials=0, vacuous pass\n";
    report.print(out);
    out << (report.passed() ? "verify: PASS\n" : "verify: FAIL\n");
    return report.passed() ? 0 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_experts(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  if (!load_config(options, config, err)) return 2;
  if (options.count < 0) {
    err << "error: count must be >= 0\n";
    return 2;
  }
  try {
    const ExperimentWorld world(config.for_run(options.seed));
    const std::vector<Episode> experts = world.experts(options.count, options.seed);
    std::vector<EpisodeRecord> records;
    for (std::size_t i = 0; i < experts.size(); ++i) records.push_back({i, true, experts[i]});
    if (options.out.empty()) {
      write_episodes(out, records);
    } else {
      std::ostringstream text;
      write_episodes(text, records);
      const fs::path path(options.out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_file(path, text.str());
      out << "wrote " << records.size() << " expert episode(s) to " << path.string() << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_eval(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  if (options.checkpoint.empty()) {
    err << "error: eval needs --checkpoint\n";
    return 2;
  }
  if (!load_config(options, config, err)) return 2;
  if (options.episodes < 1) {
    err << "error: episodes must be >= 1\n";
    return 2;
  }
  try {
    std::ifstream f(options.checkpoint);
    if (!f) throw std::runtime_error("cannot open checkpoint " + options.checkpoint);
    Checkpoint ckpt = load_checkpoint(f);
    const ExperimentWorld world(config.for_run(options.seed));
    auto env = world.env_factory()(options.seed);
    const EvalResult r = evaluate(*ckpt.model, *env, options.episodes, options.seed, world.max_steps());
    out << "episodes " << options.episodes << " mean_reward " << format_double(r.mean_reward) << " stddev "
        << format_double(r.stddev) << " mean_max_reward " << format_double(r.mean_max_reward) << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pcl
