#include "pcl/environment.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace pcl {

double Episode::total_reward() const {
  double total = 0.0;
  for (double r : rewards) total += r;
  return total;
}

void Episode::validate() const {
  if (observations.size() != actions.size() + 1 || rewards.size() != actions.size())
    throw std::invalid_argument("Episode: need |observations| = |actions| + 1 = |rewards| + 1");
  for (double r : rewards)
    if (!std::isfinite(r)) throw std::invalid_argument("Episode: non-finite reward");
}

TabularEnv::TabularEnv(std::shared_ptr<const TabularMDP> mdp, int max_steps)
    : mdp_(std::move(mdp)), max_steps_(max_steps) {
  if (!mdp_) throw std::invalid_argument("TabularEnv: null MDP");
}

int TabularEnv::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  state_ = mdp_->initial_state();
  steps_ = 0;
  done_ = false;
  return state_;
}

StepResult TabularEnv::step(int action) {
  if (done_) throw std::logic_error("TabularEnv: step after episode end");
  if (action < 0 || action >= mdp_->num_actions()) throw std::out_of_range("TabularEnv: action out of range");
  const double reward = mdp_->reward(state_, action);
  const auto next = mdp_->successors(state_, action);
  if (next.size() == 1) {
    state_ = next[0].state;
  } else {
    double u = rng_.uniform();
    int chosen = next.back().state;
    for (const Successor& n : next) {
      u -= n.prob;
      if (u < 0.0) {
        chosen = n.state;
        break;
      }
    }
    state_ = chosen;
  }
  ++steps_;
  const bool terminated = mdp_->terminal(state_);
  done_ = terminated || (max_steps_ > 0 && steps_ >= max_steps_);
  return {state_, reward, done_, terminated};
}

Episode replay_actions(Environment& env, std::uint64_t seed, const std::vector<int>& actions) {
  Episode ep;
  ep.seed = seed;
  ep.observations.push_back(env.reset(seed));
  for (int a : actions) {
    const StepResult r = env.step(a);
    ep.actions.push_back(a);
    ep.rewards.push_back(r.reward);
    ep.observations.push_back(r.observation);
    if (r.done) {
      ep.terminated = r.terminated;
      break;
    }
  }
  return ep;
}

namespace {

template <typename T>
void write_list(std::ostream& out, const std::vector<T>& xs) {
  if (xs.empty()) {
    out << '-';
    return;
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out << ' ';
    if constexpr (std::is_floating_point_v<T>) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", xs[i]);
      out << buf;
    } else {
      out << xs[i];
    }
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& field, std::size_t line_no) {
  std::vector<T> xs;
  if (field == "-") return xs;
  std::istringstream in(field);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        xs.push_back(std::stod(tok, &used));
      } else {
        xs.push_back(static_cast<T>(std::stol(tok, &used)));
      }
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::runtime_error("episode file line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    }
  }
  return xs;
}

}  // namespace

void write_episodes(std::ostream& out, const std::vector<EpisodeRecord>& records) {
  out << "# pcl-episodes v1\n";
  out << "# id\tseed\tpinned\tterminated\tobservations\tactions\trewards\n";
  for (const EpisodeRecord& r : records) {
    out << r.id << '\t' << r.episode.seed << '\t' << (r.pinned ? 1 : 0) << '\t' << (r.episode.terminated ? 1 : 0)
        << '\t';
    write_list(out, r.episode.observations);
    out << '\t';
    write_list(out, r.episode.actions);
    out << '\t';
    write_list(out, r.episode.rewards);
    out << '\n';
  }
}

std::vector<EpisodeRecord> read_episodes(std::istream& in) {
  std::vector<EpisodeRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 7)
      throw std::runtime_error("episode file line " + std::to_string(line_no) + ": expected 7 tab-separated fields");
    EpisodeRecord r;
    try {
      r.id = std::stoull(fields[0]);
      r.episode.seed = std::stoull(fields[1]);
    } catch (const std::exception&) {
      throw std::runtime_error("episode file line " + std::to_string(line_no) + ": bad id or seed");
    }
    if ((fields[2] != "0" && fields[2] != "1") || (fields[3] != "0" && fields[3] != "1"))
      throw std::runtime_error("episode file line " + std::to_string(line_no) + ": flags must be 0 or 1");
    r.pinned = fields[2] == "1";
    r.episode.terminated = fields[3] == "1";
    r.episode.observations = parse_list<int>(fields[4], line_no);
    r.episode.actions = parse_list<int>(fields[5], line_no);
    r.episode.rewards = parse_list<double>(fields[6], line_no);
    try {
      r.episode.validate();
    } catch (const std::exception& e) {
      throw std::runtime_error("episode file line " + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace pcl
