#include "pcl/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pcl {

namespace {

constexpr const char* kMagic = "pcl-checkpoint";
constexpr int kVersion = 1;

void write_array(std::ostream& out, const std::string& name, const std::vector<double>& xs) {
  out << "array " << name << ' ' << xs.size() << '\n';
  char buf[40];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%a", xs[i]);
    out << buf << ((i + 1) % 8 == 0 || i + 1 == xs.size() ? '\n' : ' ');
  }
}

std::vector<double> read_values(std::istream& in, std::size_t n, const std::string& name) {
  std::vector<double> xs(n);
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> tok)) throw std::runtime_error("checkpoint: array '" + name + "' is truncated");
    char* end = nullptr;
    xs[i] = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw std::runtime_error("checkpoint: bad number '" + tok + "'");
  }
  return xs;
}

}  // namespace

void save_checkpoint(std::ostream& out, PolicyValueModel& model, const Optimizer& optimizer) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "model " << model.descriptor() << '\n';
  out << "optimizer " << optimizer_name(optimizer.kind()) << ' ' << optimizer.steps() << '\n';
  for (auto& [name, array] : model.named_arrays()) write_array(out, name, *array);
  write_array(out, "adam_m_policy", optimizer.m_policy);
  write_array(out, "adam_v_policy", optimizer.v_policy);
  write_array(out, "adam_m_value", optimizer.m_value);
  write_array(out, "adam_v_value", optimizer.v_value);
  out << "end\n";
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: empty input");
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    if (!(head >> magic >> version) || magic != kMagic) throw std::runtime_error("checkpoint: bad header");
    if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  if (!std::getline(in, line) || line.rfind("model ", 0) != 0) throw std::runtime_error("checkpoint: missing model line");
  std::unique_ptr<PolicyValueModel> model;
  try {
    model = make_model(line.substr(6));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing optimizer line");
  std::istringstream opt_line(line);
  std::string word, kind;
  long steps = 0;
  if (!(opt_line >> word >> kind >> steps) || word != "optimizer") throw std::runtime_error("checkpoint: bad optimizer line");
  Checkpoint cp{std::move(model), Optimizer(parse_optimizer(kind))};
  cp.optimizer.steps_ = steps;

  auto arrays = cp.model->named_arrays();
  std::string tag, name;
  std::size_t n = 0;
  while (in >> tag) {
    if (tag == "end") return cp;
    if (tag != "array" || !(in >> name >> n)) throw std::runtime_error("checkpoint: expected 'array <name> <n>'");
    std::vector<double> values = read_values(in, n, name);
    std::vector<double>* target = nullptr;
    for (auto& [array_name, array] : arrays)
      if (array_name == name) target = array;
    if (name == "adam_m_policy") target = &cp.optimizer.m_policy;
    if (name == "adam_v_policy") target = &cp.optimizer.v_policy;
    if (name == "adam_m_value") target = &cp.optimizer.m_value;
    if (name == "adam_v_value") target = &cp.optimizer.v_value;
    if (!target) throw std::runtime_error("checkpoint: unknown array '" + name + "'");
    if (name.rfind("adam_", 0) != 0 && target->size() != values.size())
      throw std::runtime_error("checkpoint: array '" + name + "' has " + std::to_string(values.size()) +
                               " entries, model expects " + std::to_string(target->size()));
    *target = std::move(values);
  }
  throw std::runtime_error("checkpoint: missing 'end'");
}

}  // namespace pcl
