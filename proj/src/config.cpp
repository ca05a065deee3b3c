#include "manet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace manet {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("config: key '" + key + "' needs an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("config: key '" + key + "' needs a number, got '" + v + "'");
  }
}

bool parse_on_off(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::invalid_argument("config: key '" + key + "' needs on/off, got '" + v + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (lr <= 0.0) throw std::invalid_argument("config: lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (eval_stride < 0 || (eval_stride > 0 && eval_stride > model.tile)) {
    throw std::invalid_argument("config: eval_stride must be in [1, tile] (or 0 for tile/2)");
  }
}

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "tile") cfg.model.tile = parse_int(key, value);
  else if (key == "patch") cfg.model.patch = parse_int(key, value);
  else if (key == "embed_dim") cfg.model.embed_dim = parse_int(key, value);
  else if (key == "depth") cfg.model.depth = parse_int(key, value);
  else if (key == "heads") cfg.model.heads = parse_int(key, value);
  else if (key == "mlp_ratio") cfg.model.mlp_ratio = parse_int(key, value);
  else if (key == "bottleneck") cfg.model.bottleneck = parse_int(key, value);
  else if (key == "classes") cfg.model.classes = parse_int(key, value);
  else if (key == "adapter") cfg.model.adapter = adapter_mode_from_string(value);
  else if (key == "modality") cfg.model.modality = modality_from_string(value);
  else if (key == "dfm") cfg.model.dfm = parse_on_off(key, value);
  else if (key == "lr") cfg.lr = parse_double(key, value);
  else if (key == "momentum") cfg.momentum = parse_double(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_double(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
  else if (key == "epochs") cfg.epochs = parse_int(key, value);
  else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(key, value));
  else if (key == "eval_stride") cfg.eval_stride = parse_int(key, value);
  else if (key == "data_root") cfg.data_root = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    }
    apply_config_kv(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

std::string canonical_model_text(const ModelConfig& cfg) {
  std::ostringstream out;
  out << "tile = " << cfg.tile << "\n"
      << "patch = " << cfg.patch << "\n"
      << "embed_dim = " << cfg.embed_dim << "\n"
      << "depth = " << cfg.depth << "\n"
      << "heads = " << cfg.heads << "\n"
      << "mlp_ratio = " << cfg.mlp_ratio << "\n"
      << "bottleneck = " << cfg.bottleneck << "\n"
      << "classes = " << cfg.classes << "\n"
      << "adapter = " << to_string(cfg.adapter) << "\n"
      << "modality = " << to_string(cfg.modality) << "\n"
      << "dfm = " << (cfg.dfm ? "on" : "off") << "\n";
  return out.str();
}

ModelConfig parse_model_text(const std::string& text) {
  RunConfig tmp;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("model config text: expected key = value, got '" + t + "'");
    }
    apply_config_kv(tmp, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return tmp.model;
}

std::string canonical_run_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << canonical_model_text(cfg.model);
  out << "lr = " << format_double(cfg.lr) << "\n"
      << "momentum = " << format_double(cfg.momentum) << "\n"
      << "weight_decay = " << format_double(cfg.weight_decay) << "\n"
      << "batch_size = " << cfg.batch_size << "\n"
      << "epochs = " << cfg.epochs << "\n"
      << "seed = " << cfg.seed << "\n"
      << "eval_stride = " << cfg.eval_stride << "\n"
      << "data_root = " << cfg.data_root << "\n"
      << "out_dir = " << cfg.out_dir << "\n";
  return out.str();
}

}  // namespace manet
