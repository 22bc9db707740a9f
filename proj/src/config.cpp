#include "visern/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "visern/error.hpp"

namespace visern {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return kv;
}

std::string dump_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

void apply_config(TrainConfig& cfg, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "batch_size") cfg.batch_size = parse_uint(key, value);
    else if (key == "max_epochs") cfg.max_epochs = parse_uint(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "lr_decay_factor") cfg.lr_decay_factor = parse_double(key, value);
    else if (key == "plateau_patience") cfg.plateau_patience = parse_uint(key, value);
    else if (key == "margin") cfg.margin = parse_double(key, value);
    else if (key == "seed") cfg.seed = parse_uint(key, value);
    else if (key == "reasoning") cfg.reasoning = value;
    else if (key == "adjacency") cfg.adjacency = value;
    else if (key == "reduction") cfg.reduction = value;
    else if (key == "adam_beta1") cfg.adam_beta1 = parse_double(key, value);
    else if (key == "adam_beta2") cfg.adam_beta2 = parse_double(key, value);
    else if (key == "adam_eps") cfg.adam_eps = parse_double(key, value);
    else if (key == "min_lr") cfg.min_lr = parse_double(key, value);
    else if (key == "word_dim") cfg.word_dim = parse_uint(key, value);
    else if (key == "common_dim") cfg.common_dim = parse_uint(key, value);
    else if (key == "frames") cfg.frames = parse_uint(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  validate(cfg);
}

KeyValues to_key_values(const TrainConfig& cfg) {
  return {
      {"batch_size", std::to_string(cfg.batch_size)},
      {"max_epochs", std::to_string(cfg.max_epochs)},
      {"lr", format_double(cfg.lr)},
      {"lr_decay_factor", format_double(cfg.lr_decay_factor)},
      {"plateau_patience", std::to_string(cfg.plateau_patience)},
      {"margin", format_double(cfg.margin)},
      {"seed", std::to_string(cfg.seed)},
      {"reasoning", cfg.reasoning},
      {"adjacency", cfg.adjacency},
      {"reduction", cfg.reduction},
      {"adam_beta1", format_double(cfg.adam_beta1)},
      {"adam_beta2", format_double(cfg.adam_beta2)},
      {"adam_eps", format_double(cfg.adam_eps)},
      {"min_lr", format_double(cfg.min_lr)},
      {"word_dim", std::to_string(cfg.word_dim)},
      {"common_dim", std::to_string(cfg.common_dim)},
      {"frames", std::to_string(cfg.frames)},
  };
}

bool operator==(const TrainConfig& a, const TrainConfig& b) {
  return to_key_values(a) == to_key_values(b);
}

}  // namespace visern
