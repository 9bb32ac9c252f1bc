#include "fastgan/cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fastgan::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    throw ConfigError("invalid value '" + v + "' for key '" + key + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean '" + v + "' for key '" + key + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter number(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}

Setter text(std::string RunConfig::*field) {
  return [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data", text(&RunConfig::data)},
      {"out", text(&RunConfig::out)},
      {"ckpt", text(&RunConfig::ckpt)},
      {"image", text(&RunConfig::image)},
      {"resume", text(&RunConfig::resume)},
      {"res", number(&RunConfig::res)},
      {"width", number(&RunConfig::width)},
      {"latent_dim", number(&RunConfig::latent_dim)},
      {"batch", number(&RunConfig::batch)},
      {"iters", number(&RunConfig::iters)},
      {"lr", number(&RunConfig::lr)},
      {"beta1", number(&RunConfig::beta1)},
      {"beta2", number(&RunConfig::beta2)},
      {"ema_decay", number(&RunConfig::ema_decay)},
      {"aug", text(&RunConfig::aug)},
      {"seed", number(&RunConfig::seed)},
      {"ckpt_every", number(&RunConfig::ckpt_every)},
      {"recon_norm", text(&RunConfig::recon_norm)},
      {"self_supervised",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.self_supervised = parse_bool(k, v); }},
      {"dist", text(&RunConfig::dist)},
      {"pairs", text(&RunConfig::pairs)},
      {"n", number(&RunConfig::n)},
      {"n_content", number(&RunConfig::n_content)},
      {"n_style", number(&RunConfig::n_style)},
      {"log_level", text(&RunConfig::log_level)},
  };
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, _] : setters()) out.push_back(name);
    return out;
  }();
  return k;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m = ModelConfig::preset(res, width);
  m.latent_dim = latent_dim;
  m.validate();
  return m;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig t;
  t.adam.lr = lr;
  t.adam.beta1 = beta1;
  t.adam.beta2 = beta2;
  t.batch_size = batch;
  t.iters = iters;
  t.ema_decay = ema_decay;
  t.aug = train::AugmentPolicy::parse(aug);
  t.seed = seed;
  t.checkpoint_every = ckpt_every;
  t.recon_norm = train::parse_recon_norm(recon_norm);
  t.self_supervised = self_supervised;
  t.validate();
  return t;
}

std::vector<SlePair> parse_pairs(const std::string& s, const ModelConfig& cfg) {
  if (s == "all") return cfg.sle_pairs;
  std::vector<SlePair> out;
  if (s.empty() || s == "none") return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto sep = item.find_first_of("-:");
    if (sep == std::string::npos) throw ConfigError("invalid SLE pair '" + item + "' (expected low-high)");
    const SlePair p{parse_number<int>("pairs", item.substr(0, sep)), parse_number<int>("pairs", item.substr(sep + 1))};
    if (std::ranges::find(cfg.sle_pairs, p) == cfg.sle_pairs.end()) {
      throw ConfigError("SLE pair " + item + " is not part of the " + std::to_string(cfg.resolution) + " model");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace fastgan::cli
