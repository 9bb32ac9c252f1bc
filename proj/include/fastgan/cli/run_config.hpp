#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fastgan/analysis/analysis.hpp"
#include "fastgan/model_config.hpp"
#include "fastgan/training/trainer.hpp"

namespace fastgan::cli {

// Every setting a command can read. Sources, later wins: defaults, the
// config file, command-line flags.
//
// Config file grammar, one entry per line:
//   key = value      # comment
// Blank lines and lines starting with '#' are ignored. Keys use underscores;
// the matching flag is --key with dashes (ckpt_every <-> --ckpt-every).
// Booleans accept true/false/1/0/yes/no.
struct RunConfig {
  std::string data;
  std::string out = "out";
  std::string ckpt;
  std::string image;
  std::string resume;

  int res = 256;
  double width = 1.0;
  int latent_dim = 256;

  int batch = 8;
  std::int64_t iters = 1000;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double ema_decay = 0.999;
  std::string aug = "color,translation,cutout";
  std::uint64_t seed = 0;
  std::int64_t ckpt_every = 0;
  std::string recon_norm = "l1";
  bool self_supervised = true;

  std::string dist = "pixel_l1";
  std::string pairs = "all";
  int n = 16;
  int n_content = 4;
  int n_style = 4;
  std::string log_level = "info";

  // Throws ConfigError naming the key on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);

  static const std::vector<std::string>& keys();

  ModelConfig model_config() const;
  train::TrainConfig train_config() const;
};

// "all", "none" / "" or a comma list of low-high (also low:high).
std::vector<SlePair> parse_pairs(const std::string& s, const ModelConfig& cfg);

}  // namespace fastgan::cli
