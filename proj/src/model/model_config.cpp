#include "fastgan/model_config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fastgan {
namespace {

const std::map<int, int> kGChannels = {{4, 256},   {8, 512},  {16, 256}, {32, 128}, {64, 128},
                                       {128, 64},  {256, 32}, {512, 3},  {1024, 3}};
const std::map<int, int> kDChannels = {{8, 1024},  {16, 512}, {32, 256}, {64, 128},
                                       {128, 64},  {256, 32}, {512, 3}};
const std::vector<int> kDecoderChannels = {256, 128, 128, 64};

int scaled(int c, double width) {
  if (c == 3) return 3;
  return std::max(4, static_cast<int>(std::lround(c * width)));
}

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

ModelConfig ModelConfig::preset(int resolution, double width) {
  if (resolution < 64 || resolution > 1024 || !is_pow2(resolution)) {
    throw ConfigError("resolution must be one of 64, 128, 256, 512, 1024 (got " +
                      std::to_string(resolution) + ")");
  }
  if (!(width > 0)) throw ConfigError("channel width multiplier must be positive");
  ModelConfig cfg;
  cfg.resolution = resolution;
  for (auto [r, c] : kGChannels)
    if (r <= resolution) cfg.g_channels[r] = scaled(c, width);
  for (auto [r, c] : kDChannels)
    if (r < resolution) cfg.d_channels[r] = scaled(c, width);
  for (int c : kDecoderChannels) cfg.decoder_channels.push_back(scaled(c, width));
  // Long-range links spanning a 16x resolution gap.
  for (int low : {4, 8, 16, 32}) {
    const int high = low * 16;
    if (high > resolution) continue;
    if (resolution >= 256 && low < 8) continue;
    cfg.sle_pairs.push_back({low, high});
  }
  return cfg;
}

int ModelConfig::g_ch(int res) const {
  auto it = g_channels.find(res);
  if (it == g_channels.end()) {
    throw ConfigError("generator channel schedule has no entry for resolution " + std::to_string(res));
  }
  return it->second;
}

int ModelConfig::d_ch(int res) const {
  if (res >= 512) return 3;
  auto it = d_channels.find(res);
  if (it == d_channels.end()) {
    throw ConfigError("discriminator channel schedule has no entry for resolution " +
                      std::to_string(res));
  }
  return it->second;
}

int ModelConfig::d_stem_convs() const {
  int n = 0;
  while ((resolution >> n) > 256) ++n;
  return std::max(1, n);
}

void ModelConfig::validate() const {
  if (resolution < 64 || resolution > 1024 || !is_pow2(resolution)) {
    throw ConfigError("resolution must be one of 64, 128, 256, 512, 1024 (got " +
                      std::to_string(resolution) + ")");
  }
  if (latent_dim < 1) throw ConfigError("latent_dim must be positive");
  for (int r = 4; r <= resolution; r *= 2) {
    const int c = g_ch(r);
    if (c < 1) throw ConfigError("generator channels must be positive at " + std::to_string(r));
    if (r >= 512 && c != 3) {
      throw ConfigError("generator layers at resolution >= 512 must have 3 channels (resolution " +
                        std::to_string(r) + " has " + std::to_string(c) + ")");
    }
  }
  for (int r = 8; r < resolution; r *= 2) {
    if (d_ch(r) < 1) throw ConfigError("discriminator channels must be positive at " + std::to_string(r));
  }
  if (decoder_channels.size() != 4) throw ConfigError("decoder_channels needs four entries");
  for (int c : decoder_channels)
    if (c < 1) throw ConfigError("decoder channels must be positive");
  for (const auto& p : sle_pairs) {
    if (!is_pow2(p.low) || !is_pow2(p.high) || p.low < 4 || p.low >= p.high ||
        p.high > resolution) {
      throw ConfigError("invalid SLE pair " + std::to_string(p.low) + "->" + std::to_string(p.high));
    }
    for (const auto& q : sle_pairs) {
      if (&p != &q && q.high == p.high) {
        throw ConfigError("two SLE pairs target resolution " + std::to_string(p.high));
      }
    }
  }
}

}  // namespace fastgan
