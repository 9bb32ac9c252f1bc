#pragma once

#include <compare>
#include <map>
#include <vector>

#include "fastgan/common.hpp"

namespace fastgan {

struct SlePair {
  int low = 0;
  int high = 0;

  auto operator<=>(const SlePair&) const = default;
};

// Fully determines the generator and discriminator shapes.
struct ModelConfig {
  int resolution = 1024;
  int latent_dim = 256;
  std::map<int, int> g_channels;  // feature-map resolution -> channels (4..resolution)
  std::map<int, int> d_channels;  // feature-map resolution -> channels (8..resolution/2)
  std::vector<int> decoder_channels;  // widths at 16, 32, 64, 128
  std::vector<SlePair> sle_pairs;

  // Default layout for a resolution in {64, 128, 256, 512, 1024}. `width`
  // scales every channel count except the fixed 3-channel high-resolution
  // layers (minimum 4).
  static ModelConfig preset(int resolution, double width = 1.0);

  int g_ch(int res) const;
  int d_ch(int res) const;
  // Stride-2 convs ahead of the residual chain.
  int d_stem_convs() const;
  int d_chain_start() const { return resolution >> d_stem_convs(); }

  void validate() const;  // throws ConfigError
};

}  // namespace fastgan
