#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fastgan/model_config.hpp"
#include "fastgan/nn/blocks.hpp"

namespace fastgan {

struct DiscriminatorParams {
  std::vector<nn::ConvParams> stem;             // 4x4 stride-2 convs
  std::vector<nn::DownBlockParams> down;        // chain down to 8x8
  nn::ConvParams head;                          // 4x4, 8x8 -> 5x5
  nn::ConvParams head_out;                      // 1x1 -> 1 channel
  nn::DecoderParams part_decoder;               // cropped f1
  nn::DecoderParams full_decoder;               // f2
  int resolution = 0;

  static DiscriminatorParams init(const ModelConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, nn::ParamCollector& out) const;
  nn::ParamCollector collect(const std::string& prefix = "d") const;
  // Every convolution weight paired with its power-iteration state.
  std::vector<const nn::ConvParams*> convs() const;
};

struct DiscriminatorFeatures {
  Tensor f1;      // [N, C16, 16, 16]
  Tensor f2;      // [N, C8, 8, 8]
  Tensor logits;  // [N, 1, 5, 5] patch logits
};

// Training mode advances every spectral-norm power iteration by one step;
// eval mode has no side effects.
DiscriminatorFeatures d_forward(const Tensor& img, DiscriminatorParams& p, bool training);

// Position of the 8x8 window on the 16x16 f1 grid.
struct CropSpec {
  int i = 0;
  int j = 0;

  static constexpr int kGrid = 16;
  static constexpr int kExtent = 8;

  void validate() const;
  // Matching image window [top, top+size) x [left, left+size) at resolution r.
  int image_top(int r) const { return i * r / kGrid; }
  int image_left(int r) const { return j * r / kGrid; }
  static int image_size(int r) { return kExtent * r / kGrid; }
};

struct Reconstruction {
  Tensor part;  // I'_part [N,3,128,128]
  Tensor full;  // I'      [N,3,128,128]
};

// The part decoder reads f1[:, :, i:i+8, j:j+8]; `crops` holds one window
// per sample or a single window shared by the batch.
Reconstruction reconstruct(const DiscriminatorFeatures& feats, std::span<const CropSpec> crops,
                           DiscriminatorParams& p, bool training);
Reconstruction reconstruct(const DiscriminatorFeatures& feats, const CropSpec& crop,
                           DiscriminatorParams& p, bool training);

}  // namespace fastgan
