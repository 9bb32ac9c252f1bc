#pragma once

#include <map>
#include <string>

#include "fastgan/model_config.hpp"
#include "fastgan/nn/blocks.hpp"

namespace fastgan {

struct GeneratorParams {
  nn::ConvParams project;  // z -> 2*C(4)*16 logits, reshaped to 4x4
  nn::BatchNormParams project_bn;
  std::map<int, nn::UpBlockParams> up;  // keyed by output resolution
  std::map<SlePair, nn::SleParams> sle;
  nn::ConvParams to_rgb;

  static GeneratorParams init(const ModelConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, nn::ParamCollector& out) const;
  nn::ParamCollector collect(const std::string& prefix = "g") const;
  GeneratorParams clone() const;
};

using SleOverride = std::map<SlePair, Tensor>;

struct GeneratorOutput {
  Tensor image;                       // [N,3,R,R] in [-1,1]
  std::map<SlePair, Tensor> x_low;    // the forward pass's own x_low per pair
};

// Maps z[N, latent_dim] to an image. Pairs present in `sle_override` gate
// with the supplied x_low instead of this pass's own map.
GeneratorOutput g_forward(const Tensor& z, GeneratorParams& p, const ModelConfig& cfg,
                          bool training, const SleOverride* sle_override = nullptr);

Tensor sample_latent(std::int64_t n, int latent_dim, Rng& rng);

}  // namespace fastgan
