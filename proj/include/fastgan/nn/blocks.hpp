#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fastgan/ops.hpp"
#include "fastgan/rng.hpp"
#include "fastgan/tensor.hpp"

namespace fastgan::nn {

inline constexpr double kInitStd = 0.02;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using TensorList = std::vector<NamedTensor>;

// Flattened view of a parameter collection. Trainable tensors go to `params`;
// running statistics and power-iteration vectors go to `buffers`.
struct ParamCollector {
  TensorList params;
  TensorList buffers;

  void param(const std::string& name, const Tensor& t) { params.push_back({name, t}); }
  void buffer(const std::string& name, const Tensor& t) { buffers.push_back({name, t}); }
};

std::int64_t count_params(const TensorList& params);
void zero_grads(const TensorList& params);
// Copies values element-for-element; names and shapes must line up.
void copy_values(const TensorList& dst, const TensorList& src);

// Clears requires_grad on `params` for its lifetime; restores the old flags.
class FreezeGuard {
 public:
  explicit FreezeGuard(TensorList params);
  ~FreezeGuard();
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  TensorList params_;
  std::vector<bool> saved_;
};

struct ConvParams {
  Tensor weight;  // [Cout, Cin, k, k]
  Tensor bias;    // [Cout] or undefined
  int stride = 1;
  int pad = 0;
  std::optional<ops::SpectralState> sn;

  static ConvParams init(std::int64_t cin, std::int64_t cout, int kernel, int stride, int pad,
                         Rng& rng, bool bias = true, bool spectral = false);
  void collect(const std::string& prefix, ParamCollector& out) const;
};

// Convolution with the stored weight, or its spectrally normalized form when
// `sn` is set. Training mode advances the power iteration by one step.
Tensor conv_forward(const Tensor& x, ConvParams& p, bool training);

struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  ops::BatchNormState state;

  static BatchNormParams init(std::int64_t channels);
  void collect(const std::string& prefix, ParamCollector& out) const;
};

// Skip-layer excitation: per-channel gates computed from x_low scale x_high.
struct SleParams {
  ConvParams squeeze;  // [mid, C_low, 4, 4], 4x4 -> 1x1
  ConvParams excite;   // [C_high, mid, 1, 1]

  static std::int64_t mid_channels(std::int64_t c_low);
  static SleParams init(std::int64_t c_low, std::int64_t c_high, Rng& rng);
  void collect(const std::string& prefix, ParamCollector& out) const;
};

// Gate s[N,C_high,1,1] in (0,1).
Tensor sle_gate(const Tensor& x_low, SleParams& p);
Tensor sle_forward(const Tensor& x_low, const Tensor& x_high, SleParams& p);

// upsample x2 -> conv3x3 (2*C_out) -> batch norm -> GLU.
struct UpBlockParams {
  ConvParams conv;
  BatchNormParams bn;

  static UpBlockParams init(std::int64_t cin, std::int64_t cout, Rng& rng, bool spectral = false);
  std::int64_t out_channels() const { return conv.weight.dim(0) / 2; }
  void collect(const std::string& prefix, ParamCollector& out) const;
};

Tensor up_block(const Tensor& x, UpBlockParams& p, bool training);

// Residual down-sampling block; all three convs spectrally normalized.
struct DownBlockParams {
  ConvParams down;    // 4x4 stride 2 pad 1
  ConvParams refine;  // 3x3 pad 1
  ConvParams skip;    // 1x1 after avg pool

  static DownBlockParams init(std::int64_t cin, std::int64_t cout, Rng& rng);
  void collect(const std::string& prefix, ParamCollector& out) const;
};

// (main(x) + skip(x)) / 2 at half resolution.
Tensor down_block(const Tensor& x, DownBlockParams& p, bool training);

inline constexpr std::int64_t kDecoderInput = 8;
inline constexpr std::int64_t kDecoderOutput = 128;

// Four up-blocks from an 8x8 map to 128x128, then conv3x3 -> tanh.
struct DecoderParams {
  std::vector<UpBlockParams> ups;
  ConvParams to_rgb;

  static DecoderParams init(std::int64_t cin, const std::vector<std::int64_t>& widths, Rng& rng,
                            bool spectral);
  void collect(const std::string& prefix, ParamCollector& out) const;
};

Tensor decoder_forward(const Tensor& f, DecoderParams& p, bool training);

}  // namespace fastgan::nn
