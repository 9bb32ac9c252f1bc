#pragma once

#include <span>

#include "fastgan/common.hpp"
#include "fastgan/rng.hpp"
#include "fastgan/tensor.hpp"

// Differentiable tensor operations. Every op records its backward closure on
// the active Graph when any input requires grad.
namespace fastgan::ops {

inline constexpr Real kLeakySlope = Real(0.1);
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kSpectralEps = 1e-12;
// Power iterations run when a SpectralState is created.
inline constexpr int kSpectralInitIters = 15;

// x[N,Cin,H,W] * w[Cout,Cin,kH,kW] + b[Cout]. `b` may be undefined (no bias).
// Implemented as im2col + GEMM.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

Tensor upsample_nearest2x(const Tensor& x);
Tensor avg_pool2x(const Tensor& x);
// Averages disjoint (H/out)x(W/out) blocks; H and W must divide by out_hw.
Tensor adaptive_avg_pool(const Tensor& x, int out_hw);

Tensor leaky_relu(const Tensor& x, Real slope = kLeakySlope);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// x[N,2C,H,W] -> x[:, :C] * sigmoid(x[:, C:]).
Tensor glu(const Tensor& x);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;

  static BatchNormState init(std::int64_t channels);
};

// Per-channel normalization over (N,H,W). Training mode uses batch statistics
// and updates `state`; eval mode reads the running statistics.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    BatchNormState& state, bool training);

// Power-iteration vectors for one weight viewed as a [rows, rest] matrix.
struct SpectralState {
  Tensor u;  // [rows]
  Tensor v;  // [rest]

  static SpectralState init(const Tensor& w, Rng& rng);
};

// Returns w / sigma, sigma = u^T W v after `iters` power iterations that
// update `state` in place. iters == 0 reuses the stored vectors.
Tensor spectral_normalize(const Tensor& w, SpectralState& state, int iters = 1);
// Current power-iteration estimate without modifying state.
double spectral_sigma(const Tensor& w, const SpectralState& state);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);
Tensor add_scalar(const Tensor& x, Real value);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// Spatial window x[:, :, top:top+h, left:left+w].
Tensor crop2d(const Tensor& x, std::int64_t top, std::int64_t left, std::int64_t h, std::int64_t w);

// Per-sample windows: sample n uses x[n, :, top_n:top_n+h, left_n:left_n+w].
Tensor crop2d_per_sample(const Tensor& x, std::span<const std::int64_t> top,
                         std::span<const std::int64_t> left, std::int64_t h, std::int64_t w);

// y[n,c,i,j] = s[n,c] * x[n,c,i,j] with s shaped [N,C,1,1].
Tensor channel_scale(const Tensor& x, const Tensor& s);

// Per-sample ops used by differentiable augmentation. Spans have length N.
Tensor add_per_sample(const Tensor& x, std::span<const Real> shift);
// (x - m) * f_n + m with m the mean over channels at each pixel.
Tensor blend_channel_mean(const Tensor& x, std::span<const Real> factor);
// (x - m) * f_n + m with m the mean over (C,H,W) of sample n.
Tensor blend_sample_mean(const Tensor& x, std::span<const Real> factor);
// y[n,c,i,j] = x[n,c,i-dy_n,j-dx_n], zero outside.
Tensor translate(const Tensor& x, std::span<const int> dy, std::span<const int> dx);

}  // namespace fastgan::ops
