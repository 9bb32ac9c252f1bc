#include "fastgan/nn/blocks.hpp"

#include <algorithm>

namespace fastgan::nn {

std::int64_t count_params(const TensorList& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

void zero_grads(const TensorList& params) {
  for (const auto& p : params) p.tensor.zero_grad();
}

void copy_values(const TensorList& dst, const TensorList& src) {
  if (dst.size() != src.size()) throw ShapeError("copy_values: collection sizes differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || dst[i].tensor.shape() != src[i].tensor.shape()) {
      throw ShapeError("copy_values: entry mismatch at " + dst[i].name + " vs " + src[i].name);
    }
    Tensor d = dst[i].tensor;
    std::ranges::copy(src[i].tensor.data(), d.data().begin());
  }
}

FreezeGuard::FreezeGuard(TensorList params) : params_(std::move(params)) {
  for (auto& p : params_) {
    saved_.push_back(p.tensor.requires_grad());
    p.tensor.set_requires_grad(false);
  }
}

FreezeGuard::~FreezeGuard() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].tensor.set_requires_grad(saved_[i]);
}

// ---------------------------------------------------------------------------

ConvParams ConvParams::init(std::int64_t cin, std::int64_t cout, int kernel, int stride, int pad,
                            Rng& rng, bool bias, bool spectral) {
  ConvParams p;
  p.weight = Tensor({cout, cin, kernel, kernel});
  rng.fill_normal(p.weight.data(), 0.0, kInitStd);
  p.weight.set_requires_grad(true);
  if (bias) {
    p.bias = Tensor::zeros({cout});
    p.bias.set_requires_grad(true);
  }
  p.stride = stride;
  p.pad = pad;
  if (spectral) p.sn = ops::SpectralState::init(p.weight, rng);
  return p;
}

void ConvParams::collect(const std::string& prefix, ParamCollector& out) const {
  out.param(prefix + ".weight", weight);
  if (bias.defined()) out.param(prefix + ".bias", bias);
  if (sn) {
    out.buffer(prefix + ".sn_u", sn->u);
    out.buffer(prefix + ".sn_v", sn->v);
  }
}

Tensor conv_forward(const Tensor& x, ConvParams& p, bool training) {
  if (!p.sn) return ops::conv2d(x, p.weight, p.bias, p.stride, p.pad);
  Tensor w = ops::spectral_normalize(p.weight, *p.sn, training ? 1 : 0);
  return ops::conv2d(x, w, p.bias, p.stride, p.pad);
}

BatchNormParams BatchNormParams::init(std::int64_t channels) {
  BatchNormParams p{Tensor::full({channels}, Real(1)), Tensor::zeros({channels}),
                    ops::BatchNormState::init(channels)};
  p.gamma.set_requires_grad(true);
  p.beta.set_requires_grad(true);
  return p;
}

void BatchNormParams::collect(const std::string& prefix, ParamCollector& out) const {
  out.param(prefix + ".gamma", gamma);
  out.param(prefix + ".beta", beta);
  out.buffer(prefix + ".running_mean", state.running_mean);
  out.buffer(prefix + ".running_var", state.running_var);
}

// ---------------------------------------------------------------------------

std::int64_t SleParams::mid_channels(std::int64_t c_low) { return std::max<std::int64_t>(4, c_low / 8); }

SleParams SleParams::init(std::int64_t c_low, std::int64_t c_high, Rng& rng) {
  const auto mid = mid_channels(c_low);
  return {ConvParams::init(c_low, mid, 4, 1, 0, rng), ConvParams::init(mid, c_high, 1, 1, 0, rng)};
}

void SleParams::collect(const std::string& prefix, ParamCollector& out) const {
  squeeze.collect(prefix + ".squeeze", out);
  excite.collect(prefix + ".excite", out);
}

Tensor sle_gate(const Tensor& x_low, SleParams& p) {
  if (x_low.ndim() != 4 || x_low.dim(2) < 4 || x_low.dim(2) % 4 != 0 ||
      x_low.dim(2) != x_low.dim(3)) {
    throw ShapeError("sle: x_low must be square with side a multiple of 4, got " +
                     shape_str(x_low.shape()));
  }
  Tensor h = ops::adaptive_avg_pool(x_low, 4);
  h = ops::leaky_relu(conv_forward(h, p.squeeze, false));
  return ops::sigmoid(conv_forward(h, p.excite, false));
}

Tensor sle_forward(const Tensor& x_low, const Tensor& x_high, SleParams& p) {
  if (x_high.ndim() != 4 || p.excite.weight.dim(0) != x_high.dim(1)) {
    throw ShapeError("sle: gate produces " + std::to_string(p.excite.weight.dim(0)) +
                     " channels but x_high is " + shape_str(x_high.shape()));
  }
  if (x_low.ndim() != 4 || x_low.dim(0) != x_high.dim(0)) {
    throw ShapeError("sle: batch mismatch between x_low " + shape_str(x_low.shape()) +
                     " and x_high " + shape_str(x_high.shape()));
  }
  return ops::channel_scale(x_high, sle_gate(x_low, p));
}

// ---------------------------------------------------------------------------

UpBlockParams UpBlockParams::init(std::int64_t cin, std::int64_t cout, Rng& rng, bool spectral) {
  return {ConvParams::init(cin, 2 * cout, 3, 1, 1, rng, true, spectral),
          BatchNormParams::init(2 * cout)};
}

void UpBlockParams::collect(const std::string& prefix, ParamCollector& out) const {
  conv.collect(prefix + ".conv", out);
  bn.collect(prefix + ".bn", out);
}

Tensor up_block(const Tensor& x, UpBlockParams& p, bool training) {
  Tensor h = ops::upsample_nearest2x(x);
  h = conv_forward(h, p.conv, training);
  h = ops::batch_norm2d(h, p.bn.gamma, p.bn.beta, p.bn.state, training);
  return ops::glu(h);
}

// ---------------------------------------------------------------------------

DownBlockParams DownBlockParams::init(std::int64_t cin, std::int64_t cout, Rng& rng) {
  DownBlockParams p;
  p.down = ConvParams::init(cin, cout, 4, 2, 1, rng, true, true);
  p.refine = ConvParams::init(cout, cout, 3, 1, 1, rng, true, true);
  p.skip = ConvParams::init(cin, cout, 1, 1, 0, rng, true, true);
  return p;
}

void DownBlockParams::collect(const std::string& prefix, ParamCollector& out) const {
  down.collect(prefix + ".down", out);
  refine.collect(prefix + ".refine", out);
  skip.collect(prefix + ".skip", out);
}

Tensor down_block(const Tensor& x, DownBlockParams& p, bool training) {
  if (x.ndim() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw ShapeError("down_block: spatial size must be even, got " + shape_str(x.shape()));
  }
  Tensor a = ops::leaky_relu(conv_forward(x, p.down, training));
  a = ops::leaky_relu(conv_forward(a, p.refine, training));
  Tensor b = ops::leaky_relu(conv_forward(ops::avg_pool2x(x), p.skip, training));
  return ops::scale(ops::add(a, b), Real(0.5));
}

// ---------------------------------------------------------------------------

DecoderParams DecoderParams::init(std::int64_t cin, const std::vector<std::int64_t>& widths,
                                  Rng& rng, bool spectral) {
  if (widths.size() != 4) throw ConfigError("decoder needs exactly four widths");
  DecoderParams p;
  std::int64_t c = cin;
  for (auto w : widths) {
    p.ups.push_back(UpBlockParams::init(c, w, rng, spectral));
    c = w;
  }
  p.to_rgb = ConvParams::init(c, 3, 3, 1, 1, rng, true, spectral);
  return p;
}

void DecoderParams::collect(const std::string& prefix, ParamCollector& out) const {
  for (std::size_t i = 0; i < ups.size(); ++i) ups[i].collect(prefix + ".up" + std::to_string(i), out);
  to_rgb.collect(prefix + ".to_rgb", out);
}

Tensor decoder_forward(const Tensor& f, DecoderParams& p, bool training) {
  if (f.ndim() != 4 || f.dim(2) != kDecoderInput || f.dim(3) != kDecoderInput) {
    throw ShapeError("decoder: expected an 8x8 input map, got " +
                     (f.defined() ? shape_str(f.shape()) : std::string("<undefined>")));
  }
  Tensor h = f;
  for (auto& up : p.ups) h = up_block(h, up, training);
  return ops::tanh(conv_forward(h, p.to_rgb, training));
}

}  // namespace fastgan::nn
