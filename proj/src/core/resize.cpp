#include "fastgan/resize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fastgan {
namespace {

struct Taps {
  std::vector<std::int64_t> first;  // first input index per output
  std::vector<std::vector<double>> weights;
};

Taps triangle_taps(std::int64_t in, std::int64_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double filterscale = std::max(scale, 1.0);
  const double support = filterscale;  // triangle support is 1 pixel
  Taps t;
  t.first.resize(static_cast<std::size_t>(out));
  t.weights.resize(static_cast<std::size_t>(out));
  for (std::int64_t o = 0; o < out; ++o) {
    const double center = (static_cast<double>(o) + 0.5) * scale;
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(center - support + 0.5));
    const auto hi = std::min<std::int64_t>(in, static_cast<std::int64_t>(center + support + 0.5));
    auto& w = t.weights[static_cast<std::size_t>(o)];
    double total = 0;
    for (std::int64_t i = lo; i < hi; ++i) {
      const double d = std::abs((static_cast<double>(i) - center + 0.5) / filterscale);
      const double k = d < 1.0 ? 1.0 - d : 0.0;
      w.push_back(k);
      total += k;
    }
    if (total > 0) {
      for (auto& k : w) k /= total;
    }
    t.first[static_cast<std::size_t>(o)] = lo;
  }
  return t;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
  if (x.ndim() != 4) throw ShapeError("resize_bilinear: expected [N,C,H,W], got " + shape_str(x.shape()));
  if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear: empty output size");
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H == out_h && W == out_w) return x.clone();
  const Taps th = triangle_taps(H, out_h);
  const Taps tw = triangle_taps(W, out_w);
  Tensor y({N, C, out_h, out_w});
  std::vector<double> rows(static_cast<std::size_t>(H * out_w));
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  for (std::int64_t p = 0; p < N * C; ++p) {
    const Real* src = xp + p * H * W;
    for (std::int64_t i = 0; i < H; ++i) {
      for (std::int64_t o = 0; o < out_w; ++o) {
        const auto& w = tw.weights[static_cast<std::size_t>(o)];
        const std::int64_t f = tw.first[static_cast<std::size_t>(o)];
        double s = 0;
        for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * src[i * W + f + static_cast<std::int64_t>(k)];
        rows[static_cast<std::size_t>(i * out_w + o)] = s;
      }
    }
    Real* dst = yp + p * out_h * out_w;
    for (std::int64_t o = 0; o < out_h; ++o) {
      const auto& w = th.weights[static_cast<std::size_t>(o)];
      const std::int64_t f = th.first[static_cast<std::size_t>(o)];
      for (std::int64_t j = 0; j < out_w; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < w.size(); ++k)
          s += w[k] * rows[static_cast<std::size_t>((f + static_cast<std::int64_t>(k)) * out_w + j)];
        dst[o * out_w + j] = static_cast<Real>(s);
      }
    }
  }
  return y;
}

}  // namespace fastgan
