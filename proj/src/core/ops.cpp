#include "fastgan/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "fastgan/log.hpp"
#include "fastgan/parallel.hpp"

namespace fastgan::ops {
namespace {

using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using ConstMapR = Eigen::Map<const MatR>;

using detail::should_record;

void require_4d(const Tensor& x, const char* op) {
  if (x.ndim() != 4) {
    throw ShapeError(std::string(op) + ": expected a 4-D [N,C,H,W] tensor, got " +
                     shape_str(x.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_len(std::size_t len, std::int64_t n, const char* op) {
  if (static_cast<std::int64_t>(len) != n) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(n) +
                     " per-sample values, got " + std::to_string(len));
  }
}

Tensor make_output(Shape shape) { return Tensor(std::move(shape)); }

// Marks `out` as differentiable and records `fn` when recording is needed.
template <typename Fn>
void maybe_record(Tensor& out, bool record, Fn&& fn) {
  if (!record) return;
  out.set_requires_grad(true);
  Graph::active()->record(std::forward<Fn>(fn));
}

struct ConvGeom {
  std::int64_t n, cin, h, w, cout, kh, kw, ho, wo;
  int stride, pad;
  std::int64_t k() const { return cin * kh * kw; }
  std::int64_t p() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Valid output-column range [lo, hi) for kernel column offset `kx`.
void valid_range(std::int64_t in, std::int64_t out, int stride, int pad, std::int64_t k,
                 std::int64_t& lo, std::int64_t& hi) {
  // i = o*stride - pad + k in [0, in)
  lo = 0;
  while (lo < out && lo * stride - pad + k < 0) ++lo;
  hi = out;
  while (hi > lo && (hi - 1) * stride - pad + k >= in) --hi;
}

void im2col(const Real* x, const ConvGeom& g, Real* col) {
  const std::int64_t P = g.p();
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        Real* dst = col + ((c * g.kh + ky) * g.kw + kx) * P;
        std::int64_t lo, hi;
        valid_range(g.w, g.wo, g.stride, g.pad, kx, lo, hi);
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          Real* row = dst + oy * g.wo;
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) {
            std::fill(row, row + g.wo, Real(0));
            continue;
          }
          const Real* src = x + (c * g.h + iy) * g.w;
          std::fill(row, row + lo, Real(0));
          if (g.stride == 1) {
            const std::int64_t off = lo - g.pad + kx;
            if (hi > lo) std::memcpy(row + lo, src + off, sizeof(Real) * (hi - lo));
          } else {
            for (std::int64_t ox = lo; ox < hi; ++ox) row[ox] = src[ox * g.stride - g.pad + kx];
          }
          std::fill(row + std::max(lo, hi), row + g.wo, Real(0));
        }
      }
    }
  }
}

void col2im_add(const Real* col, const ConvGeom& g, Real* x) {
  const std::int64_t P = g.p();
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const Real* src = col + ((c * g.kh + ky) * g.kw + kx) * P;
        std::int64_t lo, hi;
        valid_range(g.w, g.wo, g.stride, g.pad, kx, lo, hi);
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          Real* dst = x + (c * g.h + iy) * g.w;
          const Real* row = src + oy * g.wo;
          for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox * g.stride - g.pad + kx] += row[ox];
        }
      }
    }
  }
}

std::vector<Real>& scratch() {
  thread_local std::vector<Real> buf;
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  require_4d(x, "conv2d");
  if (w.ndim() != 4) throw ShapeError("conv2d: weight must be 4-D, got " + shape_str(w.shape()));
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: invalid stride/pad");
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), 0, 0, stride, pad};
  if (w.dim(1) != g.cin) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " has " + std::to_string(g.cin) +
                     " channels but weight " + shape_str(w.shape()) + " expects " +
                     std::to_string(w.dim(1)));
  }
  if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw) {
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
                     shape_str(x.shape()));
  }
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != g.cout)) {
    throw ShapeError("conv2d: bias " + shape_str(b.shape()) + " does not match " +
                     std::to_string(g.cout) + " output channels");
  }
  g.ho = (g.h + 2 * pad - g.kh) / stride + 1;
  g.wo = (g.w + 2 * pad - g.kw) / stride + 1;

  Tensor y = make_output({g.n, g.cout, g.ho, g.wo});
  const Real* xp = x.ptr();
  const Real* bp = b.defined() ? b.ptr() : nullptr;
  Real* yp = y.ptr();
  const ConstMapR wm(w.ptr(), g.cout, g.k());
  const std::int64_t in_stride = g.cin * g.h * g.w;
  const std::int64_t out_stride = g.cout * g.p();

  parallel_for(g.n, [&](std::int64_t n) {
    MapR yn(yp + n * out_stride, g.cout, g.p());
    if (g.pointwise()) {
      yn.noalias() = wm * ConstMapR(xp + n * in_stride, g.k(), g.p());
    } else {
      auto& col = scratch();
      col.resize(static_cast<std::size_t>(g.k() * g.p()));
      im2col(xp + n * in_stride, g, col.data());
      yn.noalias() = wm * ConstMapR(col.data(), g.k(), g.p());
    }
    if (bp) {
      for (std::int64_t c = 0; c < g.cout; ++c) yn.row(c).array() += bp[c];
    }
  });
  detail::check_finite(y, "conv2d");

  maybe_record(y, should_record({&x, &w, &b}), [x, w, b, y, g]() mutable {
    if (!y.has_grad()) return;
    const Real* gy = y.grad().data();
    const Real* xp = x.ptr();
    const std::int64_t in_stride = g.cin * g.h * g.w;
    const std::int64_t out_stride = g.cout * g.p();
    const ConstMapR wm(w.ptr(), g.cout, g.k());

    if (b.defined() && b.requires_grad()) {
      auto gb = b.grad();
      for (std::int64_t n = 0; n < g.n; ++n) {
        for (std::int64_t c = 0; c < g.cout; ++c) {
          const Real* row = gy + n * out_stride + c * g.p();
          double s = 0;
          for (std::int64_t i = 0; i < g.p(); ++i) s += row[i];
          gb[c] += static_cast<Real>(s);
        }
      }
    }

    if (w.requires_grad()) {
      // Contiguous sample chunks per thread, reduced in chunk order.
      const std::int64_t chunks = std::min<std::int64_t>(thread_count(), g.n);
      std::vector<MatR> partial(static_cast<std::size_t>(chunks));
      parallel_for(chunks, [&](std::int64_t t) {
        MatR& acc = partial[static_cast<std::size_t>(t)];
        acc = MatR::Zero(g.cout, g.k());
        const std::int64_t begin = g.n * t / chunks, end = g.n * (t + 1) / chunks;
        for (std::int64_t n = begin; n < end; ++n) {
          const ConstMapR gyn(gy + n * out_stride, g.cout, g.p());
          if (g.pointwise()) {
            acc.noalias() += gyn * ConstMapR(xp + n * in_stride, g.k(), g.p()).transpose();
          } else {
            auto& col = scratch();
            col.resize(static_cast<std::size_t>(g.k() * g.p()));
            im2col(xp + n * in_stride, g, col.data());
            acc.noalias() += gyn * ConstMapR(col.data(), g.k(), g.p()).transpose();
          }
        }
      });
      MapR gw(w.grad().data(), g.cout, g.k());
      for (const auto& acc : partial) gw += acc;
    }

    if (x.requires_grad()) {
      Real* gx = x.grad().data();
      parallel_for(g.n, [&](std::int64_t n) {
        const ConstMapR gyn(gy + n * out_stride, g.cout, g.p());
        if (g.pointwise()) {
          MapR(gx + n * in_stride, g.k(), g.p()).noalias() += wm.transpose() * gyn;
        } else {
          auto& col = scratch();
          col.resize(static_cast<std::size_t>(g.k() * g.p()));
          MapR(col.data(), g.k(), g.p()).noalias() = wm.transpose() * gyn;
          col2im_add(col.data(), g, gx + n * in_stride);
        }
      });
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Resampling

Tensor upsample_nearest2x(const Tensor& x) {
  require_4d(x, "upsample_nearest2x");
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y = make_output({N, C, 2 * H, 2 * W});
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  for (std::int64_t p = 0; p < N * C; ++p) {
    for (std::int64_t i = 0; i < 2 * H; ++i) {
      const Real* src = xp + (p * H + i / 2) * W;
      Real* dst = yp + (p * 2 * H + i) * 2 * W;
      for (std::int64_t j = 0; j < 2 * W; ++j) dst[j] = src[j / 2];
    }
  }
  maybe_record(y, should_record({&x}), [x, y, N, C, H, W]() mutable {
    if (!y.has_grad()) return;
    const Real* gy = y.grad().data();
    Real* gx = x.grad().data();
    for (std::int64_t p = 0; p < N * C; ++p) {
      for (std::int64_t i = 0; i < 2 * H; ++i) {
        Real* dst = gx + (p * H + i / 2) * W;
        const Real* src = gy + (p * 2 * H + i) * 2 * W;
        for (std::int64_t j = 0; j < 2 * W; ++j) dst[j / 2] += src[j];
      }
    }
  });
  return y;
}

Tensor adaptive_avg_pool(const Tensor& x, int out_hw) {
  require_4d(x, "adaptive_avg_pool");
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (out_hw < 1 || H % out_hw != 0 || W % out_hw != 0) {
    throw ShapeError("adaptive_avg_pool: input " + shape_str(x.shape()) +
                     " not divisible into " + std::to_string(out_hw) + "x" +
                     std::to_string(out_hw) + " blocks");
  }
  const std::int64_t bh = H / out_hw, bw = W / out_hw;
  const Real inv = Real(1) / static_cast<Real>(bh * bw);
  Tensor y = make_output({N, C, out_hw, out_hw});
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  for (std::int64_t p = 0; p < N * C; ++p) {
    for (std::int64_t oi = 0; oi < out_hw; ++oi) {
      for (std::int64_t oj = 0; oj < out_hw; ++oj) {
        Real s = 0;
        for (std::int64_t i = 0; i < bh; ++i) {
          const Real* row = xp + (p * H + oi * bh + i) * W + oj * bw;
          for (std::int64_t j = 0; j < bw; ++j) s += row[j];
        }
        yp[(p * out_hw + oi) * out_hw + oj] = s * inv;
      }
    }
  }
  maybe_record(y, should_record({&x}), [x, y, N, C, H, W, bh, bw, out_hw, inv]() mutable {
    if (!y.has_grad()) return;
    const Real* gy = y.grad().data();
    Real* gx = x.grad().data();
    for (std::int64_t p = 0; p < N * C; ++p) {
      for (std::int64_t i = 0; i < H; ++i) {
        for (std::int64_t j = 0; j < W; ++j) {
          gx[(p * H + i) * W + j] += gy[(p * out_hw + i / bh) * out_hw + j / bw] * inv;
        }
      }
    }
  });
  return y;
}

Tensor avg_pool2x(const Tensor& x) {
  require_4d(x, "avg_pool2x");
  if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw ShapeError("avg_pool2x: odd spatial size " + shape_str(x.shape()));
  }
  if (x.dim(2) != x.dim(3)) {
    // Square maps only; adaptive pooling takes a single output size.
    throw ShapeError("avg_pool2x: non-square input " + shape_str(x.shape()));
  }
  return adaptive_avg_pool(x, static_cast<int>(x.dim(2) / 2));
}

// ---------------------------------------------------------------------------
// Pointwise activations

namespace {

// y = f(x) elementwise; dfn(x, y) gives dy/dx.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* name, Fwd fwd, Deriv dfn) {
  Tensor y = make_output(x.shape());
  const auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fwd(xs[i]);
  detail::check_finite(y, name);
  maybe_record(y, should_record({&x}), [x, y, dfn]() mutable {
    if (!y.has_grad()) return;
    const auto gy = y.grad();
    const auto xs = x.data();
    const auto ys = y.data();
    auto gx = x.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * dfn(xs[i], ys[i]);
  });
  return y;
}

Real sigmoid_scalar(Real v) {
  // Split form stays finite for large |v|.
  if (v >= 0) return Real(1) / (Real(1) + std::exp(-v));
  const Real e = std::exp(v);
  return e / (Real(1) + e);
}

}  // namespace

Tensor leaky_relu(const Tensor& x, Real slope) {
  return unary(
      x, "leaky_relu", [slope](Real v) { return v > 0 ? v : v * slope; },
      [slope](Real v, Real) { return v > 0 ? Real(1) : slope; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](Real v) { return v > 0 ? v : Real(0); },
      [](Real v, Real) { return v > 0 ? Real(1) : Real(0); });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", sigmoid_scalar, [](Real, Real y) { return y * (Real(1) - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](Real v) { return std::tanh(v); },
      [](Real, Real y) { return Real(1) - y * y; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](Real v) { return std::abs(v); },
      [](Real v, Real) { return v > 0 ? Real(1) : (v < 0 ? Real(-1) : Real(0)); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](Real v) { return v * v; }, [](Real v, Real) { return Real(2) * v; });
}

Tensor scale(const Tensor& x, Real factor) {
  return unary(
      x, "scale", [factor](Real v) { return v * factor; },
      [factor](Real, Real) { return factor; });
}

Tensor add_scalar(const Tensor& x, Real value) {
  return unary(
      x, "add_scalar", [value](Real v) { return v + value; }, [](Real, Real) { return Real(1); });
}

Tensor glu(const Tensor& x) {
  require_4d(x, "glu");
  const auto N = x.dim(0), C2 = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (C2 % 2 != 0) throw ShapeError("glu: odd channel count in " + shape_str(x.shape()));
  const std::int64_t C = C2 / 2, plane = H * W;
  Tensor y = make_output({N, C, H, W});
  Tensor gate = make_output({N, C, H, W});
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  Real* sp = gate.ptr();
  for (std::int64_t n = 0; n < N; ++n) {
    const Real* a = xp + n * C2 * plane;
    const Real* b = a + C * plane;
    for (std::int64_t i = 0; i < C * plane; ++i) {
      const Real s = sigmoid_scalar(b[i]);
      sp[n * C * plane + i] = s;
      yp[n * C * plane + i] = a[i] * s;
    }
  }
  maybe_record(y, should_record({&x}), [x, y, gate, N, C, plane]() mutable {
    if (!y.has_grad()) return;
    const Real* gy = y.grad().data();
    const Real* xp = x.ptr();
    const Real* sp = gate.ptr();
    Real* gx = x.grad().data();
    for (std::int64_t n = 0; n < N; ++n) {
      const Real* a = xp + n * 2 * C * plane;
      Real* ga = gx + n * 2 * C * plane;
      Real* gb = ga + C * plane;
      for (std::int64_t i = 0; i < C * plane; ++i) {
        const std::int64_t k = n * C * plane + i;
        const Real s = sp[k];
        ga[i] += gy[k] * s;
        gb[i] += gy[k] * a[i] * s * (Real(1) - s);
      }
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Batch normalization

BatchNormState BatchNormState::init(std::int64_t channels) {
  return {Tensor::zeros({channels}), Tensor::full({channels}, Real(1))};
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    BatchNormState& state, bool training) {
  require_4d(x, "batch_norm2d");
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Shape ch{C};
  if (gamma.shape() != ch || beta.shape() != ch || state.running_mean.shape() != ch ||
      state.running_var.shape() != ch) {
    throw ShapeError("batch_norm2d: parameters do not match " + std::to_string(C) +
                     " channels of " + shape_str(x.shape()));
  }
  if (training && N * H * W < 2) {
    throw ShapeError("batch_norm2d: training mode needs more than one value per channel, got " +
                     shape_str(x.shape()));
  }
  const std::int64_t plane = H * W;
  const double M = static_cast<double>(N * plane);
  Tensor y = make_output(x.shape());
  Tensor xhat = make_output(x.shape());
  std::vector<Real> invstd(static_cast<std::size_t>(C));
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  Real* hp = xhat.ptr();
  auto rm = state.running_mean.data();
  auto rv = state.running_var.data();

  for (std::int64_t c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double s = 0;
      for (std::int64_t n = 0; n < N; ++n) {
        const Real* p = xp + (n * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) s += p[i];
      }
      mean = s / M;
      double ss = 0;
      for (std::int64_t n = 0; n < N; ++n) {
        const Real* p = xp + (n * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / M;
      rm[c] = static_cast<Real>((1 - kBatchNormMomentum) * rm[c] + kBatchNormMomentum * mean);
      rv[c] = static_cast<Real>((1 - kBatchNormMomentum) * rv[c] +
                                kBatchNormMomentum * var * M / (M - 1));
    } else {
      mean = rm[c];
      var = rv[c];
    }
    const double is = 1.0 / std::sqrt(var + kBatchNormEps);
    invstd[static_cast<std::size_t>(c)] = static_cast<Real>(is);
    const Real g = gamma.data()[c], bt = beta.data()[c];
    for (std::int64_t n = 0; n < N; ++n) {
      const std::int64_t off = (n * C + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const Real h = static_cast<Real>((xp[off + i] - mean) * is);
        hp[off + i] = h;
        yp[off + i] = g * h + bt;
      }
    }
  }
  detail::check_finite(y, "batch_norm2d");

  maybe_record(y, should_record({&x, &gamma, &beta}),
               [x, gamma, beta, y, xhat, invstd, training, N, C, plane, M]() mutable {
                 if (!y.has_grad()) return;
                 const Real* gy = y.grad().data();
                 const Real* hp = xhat.ptr();
                 for (std::int64_t c = 0; c < C; ++c) {
                   double sum_dy = 0, sum_dy_h = 0;
                   for (std::int64_t n = 0; n < N; ++n) {
                     const std::int64_t off = (n * C + c) * plane;
                     for (std::int64_t i = 0; i < plane; ++i) {
                       sum_dy += gy[off + i];
                       sum_dy_h += static_cast<double>(gy[off + i]) * hp[off + i];
                     }
                   }
                   if (gamma.requires_grad()) gamma.grad()[c] += static_cast<Real>(sum_dy_h);
                   if (beta.requires_grad()) beta.grad()[c] += static_cast<Real>(sum_dy);
                   if (!x.requires_grad()) continue;
                   Real* gx = x.grad().data();
                   const double g = gamma.data()[c];
                   const double is = invstd[static_cast<std::size_t>(c)];
                   for (std::int64_t n = 0; n < N; ++n) {
                     const std::int64_t off = (n * C + c) * plane;
                     for (std::int64_t i = 0; i < plane; ++i) {
                       if (training) {
                         gx[off + i] += static_cast<Real>(
                             g * is / M * (M * gy[off + i] - sum_dy - hp[off + i] * sum_dy_h));
                       } else {
                         gx[off + i] += static_cast<Real>(g * is * gy[off + i]);
                       }
                     }
                   }
                 }
               });
  return y;
}

// ---------------------------------------------------------------------------
// Spectral normalization

namespace {

void normalize_into(std::vector<double>& v, std::span<Real> out) {
  double nrm = 0;
  for (double a : v) nrm += a * a;
  nrm = std::max(std::sqrt(nrm), kSpectralEps);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<Real>(v[i] / nrm);
}

void check_spectral_shapes(const Tensor& w, const SpectralState& st) {
  const std::int64_t rows = w.dim(0), cols = w.numel() / rows;
  if (st.u.numel() != rows || st.v.numel() != cols) {
    throw ShapeError("spectral_normalize: power-iteration vectors do not match weight " +
                     shape_str(w.shape()));
  }
}

double sigma_of(const Real* w, std::int64_t rows, std::int64_t cols, const Real* u,
                const Real* v) {
  double s = 0;
  for (std::int64_t r = 0; r < rows; ++r) {
    double t = 0;
    for (std::int64_t c = 0; c < cols; ++c) t += static_cast<double>(w[r * cols + c]) * v[c];
    s += u[r] * t;
  }
  return s;
}

}  // namespace

SpectralState SpectralState::init(const Tensor& w, Rng& rng) {
  const std::int64_t rows = w.dim(0), cols = w.numel() / rows;
  SpectralState st{Tensor({rows}), Tensor({cols})};
  rng.fill_normal(st.u.data());
  std::vector<double> tmp(st.u.data().begin(), st.u.data().end());
  normalize_into(tmp, st.u.data());
  tmp.assign(static_cast<std::size_t>(cols), 0.0);
  const Real* wp = w.ptr();
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) tmp[c] += static_cast<double>(wp[r * cols + c]) * st.u.data()[r];
  normalize_into(tmp, st.v.data());
  NoGradGuard off;
  spectral_normalize(w, st, kSpectralInitIters);
  return st;
}

double spectral_sigma(const Tensor& w, const SpectralState& st) {
  check_spectral_shapes(w, st);
  const std::int64_t rows = w.dim(0), cols = w.numel() / rows;
  return sigma_of(w.ptr(), rows, cols, st.u.ptr(), st.v.ptr());
}

Tensor spectral_normalize(const Tensor& w, SpectralState& st, int iters) {
  if (w.ndim() < 2) throw ShapeError("spectral_normalize: weight must be at least 2-D");
  check_spectral_shapes(w, st);
  const std::int64_t rows = w.dim(0), cols = w.numel() / rows;
  const Real* wp = w.ptr();
  auto u = st.u.data();
  auto v = st.v.data();
  std::vector<double> tv(static_cast<std::size_t>(cols)), tu(static_cast<std::size_t>(rows));
  for (int it = 0; it < iters; ++it) {
    std::fill(tv.begin(), tv.end(), 0.0);
    for (std::int64_t r = 0; r < rows; ++r) {
      const double ur = u[r];
      for (std::int64_t c = 0; c < cols; ++c) tv[c] += wp[r * cols + c] * ur;
    }
    normalize_into(tv, v);
    for (std::int64_t r = 0; r < rows; ++r) {
      double s = 0;
      for (std::int64_t c = 0; c < cols; ++c) s += static_cast<double>(wp[r * cols + c]) * v[c];
      tu[r] = s;
    }
    normalize_into(tu, u);
  }
  double sigma = sigma_of(wp, rows, cols, u.data(), v.data());
  const bool clamped = sigma < kSpectralEps;
  if (clamped) {
    log::warn("spectral_normalize: degenerate weight {} (sigma={}), clamping to {}",
              shape_str(w.shape()), sigma, kSpectralEps);
    sigma = kSpectralEps;
  }
  Tensor y = make_output(w.shape());
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = static_cast<Real>(wp[i] / sigma);

  Tensor u_snap = st.u.clone(), v_snap = st.v.clone();
  maybe_record(y, should_record({&w}), [w, y, u_snap, v_snap, sigma, clamped, rows, cols]() mutable {
    if (!y.has_grad()) return;
    const auto gy = y.grad();
    const auto ws = w.data();
    auto gw = w.grad();
    double dot = 0;
    for (std::size_t i = 0; i < gy.size(); ++i) dot += static_cast<double>(gy[i]) * ws[i];
    const double k = clamped ? 0.0 : dot / (sigma * sigma);
    const Real* u = u_snap.ptr();
    const Real* v = v_snap.ptr();
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t c = 0; c < cols; ++c) {
        const std::int64_t i = r * cols + c;
        gw[i] += static_cast<Real>(gy[i] / sigma - k * u[r] * v[c]);
      }
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Elementwise binary and reductions

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor y = make_output(a.shape());
  auto ys = y.data();
  const auto as = a.data(), bs = b.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = as[i] + bs[i];
  maybe_record(y, should_record({&a, &b}), [a, b, y]() mutable {
    if (!y.has_grad()) return;
    const auto gy = y.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
    }
  });
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor y = make_output(a.shape());
  auto ys = y.data();
  const auto as = a.data(), bs = b.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = as[i] - bs[i];
  maybe_record(y, should_record({&a, &b}), [a, b, y]() mutable {
    if (!y.has_grad()) return;
    const auto gy = y.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
    }
  });
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor y = make_output(a.shape());
  auto ys = y.data();
  const auto as = a.data(), bs = b.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = as[i] * bs[i];
  maybe_record(y, should_record({&a, &b}), [a, b, y]() mutable {
    if (!y.has_grad()) return;
    const auto gy = y.grad();
    const auto as = a.data(), bs = b.data();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bs[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * as[i];
    }
  });
  return y;
}

Tensor sum(const Tensor& x) {
  double s = 0;
  for (Real v : x.data()) s += v;
  Tensor y = Tensor::scalar(static_cast<Real>(s));
  maybe_record(y, should_record({&x}), [x, y]() mutable {
    if (!y.has_grad()) return;
    const Real g = y.grad()[0];
    for (auto& v : x.grad()) v += g;
  });
  return y;
}

Tensor mean(const Tensor& x) {
  const auto n = x.numel();
  if (n == 0) throw ShapeError("mean of empty tensor");
  double s = 0;
  for (Real v : x.data()) s += v;
  Tensor y = Tensor::scalar(static_cast<Real>(s / static_cast<double>(n)));
  maybe_record(y, should_record({&x}), [x, y, n]() mutable {
    if (!y.has_grad()) return;
    const Real g = y.grad()[0] / static_cast<Real>(n);
    for (auto& v : x.grad()) v += g;
  });
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor y(std::move(shape), std::vector<Real>(x.data().begin(), x.data().end()));
  maybe_record(y, should_record({&x}), [x, y]() mutable {
    if (!y.has_grad()) return;
    const auto gy = y.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
  return y;
}

Tensor crop2d_per_sample(const Tensor& x, std::span<const std::int64_t> top,
                         std::span<const std::int64_t> left, std::int64_t h, std::int64_t w) {
  require_4d(x, "crop2d");
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require_len(top.size(), N, "crop2d");
  require_len(left.size(), N, "crop2d");
  std::vector<std::int64_t> ty(top.begin(), top.end()), tx(left.begin(), left.end());
  for (std::int64_t n = 0; n < N; ++n) {
    if (ty[n] < 0 || tx[n] < 0 || h < 1 || w < 1 || ty[n] + h > H || tx[n] + w > W) {
      throw ShapeError("crop2d: window (" + std::to_string(ty[n]) + "," + std::to_string(tx[n]) +
                       ") " + std::to_string(h) + "x" + std::to_string(w) + " outside " +
                       shape_str(x.shape()));
    }
  }
  Tensor y = make_output({N, C, h, w});
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c) {
      const std::int64_t p = n * C + c;
      for (std::int64_t i = 0; i < h; ++i)
        std::memcpy(yp + (p * h + i) * w, xp + (p * H + ty[n] + i) * W + tx[n], sizeof(Real) * w);
    }
  maybe_record(y, should_record({&x}), [x, y, ty, tx, N, C, H, W, h, w]() mutable {
    if (!y.has_grad()) return;
    const Real* gy = y.grad().data();
    Real* gx = x.grad().data();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c) {
        const std::int64_t p = n * C + c;
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t j = 0; j < w; ++j)
            gx[(p * H + ty[n] + i) * W + tx[n] + j] += gy[(p * h + i) * w + j];
      }
  });
  return y;
}

Tensor crop2d(const Tensor& x, std::int64_t top, std::int64_t left, std::int64_t h,
              std::int64_t w) {
  require_4d(x, "crop2d");
  const std::vector<std::int64_t> ty(static_cast<std::size_t>(x.dim(0)), top);
  const std::vector<std::int64_t> tx(static_cast<std::size_t>(x.dim(0)), left);
  return crop2d_per_sample(x, ty, tx, h, w);
}

Tensor channel_scale(const Tensor& x, const Tensor& s) {
  require_4d(x, "channel_scale");
  const auto N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (s.shape() != Shape{N, C, 1, 1}) {
    throw ShapeError("channel_scale: scale " + shape_str(s.shape()) + " does not match input " +
                     shape_str(x.shape()));
  }
  Tensor y = make_output(x.shape());
  const Real* xp = x.ptr();
  const Real* sp = s.ptr();
  Real* yp = y.ptr();
  for (std::int64_t p = 0; p < N * C; ++p)
    for (std::int64_t i = 0; i < plane; ++i) yp[p * plane + i] = sp[p] * xp[p * plane + i];
  maybe_record(y, should_record({&x, &s}), [x, s, y, N, C, plane]() mutable {
    if (!y.has_grad()) return;
    const Real* gy = y.grad().data();
    if (x.requires_grad()) {
      Real* gx = x.grad().data();
      const Real* sp = s.ptr();
      for (std::int64_t p = 0; p < N * C; ++p)
        for (std::int64_t i = 0; i < plane; ++i) gx[p * plane + i] += sp[p] * gy[p * plane + i];
    }
    if (s.requires_grad()) {
      Real* gs = s.grad().data();
      const Real* xp = x.ptr();
      for (std::int64_t p = 0; p < N * C; ++p) {
        double acc = 0;
        for (std::int64_t i = 0; i < plane; ++i)
          acc += static_cast<double>(gy[p * plane + i]) * xp[p * plane + i];
        gs[p] += static_cast<Real>(acc);
      }
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Per-sample augmentation primitives

Tensor add_per_sample(const Tensor& x, std::span<const Real> shift) {
  require_4d(x, "add_per_sample");
  const auto N = x.dim(0), per = x.numel() / N;
  require_len(shift.size(), N, "add_per_sample");
  Tensor y = make_output(x.shape());
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t i = 0; i < per; ++i) yp[n * per + i] = xp[n * per + i] + shift[n];
  maybe_record(y, should_record({&x}), [x, y]() mutable {
    if (!y.has_grad()) return;
    const auto gy = y.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
  return y;
}

Tensor blend_channel_mean(const Tensor& x, std::span<const Real> factor) {
  require_4d(x, "blend_channel_mean");
  const auto N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  require_len(factor.size(), N, "blend_channel_mean");
  std::vector<Real> f(factor.begin(), factor.end());
  Tensor y = make_output(x.shape());
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t i = 0; i < plane; ++i) {
      Real m = 0;
      for (std::int64_t c = 0; c < C; ++c) m += xp[(n * C + c) * plane + i];
      m /= static_cast<Real>(C);
      for (std::int64_t c = 0; c < C; ++c) {
        const std::int64_t k = (n * C + c) * plane + i;
        yp[k] = (xp[k] - m) * f[n] + m;
      }
    }
  }
  maybe_record(y, should_record({&x}), [x, y, f, N, C, plane]() mutable {
    if (!y.has_grad()) return;
    const Real* gy = y.grad().data();
    Real* gx = x.grad().data();
    for (std::int64_t n = 0; n < N; ++n) {
      for (std::int64_t i = 0; i < plane; ++i) {
        Real g = 0;
        for (std::int64_t c = 0; c < C; ++c) g += gy[(n * C + c) * plane + i];
        const Real shared = (Real(1) - f[n]) * g / static_cast<Real>(C);
        for (std::int64_t c = 0; c < C; ++c) {
          const std::int64_t k = (n * C + c) * plane + i;
          gx[k] += f[n] * gy[k] + shared;
        }
      }
    }
  });
  return y;
}

Tensor blend_sample_mean(const Tensor& x, std::span<const Real> factor) {
  require_4d(x, "blend_sample_mean");
  const auto N = x.dim(0), per = x.numel() / N;
  require_len(factor.size(), N, "blend_sample_mean");
  std::vector<Real> f(factor.begin(), factor.end());
  Tensor y = make_output(x.shape());
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  for (std::int64_t n = 0; n < N; ++n) {
    double s = 0;
    for (std::int64_t i = 0; i < per; ++i) s += xp[n * per + i];
    const Real m = static_cast<Real>(s / static_cast<double>(per));
    for (std::int64_t i = 0; i < per; ++i) yp[n * per + i] = (xp[n * per + i] - m) * f[n] + m;
  }
  maybe_record(y, should_record({&x}), [x, y, f, N, per]() mutable {
    if (!y.has_grad()) return;
    const Real* gy = y.grad().data();
    Real* gx = x.grad().data();
    for (std::int64_t n = 0; n < N; ++n) {
      double g = 0;
      for (std::int64_t i = 0; i < per; ++i) g += gy[n * per + i];
      const Real shared = static_cast<Real>((1.0 - f[n]) * g / static_cast<double>(per));
      for (std::int64_t i = 0; i < per; ++i) gx[n * per + i] += f[n] * gy[n * per + i] + shared;
    }
  });
  return y;
}

Tensor translate(const Tensor& x, std::span<const int> dy, std::span<const int> dx) {
  require_4d(x, "translate");
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require_len(dy.size(), N, "translate");
  require_len(dx.size(), N, "translate");
  std::vector<int> sy(dy.begin(), dy.end()), sx(dx.begin(), dx.end());
  Tensor y = make_output(x.shape());
  const Real* xp = x.ptr();
  Real* yp = y.ptr();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t i = 0; i < H; ++i) {
        const std::int64_t si = i - sy[n];
        for (std::int64_t j = 0; j < W; ++j) {
          const std::int64_t sj = j - sx[n];
          const std::int64_t k = ((n * C + c) * H + i) * W + j;
          yp[k] = (si >= 0 && si < H && sj >= 0 && sj < W) ? xp[((n * C + c) * H + si) * W + sj]
                                                           : Real(0);
        }
      }
  maybe_record(y, should_record({&x}), [x, y, sy, sx, N, C, H, W]() mutable {
    if (!y.has_grad()) return;
    const Real* gy = y.grad().data();
    Real* gx = x.grad().data();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < H; ++i) {
          const std::int64_t si = i - sy[n];
          if (si < 0 || si >= H) continue;
          for (std::int64_t j = 0; j < W; ++j) {
            const std::int64_t sj = j - sx[n];
            if (sj < 0 || sj >= W) continue;
            gx[((n * C + c) * H + si) * W + sj] += gy[((n * C + c) * H + i) * W + j];
          }
        }
  });
  return y;
}

}  // namespace fastgan::ops
