#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fastgan/ops.hpp"
#include "fastgan/rng.hpp"
#include "fastgan/tensor.hpp"

namespace fastgan::testing {

inline Tensor uniform(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

// Uniform magnitudes in [gap, 1] with random sign; keeps samples away from
// the kink of piecewise-linear ops.
inline Tensor away_from_zero(const Shape& shape, Rng& rng, double gap = 0.05) {
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<Real>(rng.uniform(gap, 1.0) * (rng.bernoulli(0.5) ? 1 : -1));
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  }
  return m;
}

inline double max_abs(const Tensor& a) {
  double m = 0;
  for (Real v : a.data()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

inline double max_abs(std::span<const Real> a) {
  double m = 0;
  for (Real v : a) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::ranges::equal(a.data(), b.data());
}

// Norm-wise relative error between the autodiff gradient of
// L = sum(f() * r) (r random, fixed) and central differences, over a random
// subset of `coords` coordinates of every input. `smooth` disables the kink
// guard for functions without piecewise-linear parts.
inline double grad_rel_error(const std::function<Tensor()>& f, std::vector<Tensor> inputs, Rng& rng,
                             int coords = 24, bool smooth = false) {
  constexpr bool f64 = sizeof(Real) == 8;
  const double eps = f64 ? 1e-6 : 1e-2;
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor r;
  {
    Graph g;
    const Tensor y = f();
    r = uniform(y.shape(), rng);
    g.backward(ops::sum(ops::mul(y, r)));
  }
  auto loss = [&]() {
    NoGradGuard off;
    const Tensor y = f();
    double s = 0;
    for (std::size_t i = 0; i < y.data().size(); ++i) s += static_cast<double>(y.data()[i]) * r.data()[i];
    return s;
  };
  double diff2 = 0, a2 = 0, n2 = 0;
  for (auto& t : inputs) {
    const std::vector<Real> grad(t.grad().begin(), t.grad().end());
    const auto n = t.numel();
    for (int k = 0; k < std::min<std::int64_t>(coords, n); ++k) {
      const auto idx = static_cast<std::size_t>(coords >= n ? k : rng.uniform_int(0, n - 1));
      auto central = [&](double step) {
        const Real saved = t.data()[idx];
        t.data()[idx] = static_cast<Real>(saved + step);
        const double lp = loss();
        t.data()[idx] = static_cast<Real>(saved - step);
        const double lm = loss();
        t.data()[idx] = saved;
        // Effective step after rounding the perturbed inputs.
        const double h = static_cast<double>(static_cast<Real>(saved + step)) -
                         static_cast<double>(static_cast<Real>(saved - step));
        return (lp - lm) / h;
      };
      // A step straddling a kink (relu family, abs) is not a derivative
      // sample; detect it by disagreement with a 4x shorter step and shrink.
      double step = eps;
      double num = 0;
      if (smooth && !f64) {
        // Richardson extrapolation cancels the h^2 term, allowing a step
        // long enough to drown f32 rounding noise.
        num = (4 * central(eps) - central(2 * eps)) / 3;
      } else {
        num = central(step);
      }
      for (int tries = 0; tries < (smooth ? 0 : 3); ++tries) {
        const double finer = central(step / 4);
        if (std::abs(num - finer) <= 1e-2 * std::abs(num) + (f64 ? 1e-9 : 2e-4)) break;
        step /= 4;
        num = finer;
      }
      diff2 += (num - grad[idx]) * (num - grad[idx]);
      a2 += static_cast<double>(grad[idx]) * grad[idx];
      n2 += num * num;
    }
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  return std::sqrt(diff2) / denom;
}

// Writes `n` procedurally drawn RGB PNGs (distinct blobs on gradients).
void write_synthetic_images(const std::filesystem::path& dir, int n, int width, int height,
                            std::uint64_t seed);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace fastgan::testing
