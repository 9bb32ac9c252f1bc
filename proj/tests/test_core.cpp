#include <Eigen/Dense>

#include "doctest.h"
#include "fastgan/log.hpp"
#include "fastgan/resize.hpp"
#include "support.hpp"

using namespace fastgan;
using testing::uniform;

namespace {

double top_singular_value(const Tensor& w) {
  const auto rows = w.dim(0), cols = w.numel() / rows;
  Eigen::MatrixXd m(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) m(r, c) = w.data()[static_cast<std::size_t>(r * cols + c)];
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

// Direct-loop convolution oracle.
Tensor conv_loops(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const auto n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto co = w.dim(0), k = w.dim(2);
  const auto ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  Tensor y({n, co, ho, wo});
  for (std::int64_t a = 0; a < n; ++a)
    for (std::int64_t o = 0; o < co; ++o)
      for (std::int64_t i = 0; i < ho; ++i)
        for (std::int64_t j = 0; j < wo; ++j) {
          double s = b.defined() ? b.data()[o] : 0.0;
          for (std::int64_t c = 0; c < ci; ++c)
            for (std::int64_t u = 0; u < k; ++u)
              for (std::int64_t v = 0; v < k; ++v) {
                const auto yy = i * stride - pad + u, xx = j * stride - pad + v;
                if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
                s += static_cast<double>(x.data()[((a * ci + c) * h + yy) * wd + xx]) *
                     w.data()[((o * ci + c) * k + u) * k + v];
              }
          y.data()[((a * co + o) * ho + i) * wo + j] = static_cast<Real>(s);
        }
  return y;
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.dim(-1) == 3);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<Real>{1, 2, 3}), ShapeError);
  Tensor c = t.clone();
  c.data()[0] = 7;
  CHECK(t.data()[0] == doctest::Approx(1.5));
  CHECK_FALSE(c.same_storage(t));
  CHECK(Tensor::scalar(4).item() == 4);
  CHECK_THROWS_AS(t.item(), ShapeError);
}

TEST_CASE("backward contract") {
  SUBCASE("loss = sum(w * x) gives grad(w) == x") {
    Rng rng(1);
    Tensor x = uniform({5}, rng);
    Tensor w = uniform({5}, rng).set_requires_grad(true);
    Graph g;
    g.backward(ops::sum(ops::mul(w, x)));
    for (int i = 0; i < 5; ++i) CHECK(w.grad()[i] == x.data()[i]);
  }
  SUBCASE("second backward on a consumed graph is an error") {
    Tensor w = Tensor({3}, 1.0).set_requires_grad(true);
    Graph g;
    const Tensor loss = ops::sum(w);
    g.backward(loss);
    CHECK(g.consumed());
    CHECK_THROWS_AS(g.backward(loss), GraphError);
  }
  SUBCASE("non-scalar loss is rejected") {
    Tensor w = Tensor({3}, 1.0).set_requires_grad(true);
    Graph g;
    CHECK_THROWS_AS(g.backward(ops::scale(w, 2)), GraphError);
  }
  SUBCASE("no active graph") { CHECK_THROWS_AS(backward(Tensor::scalar(1)), GraphError); }
  SUBCASE("gradients accumulate over every use") {
    Tensor w = Tensor({2}, 3.0).set_requires_grad(true);
    Graph g;
    g.backward(ops::sum(ops::add(ops::mul(w, w), w)));  // d/dw (w^2 + w) = 2w + 1
    CHECK(w.grad()[0] == doctest::Approx(7));
  }
  SUBCASE("nothing recorded without a graph or under NoGradGuard") {
    Tensor w = Tensor({2}, 1.0).set_requires_grad(true);
    CHECK_FALSE(ops::scale(w, 2).requires_grad());
    Graph g;
    {
      NoGradGuard off;
      CHECK_FALSE(ops::scale(w, 2).requires_grad());
    }
    CHECK(ops::scale(w, 2).requires_grad());
    CHECK(g.size() == 1);
  }
}

TEST_CASE("conv2d examples") {
  const Tensor ones({1, 1, 3, 3}, 1.0);
  CHECK(ops::conv2d(ones, ones, Tensor::zeros({1}), 1, 0).item() == doctest::Approx(9.0));

  Rng rng(3);
  const Tensor x = uniform({2, 3, 6, 6}, rng);
  Tensor ident = Tensor::zeros({3, 3, 3, 3});
  for (int c = 0; c < 3; ++c) ident.data()[static_cast<std::size_t>(((c * 3 + c) * 3 + 1) * 3 + 1)] = 1;
  CHECK(testing::max_abs_diff(ops::conv2d(x, ident, Tensor(), 1, 1), x) == 0.0);

  CHECK_THROWS_AS(ops::conv2d(x, Tensor::zeros({4, 2, 3, 3}), Tensor(), 1, 1), ShapeError);
  CHECK_THROWS_AS(ops::conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), Tensor(), 1, 0),
                  ShapeError);
}

TEST_CASE("conv2d matches the direct-loop oracle") {
  struct Cfg { int cin, cout, k, stride, pad, hw; };
  for (const Cfg c : {Cfg{3, 5, 3, 1, 1, 9}, Cfg{2, 4, 4, 2, 1, 8}, Cfg{4, 3, 1, 1, 0, 5}, Cfg{3, 2, 4, 1, 0, 7}}) {
    Rng rng(static_cast<std::uint64_t>(c.k * 10 + c.stride));
    const Tensor x = uniform({2, c.cin, c.hw, c.hw}, rng), w = uniform({c.cout, c.cin, c.k, c.k}, rng),
                 b = uniform({c.cout}, rng);
    const Tensor y = ops::conv2d(x, w, b, c.stride, c.pad);
    CHECK(testing::max_abs_diff(y, conv_loops(x, w, b, c.stride, c.pad)) < 1e-5);
  }
}

TEST_CASE("conv2d is linear in x without bias") {
  Rng rng(5);
  const Tensor x1 = uniform({2, 3, 8, 8}, rng), x2 = uniform({2, 3, 8, 8}, rng), w = uniform({4, 3, 3, 3}, rng);
  const Real a = Real(0.7), b = Real(-1.3);
  const Tensor lhs = ops::conv2d(ops::add(ops::scale(x1, a), ops::scale(x2, b)), w, Tensor(), 1, 1);
  const Tensor rhs =
      ops::add(ops::scale(ops::conv2d(x1, w, Tensor(), 1, 1), a), ops::scale(ops::conv2d(x2, w, Tensor(), 1, 1), b));
  CHECK(testing::max_abs_diff(lhs, rhs) < 1e-5);
}

TEST_CASE("forward determinism") {
  Rng rng(11);
  const Tensor x = uniform({4, 8, 16, 16}, rng), w = uniform({16, 8, 3, 3}, rng), b = uniform({16}, rng);
  CHECK(testing::bitwise_equal(ops::conv2d(x, w, b, 1, 1), ops::conv2d(x, w, b, 1, 1)));
}

TEST_CASE("resampling") {
  const Tensor x({1, 1, 2, 2}, std::vector<Real>{1, 2, 3, 4});
  const Tensor up = ops::upsample_nearest2x(x);
  const std::vector<Real> expect = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  CHECK(std::ranges::equal(up.data(), expect));

  const Tensor pooled = ops::adaptive_avg_pool(Tensor({1, 2, 8, 8}, 1.0), 4);
  CHECK(pooled.shape() == Shape{1, 2, 4, 4});
  for (Real v : pooled.data()) CHECK(v == doctest::Approx(1.0));

  Rng rng(2);
  const Tensor r = uniform({2, 3, 16, 16}, rng);
  const Tensor p = ops::adaptive_avg_pool(r, 4);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          double s = 0;
          for (int u = 0; u < 4; ++u)
            for (int v = 0; v < 4; ++v) s += r.data()[static_cast<std::size_t>(((n * 3 + c) * 16 + i * 4 + u) * 16 + j * 4 + v)];
          CHECK(p.data()[static_cast<std::size_t>(((n * 3 + c) * 4 + i) * 4 + j)] == doctest::Approx(s / 16).epsilon(1e-6));
        }
  CHECK_THROWS_AS(ops::adaptive_avg_pool(Tensor({1, 1, 6, 6}), 4), ShapeError);
  CHECK(ops::avg_pool2x(Tensor({1, 1, 4, 4}, 2.0)).shape() == Shape{1, 1, 2, 2});
}

TEST_CASE("activations") {
  CHECK(ops::sigmoid(Tensor::scalar(0)).item() == doctest::Approx(0.5));
  CHECK(ops::leaky_relu(Tensor::scalar(-1)).item() == doctest::Approx(-0.1));
  CHECK(ops::leaky_relu(Tensor::scalar(2)).item() == doctest::Approx(2));
  Tensor ab = Tensor::zeros({1, 4, 2, 2});
  for (int i = 0; i < 8; ++i) ab.data()[static_cast<std::size_t>(i)] = 1;  // value half = 1, gate half = 0
  const Tensor gl = ops::glu(ab);
  for (Real v : gl.data()) CHECK(v == doctest::Approx(0.5));
  CHECK_THROWS_AS(ops::glu(Tensor::zeros({1, 3, 2, 2})), ShapeError);
}

TEST_CASE("batch_norm2d") {
  Rng rng(4);
  Tensor x({4, 2, 5, 5});
  rng.fill_normal(x.data(), 5.0, 2.0);
  const Tensor gamma({2}, 1.0), beta({2}, 0.0);
  auto st = ops::BatchNormState::init(2);
  const Tensor y = ops::batch_norm2d(x, gamma, beta, st, true);
  for (int c = 0; c < 2; ++c) {
    double s = 0, ss = 0;
    int m = 0;
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 25; ++i) {
        const double v = y.data()[static_cast<std::size_t>((n * 2 + c) * 25 + i)];
        s += v;
        ss += v * v;
        ++m;
      }
    CHECK(std::abs(s / m) < 1e-4);
    CHECK(std::abs(ss / m - 1.0) < 1e-3);  // eps = 1e-5 shrinks var slightly
  }
  CHECK(st.running_mean.data()[0] == doctest::Approx(0.5).epsilon(0.05));

  const Tensor g0({2}, 0.0), b3({2}, 3.0);
  const Tensor flat = ops::batch_norm2d(x, g0, b3, st, true);
  for (Real v : flat.data()) CHECK(v == doctest::Approx(3.0));
  CHECK_THROWS_AS(ops::batch_norm2d(Tensor::zeros({1, 2, 1, 1}), gamma, beta, st, true), ShapeError);
  CHECK_NOTHROW(ops::batch_norm2d(Tensor::zeros({1, 2, 1, 1}), gamma, beta, st, false));
  CHECK_NOTHROW(ops::batch_norm2d(Tensor::zeros({1, 2, 3, 3}), gamma, beta, st, true));
}

TEST_CASE("spectral_normalize") {
  Rng rng(9);
  SUBCASE("known spectrum diag(3,1)") {
    const Tensor w({2, 2}, std::vector<Real>{3, 0, 0, 1});
    auto st = ops::SpectralState::init(w, rng);
    const Tensor wn = ops::spectral_normalize(w, st, 5);
    CHECK(ops::spectral_sigma(w, st) == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(top_singular_value(wn) == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("sigma already 1 is a fixed point") {
    const Tensor w({2, 3}, std::vector<Real>{1, 0, 0, 0, Real(0.5), 0});
    auto st = ops::SpectralState::init(w, rng);
    CHECK(testing::max_abs_diff(ops::spectral_normalize(w, st, 5), w) < 1e-3);
  }
  SUBCASE("random 8x24 vs SVD oracle") {
    for (int s = 0; s < 10; ++s) {
      const Tensor w = uniform({8, 24}, rng);
      ops::SpectralState st{Tensor({8}), Tensor({24})};
      rng.fill_normal(st.u.data());
      rng.fill_normal(st.v.data());
      ops::spectral_normalize(w, st, 50);
      const double rel = std::abs(ops::spectral_sigma(w, st) - top_singular_value(w)) / top_singular_value(w);
      CHECK(rel < 1e-3);
    }
  }
  SUBCASE("zero weight clamps sigma") {
    log::set_level(log::Level::error);
    const Tensor w = Tensor::zeros({3, 4});
    auto st = ops::SpectralState::init(Tensor({3, 4}, 1.0), rng);
    const Tensor wn = ops::spectral_normalize(w, st, 1);
    for (Real v : wn.data()) CHECK(std::isfinite(v));
    log::set_level(log::Level::info);
  }
}

TEST_CASE("per-sample ops") {
  Rng rng(6);
  const Tensor x = uniform({2, 3, 6, 6}, rng);
  const std::vector<int> zero = {0, 0};
  CHECK(testing::bitwise_equal(ops::translate(x, zero, zero), x));
  const std::vector<int> dy = {1, 0}, dx = {0, -2};
  const Tensor t = ops::translate(x, dy, dx);
  CHECK(t.data()[0] == 0);  // row 0 of sample 0 is filled with zeros
  CHECK(t.data()[6] == x.data()[0]);
  const Tensor c = ops::crop2d(x, 1, 2, 3, 4);
  CHECK(c.shape() == Shape{2, 3, 3, 4});
  CHECK(c.data()[0] == x.data()[6 + 2]);
  CHECK_THROWS_AS(ops::crop2d(x, 4, 0, 3, 3), ShapeError);
}

TEST_CASE("resize_bilinear identity and constants") {
  Rng rng(8);
  const Tensor x = uniform({1, 3, 16, 16}, rng);
  CHECK(testing::max_abs_diff(resize_bilinear(x, 16, 16), x) < 1e-6);
  const Tensor down = resize_bilinear(Tensor({1, 1, 13, 13}, 0.25), 7, 7);
  for (Real v : down.data()) CHECK(v == doctest::Approx(0.25));
  const Tensor up = resize_bilinear(Tensor({1, 1, 5, 5}, -0.5), 11, 11);
  for (Real v : up.data()) CHECK(v == doctest::Approx(-0.5));
}
