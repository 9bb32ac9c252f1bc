#include "doctest.h"
#include "fastgan/discriminator.hpp"
#include "fastgan/generator.hpp"
#include "fastgan/training/losses.hpp"
#include "support.hpp"

using namespace fastgan;
using testing::uniform;

namespace {

std::int64_t conv(std::int64_t cin, std::int64_t cout, std::int64_t k) { return cin * cout * k * k + cout; }
std::int64_t bn(std::int64_t c) { return 2 * c; }
std::int64_t up(std::int64_t cin, std::int64_t cout) { return conv(cin, 2 * cout, 3) + bn(2 * cout); }
std::int64_t down(std::int64_t cin, std::int64_t cout) {
  return conv(cin, cout, 4) + conv(cout, cout, 3) + conv(cin, cout, 1);
}
std::int64_t sle(std::int64_t c_low, std::int64_t c_high) {
  const std::int64_t mid = std::max<std::int64_t>(4, c_low / 8);
  return conv(c_low, mid, 4) + conv(mid, c_high, 1);
}
std::int64_t decoder(std::int64_t cin) {
  return up(cin, 256) + up(256, 128) + up(128, 128) + up(128, 64) + conv(64, 3, 3);
}

}  // namespace

TEST_CASE("model config presets") {
  const auto c256 = ModelConfig::preset(256);
  CHECK(c256.sle_pairs == std::vector<SlePair>{{8, 128}, {16, 256}});
  const auto c1024 = ModelConfig::preset(1024);
  CHECK(c1024.sle_pairs == std::vector<SlePair>{{8, 128}, {16, 256}, {32, 512}});
  CHECK(c1024.g_ch(512) == 3);
  CHECK(c1024.g_ch(1024) == 3);
  CHECK(c1024.d_ch(512) == 3);
  CHECK(c1024.d_stem_convs() == 2);
  CHECK(ModelConfig::preset(1024, 0.25).g_ch(1024) == 3);
  CHECK_THROWS_AS(ModelConfig::preset(300), ConfigError);
  CHECK_THROWS_AS(ModelConfig::preset(256, 0.0), ConfigError);
  auto bad = c1024;
  bad.g_channels[512] = 8;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c256;
  bad.sle_pairs.push_back({32, 16});
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("256 model parameter count matches manual summation") {
  const auto cfg = ModelConfig::preset(256);
  Rng rng(0);
  auto g = GeneratorParams::init(cfg, rng);
  auto d = DiscriminatorParams::init(cfg, rng);

  std::int64_t g_manual = conv(256, 2 * 256 * 16, 1) + bn(2 * 256);
  g_manual += up(256, 512) + up(512, 256) + up(256, 128) + up(128, 128) + up(128, 64) + up(64, 32);
  g_manual += sle(512, 64) + sle(256, 32);  // 8->128, 16->256
  g_manual += conv(32, 3, 3);
  CHECK(nn::count_params(g.collect().params) == g_manual);

  std::int64_t d_manual = conv(3, 64, 4);  // 256 -> 128
  d_manual += down(64, 128) + down(128, 256) + down(256, 512) + down(512, 1024);
  d_manual += conv(1024, 256, 4) + conv(256, 1, 1);
  d_manual += decoder(512) + decoder(1024);
  CHECK(nn::count_params(d.collect().params) == d_manual);
  MESSAGE("256 model: G " << g_manual << ", D " << d_manual);
}

TEST_CASE("generator forward") {
  Rng rng(1);
  SUBCASE("256 shape and range") {
    const auto cfg = ModelConfig::preset(256, 0.125);
    auto g = GeneratorParams::init(cfg, rng);
    const auto out = g_forward(sample_latent(4, cfg.latent_dim, rng), g, cfg, false);
    CHECK(out.image.shape() == Shape{4, 3, 256, 256});
    CHECK(testing::max_abs(out.image) <= 1.0);
    CHECK(out.x_low.size() == 2);
  }
  SUBCASE("self override is a no-op; foreign 32->512 override is not") {
    const auto cfg = ModelConfig::preset(1024, 0.0625);
    auto g = GeneratorParams::init(cfg, rng);
    const Tensor z = sample_latent(1, cfg.latent_dim, rng);
    const auto plain = g_forward(z, g, cfg, false);
    const auto again = g_forward(z, g, cfg, false);
    CHECK(testing::bitwise_equal(plain.image, again.image));
    SleOverride own(plain.x_low.begin(), plain.x_low.end());
    CHECK(testing::bitwise_equal(g_forward(z, g, cfg, false, &own).image, plain.image));

    const auto other = g_forward(sample_latent(1, cfg.latent_dim, rng), g, cfg, false);
    SleOverride swap = {{SlePair{32, 512}, other.x_low.at({32, 512})}};
    const Tensor mixed = g_forward(z, g, cfg, false, &swap).image;
    CHECK(testing::max_abs_diff(mixed, plain.image) > 0);
  }
  SUBCASE("override errors") {
    const auto cfg = ModelConfig::preset(64, 0.0625);
    auto g = GeneratorParams::init(cfg, rng);
    const Tensor z = sample_latent(2, cfg.latent_dim, rng);
    SleOverride wrong_shape = {{SlePair{4, 64}, Tensor({2, 1, 4, 4})}};
    CHECK_THROWS_AS(g_forward(z, g, cfg, false, &wrong_shape), ShapeError);
    SleOverride unknown = {{SlePair{8, 32}, Tensor({2, 1, 8, 8})}};
    CHECK_THROWS_AS(g_forward(z, g, cfg, false, &unknown), ConfigError);
    CHECK_THROWS_AS(g_forward(Tensor({2, 7}), g, cfg, false), ShapeError);
  }
  SUBCASE("every G parameter gets gradient from the G loss") {
    const auto cfg = ModelConfig::preset(64, 0.0625);
    auto g = GeneratorParams::init(cfg, rng);
    auto d = DiscriminatorParams::init(cfg, rng);
    const auto params = g.collect().params;
    Graph graph;
    const Tensor fake = g_forward(sample_latent(4, cfg.latent_dim, rng), g, cfg, true).image;
    graph.backward(train::g_loss(d_forward(fake, d, false).logits));
    for (const auto& p : params) {
      INFO(p.name);
      CHECK(testing::max_abs(p.tensor.grad()) > 0);
    }
  }
  SUBCASE("clone is deep") {
    const auto cfg = ModelConfig::preset(64, 0.0625);
    auto g = GeneratorParams::init(cfg, rng);
    auto c = g.clone();
    c.to_rgb.weight.data()[0] += 1;
    CHECK(c.to_rgb.weight.data()[0] != g.to_rgb.weight.data()[0]);
  }
}

TEST_CASE("discriminator") {
  Rng rng(2);
  SUBCASE("256 shapes") {
    const auto cfg = ModelConfig::preset(256, 0.125);
    auto d = DiscriminatorParams::init(cfg, rng);
    const auto f = d_forward(uniform({2, 3, 256, 256}, rng), d, false);
    CHECK(f.logits.shape() == Shape{2, 1, 5, 5});
    CHECK(f.f1.shape() == Shape{2, cfg.d_ch(16), 16, 16});
    CHECK(f.f2.shape() == Shape{2, cfg.d_ch(8), 8, 8});
    CHECK_THROWS_AS(d_forward(Tensor({1, 3, 128, 128}), d, false), ShapeError);
  }
  SUBCASE("zero weights give constant logits equal to the head bias") {
    const auto cfg = ModelConfig::preset(64, 0.0625);
    auto d = DiscriminatorParams::init(cfg, rng);
    for (const auto& p : d.collect().params) std::ranges::fill(Tensor(p.tensor).data(), Real(0));
    d.head_out.bias.data()[0] = Real(0.3);
    const auto f = d_forward(uniform({2, 3, 64, 64}, rng), d, false);
    for (Real v : f.logits.data()) CHECK(v == doctest::Approx(0.3));
  }
  SUBCASE("eval forward is side-effect free") {
    const auto cfg = ModelConfig::preset(64, 0.0625);
    auto d = DiscriminatorParams::init(cfg, rng);
    const Tensor x = uniform({2, 3, 64, 64}, rng);
    const auto a = d_forward(x, d, false), b = d_forward(x, d, false);
    CHECK(testing::bitwise_equal(a.f1, b.f1));
    CHECK(testing::bitwise_equal(a.f2, b.f2));
    CHECK(testing::bitwise_equal(a.logits, b.logits));
  }
  SUBCASE("logit gradient reaches every input pixel") {
    const auto cfg = ModelConfig::preset(64, 0.0625);
    auto d = DiscriminatorParams::init(cfg, rng);
    Tensor x = uniform({1, 3, 64, 64}, rng).set_requires_grad(true);
    {
      Graph g;
      g.backward(ops::mean(d_forward(x, d, false).logits));
    }
    int dead = 0;
    for (int p = 0; p < 64 * 64; ++p) {
      double m = 0;
      for (int c = 0; c < 3; ++c) m += std::abs(x.grad()[static_cast<std::size_t>(c * 4096 + p)]);
      dead += m == 0;
    }
    CHECK(dead == 0);
  }
}

TEST_CASE("reconstruct") {
  Rng rng(3);
  const auto cfg = ModelConfig::preset(64, 0.0625);
  auto d = DiscriminatorParams::init(cfg, rng);
  const auto f = d_forward(uniform({2, 3, 64, 64}, rng), d, false);
  SUBCASE("shapes, range, crop validation") {
    const auto r = reconstruct(f, CropSpec{0, 0}, d, false);
    CHECK(r.part.shape() == Shape{2, 3, 128, 128});
    CHECK(r.full.shape() == Shape{2, 3, 128, 128});
    CHECK(testing::max_abs(r.part) <= 1.0);
    CHECK_THROWS_AS(reconstruct(f, CropSpec{9, 0}, d, false), ShapeError);
    CHECK_THROWS_AS(reconstruct(f, CropSpec{0, -1}, d, false), ShapeError);
    const std::vector<CropSpec> three(3);
    CHECK_THROWS_AS(reconstruct(f, three, d, false), ShapeError);
  }
  SUBCASE("crop (0,0) reads the top-left window") {
    DiscriminatorFeatures g = f;
    g.f1 = f.f1.clone();
    // Changing f1 outside the window leaves the part output untouched.
    for (int c = 0; c < g.f1.dim(1); ++c) g.f1.data()[static_cast<std::size_t>((c * 16 + 15) * 16 + 15)] += 5;
    CHECK(testing::bitwise_equal(reconstruct(g, CropSpec{0, 0}, d, false).part,
                                 reconstruct(f, CropSpec{0, 0}, d, false).part));
  }
  SUBCASE("crop (4,4) sensitivity is confined to the window") {
    DiscriminatorFeatures g;
    g.f1 = Tensor::zeros(f.f1.shape());
    g.f1.data()[0] = 1;  // spike at (0,0): outside the window
    g.f1.set_requires_grad(true);
    g.f2 = f.f2;
    {
      Graph graph;
      graph.backward(ops::sum(reconstruct(g, CropSpec{4, 4}, d, false).part));
    }
    const auto C = g.f1.dim(1);
    double inside = 0, outside = 0;
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t c = 0; c < C; ++c)
        for (int y = 0; y < 16; ++y)
          for (int x = 0; x < 16; ++x) {
            const double v = std::abs(g.f1.grad()[static_cast<std::size_t>(((n * C + c) * 16 + y) * 16 + x)]);
            (y >= 4 && y < 12 && x >= 4 && x < 12 ? inside : outside) += v;
          }
    CHECK(outside == 0.0);
    CHECK(inside > 0.0);
  }
}
