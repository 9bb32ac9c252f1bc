#include "doctest.h"
#include "fastgan/analysis/analysis.hpp"
#include "support.hpp"

using namespace fastgan;
using namespace fastgan::analysis;
using testing::uniform;

namespace {

ModelConfig tiny() { return ModelConfig::preset(64, 0.0625); }

io::Dataset random_dataset(int n, int r, Rng& rng) {
  io::Dataset ds;
  ds.resolution = r;
  for (int k = 0; k < n; ++k) {
    ds.images.push_back(uniform({3, r, r}, rng));
    ds.names.push_back("img" + std::to_string(k));
  }
  return ds;
}

Tensor batch_of(const Tensor& chw) {
  return Tensor({1, chw.dim(0), chw.dim(1), chw.dim(2)}, std::vector<Real>(chw.data().begin(), chw.data().end()));
}

}  // namespace

TEST_CASE("proxy distances") {
  Rng rng(1);
  const auto cfg = tiny();
  auto d = DiscriminatorParams::init(cfg, rng);
  const Tensor a = uniform({2, 3, 64, 64}, rng), b = uniform({2, 3, 64, 64}, rng);
  for (auto kind : {DistanceKind::pixel_l1, DistanceKind::pixel_l2, DistanceKind::grad_l1, DistanceKind::d_feature}) {
    INFO(to_string(kind));
    const ProxyDistance dist{kind, &d};
    CHECK(parse_distance(to_string(kind)) == kind);
    const double ab = dist(a, b).item(), ba = dist(b, a).item();
    CHECK(ab == doctest::Approx(ba).epsilon(1e-6));
    CHECK(ab > 0);
    CHECK(dist(a, a).item() == 0);
    const auto ps = dist.per_sample(a, b);
    CHECK(ps.size() == 2);
    CHECK((ps[0] + ps[1]) / 2 == doctest::Approx(ab).epsilon(1e-5));
  }
  CHECK(ProxyDistance{DistanceKind::pixel_l1}(ops::add_scalar(a, 0.5), a).item() == doctest::Approx(0.5).epsilon(1e-5));
  // A constant shift has no gradient signal.
  CHECK(ProxyDistance{DistanceKind::grad_l1}(ops::add_scalar(a, 0.5), a).item() < 1e-6);
  CHECK_THROWS_AS(ProxyDistance{DistanceKind::d_feature}(a, b), ConfigError);
  CHECK_THROWS_AS(ProxyDistance{}(a, Tensor({2, 3, 32, 32})), ShapeError);
  CHECK_THROWS_AS(parse_distance("lpips"), ConfigError);
}

TEST_CASE("backtrack") {
  Rng rng(2);
  const auto cfg = tiny();
  auto g = GeneratorParams::init(cfg, rng);
  const Tensor targets = uniform({3, 3, 64, 64}, rng);
  SUBCASE("iters = 0 echoes the initial latent") {
    BacktrackOptions opt;
    opt.iters = 0;
    Rng a(9), b(9);
    const auto res = backtrack(g, cfg, targets, opt, a);
    const Tensor z0 = sample_latent(3, cfg.latent_dim, b);
    CHECK(testing::bitwise_equal(res.z, z0));
    REQUIRE(res.history.size() == 1);
    CHECK(res.history[0] == res.distance);
    const auto direct = opt.dist.per_sample(g_forward(z0, g, cfg, false).image, targets);
    CHECK(direct == res.distance);
  }
  SUBCASE("optimization lowers the distance and leaves G untouched") {
    const auto before = g.collect().params;
    std::vector<std::vector<Real>> snap;
    for (const auto& p : before) snap.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    BacktrackOptions opt;
    opt.iters = 30;
    opt.lr = 0.05;
    const auto res = backtrack(g, cfg, targets, opt, rng);
    CHECK(res.history.size() == 31);
    for (std::size_t n = 0; n < 3; ++n) CHECK(res.distance[n] < res.history[0][n]);
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(std::ranges::equal(before[i].tensor.data(), snap[i]));
      CHECK(before[i].tensor.requires_grad());
    }
    const double limit = 1.5 * std::sqrt(cfg.latent_dim);
    for (int n = 0; n < 3; ++n) {
      double sq = 0;
      for (int k = 0; k < cfg.latent_dim; ++k) sq += std::pow(res.z.data()[static_cast<std::size_t>(n * cfg.latent_dim + k)], 2);
      CHECK(std::sqrt(sq) <= limit * (1 + 1e-6));
    }
  }
  SUBCASE("targets are independent") {
    BacktrackOptions opt;
    opt.iters = 5;
    Rng a(4), b(4);
    const auto both = backtrack(g, cfg, targets, opt, a);
    // Same latent draw for target 0 alone: first row of the 3-sample draw.
    Rng c(4);
    const auto first = sample_latent(3, cfg.latent_dim, c);
    CHECK(both.history[0].size() == 3);
    const Tensor t0 = batch_of(Tensor({3, 64, 64}, std::vector<Real>(targets.data().begin(), targets.data().begin() + 3 * 64 * 64)));
    const Tensor z0 = Tensor({1, cfg.latent_dim}, std::vector<Real>(first.data().begin(), first.data().begin() + cfg.latent_dim));
    CHECK(opt.dist.per_sample(g_forward(z0, g, cfg, false).image, t0)[0] == both.history[0][0]);
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(backtrack(g, cfg, Tensor({1, 3, 32, 32}), BacktrackOptions{}, rng), ShapeError);
  }
}

TEST_CASE("interpolate") {
  Rng rng(3);
  const auto cfg = tiny();
  auto g = GeneratorParams::init(cfg, rng);
  const Tensor za = sample_latent(1, cfg.latent_dim, rng), zb = sample_latent(1, cfg.latent_dim, rng);
  const Tensor ga = g_forward(za, g, cfg, false).image, gb = g_forward(zb, g, cfg, false).image;
  const Tensor five = interpolate(g, cfg, za, zb, 5);
  CHECK(five.shape() == Shape{5, 3, 64, 64});
  CHECK(testing::bitwise_equal(io::slice(five, 0), ga));
  CHECK(testing::bitwise_equal(io::slice(five, 4), gb));
  const Tensor two = interpolate(g, cfg, za, zb, 2);
  CHECK(testing::bitwise_equal(io::slice(two, 0), ga));
  CHECK(testing::bitwise_equal(io::slice(two, 1), gb));
  CHECK_THROWS_AS(interpolate(g, cfg, za, zb, 1), ConfigError);
}

TEST_CASE("style_mix") {
  Rng rng(4);
  const auto cfg = tiny();
  auto g = GeneratorParams::init(cfg, rng);
  const Tensor zc = sample_latent(1, cfg.latent_dim, rng), zs = sample_latent(1, cfg.latent_dim, rng);
  const Tensor plain = g_forward(zc, g, cfg, false).image;
  CHECK(testing::bitwise_equal(style_mix(g, cfg, zc, zs, {}), plain));
  CHECK(testing::bitwise_equal(style_mix(g, cfg, zc, zc, cfg.sle_pairs), plain));
  CHECK(testing::max_abs_diff(style_mix(g, cfg, zc, zs, cfg.sle_pairs), plain) > 0);
  CHECK_THROWS_AS(style_mix(g, cfg, zc, zs, {{8, 64}}), ConfigError);
}

TEST_CASE("nearest_real") {
  Rng rng(5);
  const auto ds = random_dataset(6, 16, rng);
  Tensor fakes({4, 3, 16, 16});
  auto copy_into = [&](int slot, const Tensor& chw) {
    std::ranges::copy(chw.data(), fakes.data().begin() + slot * 3 * 256);
  };
  copy_into(0, ds.images[4]);
  copy_into(1, uniform({3, 16, 16}, rng));
  copy_into(2, uniform({3, 16, 16}, rng));
  copy_into(3, ds.images[2]);
  for (auto kind : {DistanceKind::pixel_l1, DistanceKind::pixel_l2, DistanceKind::grad_l1}) {
    const ProxyDistance dist{kind};
    const auto got = nearest_real(fakes, ds, dist);
    REQUIRE(got.size() == 4);
    CHECK(got[0].real == 4);
    CHECK(got[0].distance == 0);
    CHECK(got[3].real == 2);
    for (std::size_t f = 0; f < 4; ++f) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t r = 0; r < ds.size(); ++r) {
        const double v = dist(io::slice(fakes, static_cast<std::int64_t>(f)), batch_of(ds.images[r])).item();
        if (v < best_d) {
          best_d = v;
          best = r;
        }
      }
      CHECK(got[f].fake == f);
      CHECK(got[f].real == best);
      CHECK(got[f].distance == best_d);
    }
  }
  io::Dataset one;
  one.images = {ds.images[0]};
  one.names = {"only"};
  for (const auto& m : nearest_real(fakes, one, {})) CHECK(m.real == 0);
  // Ties go to the lower index.
  io::Dataset twins;
  twins.images = {ds.images[1], ds.images[1].clone()};
  twins.names = {"a", "b"};
  CHECK(nearest_real(fakes, twins, {})[1].real == 0);
}

TEST_CASE("probe_encoder") {
  Rng rng(6);
  const auto cfg = tiny();
  auto d = DiscriminatorParams::init(cfg, rng);
  const auto ds = random_dataset(5, 64, rng);
  SUBCASE("untrained decoder score") {
    ProbeOptions opt;
    opt.iters = 0;
    Rng a(1), b(1);
    const auto res = probe_encoder(d, ds, opt, a);
    CHECK(res.train_images == 3);
    CHECK(res.heldout_images == 2);
    CHECK(std::isfinite(res.score));
    CHECK(res.score >= 0);
    CHECK(probe_encoder(d, ds, opt, b).score == res.score);
  }
  SUBCASE("training runs and keeps D frozen") {
    const auto params = d.collect().params;
    std::vector<std::vector<Real>> snap;
    for (const auto& p : params) snap.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    ProbeOptions opt;
    opt.iters = 3;
    opt.batch_size = 2;
    const auto res = probe_encoder(d, ds, opt, rng);
    CHECK(std::isfinite(res.score));
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(std::ranges::equal(params[i].tensor.data(), snap[i]));
  }
  SUBCASE("too few images") {
    const auto one = random_dataset(1, 64, rng);
    CHECK_THROWS_AS(probe_encoder(d, one, ProbeOptions{}, rng), ConfigError);
  }
}
