#include "fastgan/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fastgan/log.hpp"
#include "fastgan/ops.hpp"
#include "fastgan/training/optim.hpp"
#include "fastgan/training/trainer.hpp"

namespace fastgan::analysis {
namespace {

Tensor finite_diff(const Tensor& x, bool vertical) {
  const auto h = x.dim(2), w = x.dim(3);
  if (vertical) return ops::sub(ops::crop2d(x, 1, 0, h - 1, w), ops::crop2d(x, 0, 0, h - 1, w));
  return ops::sub(ops::crop2d(x, 0, 1, h, w - 1), ops::crop2d(x, 0, 0, h, w - 1));
}

void project_norm(Tensor& z, double max_norm) {
  const auto dim = z.dim(1);
  auto d = z.data();
  for (std::int64_t n = 0; n < z.dim(0); ++n) {
    double sq = 0;
    for (std::int64_t k = 0; k < dim; ++k) sq += static_cast<double>(d[n * dim + k]) * d[n * dim + k];
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) continue;
    const double f = max_norm / norm;
    for (std::int64_t k = 0; k < dim; ++k) d[n * dim + k] = static_cast<Real>(d[n * dim + k] * f);
  }
}

}  // namespace

DistanceKind parse_distance(const std::string& s) {
  if (s == "pixel_l1") return DistanceKind::pixel_l1;
  if (s == "pixel_l2") return DistanceKind::pixel_l2;
  if (s == "grad_l1") return DistanceKind::grad_l1;
  if (s == "d_feature") return DistanceKind::d_feature;
  throw ConfigError("unknown distance '" + s + "' (expected pixel_l1, pixel_l2, grad_l1, d_feature)");
}

std::string to_string(DistanceKind k) {
  switch (k) {
    case DistanceKind::pixel_l1: return "pixel_l1";
    case DistanceKind::pixel_l2: return "pixel_l2";
    case DistanceKind::grad_l1: return "grad_l1";
    case DistanceKind::d_feature: return "d_feature";
  }
  return "?";
}

Tensor ProxyDistance::operator()(const Tensor& a, const Tensor& b) const {
  if (a.shape() != b.shape()) {
    throw ShapeError("distance: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  switch (kind) {
    case DistanceKind::pixel_l1: return ops::mean(ops::abs(ops::sub(a, b)));
    case DistanceKind::pixel_l2: return ops::mean(ops::square(ops::sub(a, b)));
    case DistanceKind::grad_l1:
      return ops::add(ops::mean(ops::abs(ops::sub(finite_diff(a, false), finite_diff(b, false)))),
                      ops::mean(ops::abs(ops::sub(finite_diff(a, true), finite_diff(b, true)))));
    case DistanceKind::d_feature: {
      if (!d) throw ConfigError("d_feature distance needs a discriminator");
      const Tensor fa = d_forward(a, *d, false).f2;
      const Tensor fb = d_forward(b, *d, false).f2;
      return ops::mean(ops::square(ops::sub(fa, fb)));
    }
  }
  throw ConfigError("bad distance kind");
}

std::vector<double> ProxyDistance::per_sample(const Tensor& a, const Tensor& b) const {
  NoGradGuard off;
  std::vector<double> out;
  for (std::int64_t n = 0; n < a.dim(0); ++n) out.push_back((*this)(io::slice(a, n), io::slice(b, n)).item());
  return out;
}

BacktrackResult backtrack(GeneratorParams& g, const ModelConfig& cfg, const Tensor& targets,
                          const BacktrackOptions& opt, Rng& rng) {
  if (targets.ndim() != 4 || targets.dim(2) != cfg.resolution) {
    throw ShapeError("backtrack: targets must be [N,3,R,R] at the model resolution, got " +
                     shape_str(targets.shape()));
  }
  nn::FreezeGuard frozen_g(g.collect().params);
  nn::FreezeGuard frozen_d(opt.dist.d ? opt.dist.d->collect().params : nn::TensorList{});
  const std::int64_t n = targets.dim(0);
  const double max_norm = opt.max_norm_factor * std::sqrt(static_cast<double>(cfg.latent_dim));

  Tensor z = sample_latent(n, cfg.latent_dim, rng);
  project_norm(z, max_norm);
  z.set_requires_grad(true);
  const nn::TensorList zs = {{"z", z}};
  train::AdamState state = train::AdamState::zeros_like(zs);
  const train::AdamConfig adam{opt.lr, 0.9, 0.999, 1e-8};

  auto check = [](const std::vector<double>& ds) {
    for (double v : ds)
      if (!std::isfinite(v)) throw NumericError("backtrack: non-finite distance");
  };

  BacktrackResult res;
  for (std::int64_t it = 0; it < opt.iters; ++it) {
    Graph graph;
    z.zero_grad();
    const Tensor img = g_forward(z, g, cfg, false).image;
    res.history.push_back(opt.dist.per_sample(img, targets));
    check(res.history.back());
    // Sum of per-sample means: each latent sees only its own target.
    const Tensor loss = ops::scale(opt.dist(img, targets), static_cast<Real>(n));
    graph.backward(loss);
    train::adam_step(zs, state, adam);
    project_norm(z, max_norm);
  }
  {
    NoGradGuard off;
    res.recon = g_forward(z, g, cfg, false).image;
  }
  res.distance = opt.dist.per_sample(res.recon, targets);
  check(res.distance);
  res.history.push_back(res.distance);
  res.z = z.detach();
  return res;
}

Tensor interpolate(GeneratorParams& g, const ModelConfig& cfg, const Tensor& z_a, const Tensor& z_b,
                   int steps) {
  if (steps < 2) throw ConfigError("interpolate needs at least 2 steps");
  if (z_a.shape() != z_b.shape() || z_a.dim(0) != 1) throw ShapeError("interpolate: expects two [1, latent_dim] latents");
  NoGradGuard off;
  std::vector<Tensor> frames;
  for (int k = 0; k < steps; ++k) {
    const Real t = static_cast<Real>(k) / static_cast<Real>(steps - 1);
    const Tensor z = ops::add(ops::scale(z_a, Real(1) - t), ops::scale(z_b, t));
    const Tensor img = g_forward(z, g, cfg, false).image;
    frames.push_back(Tensor({3, img.dim(2), img.dim(3)}, std::vector<Real>(img.data().begin(), img.data().end())));
  }
  return io::stack(frames);
}

Tensor style_mix(GeneratorParams& g, const ModelConfig& cfg, const Tensor& z_content, const Tensor& z_style,
                 const std::vector<SlePair>& pairs) {
  NoGradGuard off;
  for (const auto& p : pairs) {
    if (std::ranges::find(cfg.sle_pairs, p) == cfg.sle_pairs.end()) {
      throw ConfigError("SLE pair " + std::to_string(p.low) + "->" + std::to_string(p.high) +
                        " is not part of this model");
    }
  }
  if (pairs.empty()) return g_forward(z_content, g, cfg, false).image;
  const GeneratorOutput style = g_forward(z_style, g, cfg, false);
  SleOverride override;
  for (const auto& p : pairs) override[p] = style.x_low.at(p);
  return g_forward(z_content, g, cfg, false, &override).image;
}

ProbeResult probe_encoder(DiscriminatorParams& d, const io::Dataset& data, const ProbeOptions& opt,
                          Rng& rng) {
  if (data.size() < 2) throw ConfigError("probe needs at least 2 images (train + held-out)");
  const auto n = data.size();
  const std::size_t held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(static_cast<double>(n) * opt.holdout)), 1, n - 1);
  const std::size_t train_n = n - held;

  // Frozen encoder: features are computed once.
  Tensor feats, targets;
  {
    NoGradGuard off;
    const Tensor all = io::stack(data.images);
    feats = d_forward(all, d, false).f2;
    targets = train::full_target(all);
  }
  std::vector<std::int64_t> widths;
  for (const auto& p : d.full_decoder.ups) widths.push_back(p.out_channels());
  nn::DecoderParams dec = nn::DecoderParams::init(feats.dim(1), widths, rng, false);
  nn::ParamCollector pc;
  dec.collect("probe", pc);
  train::Adam adam(pc.params, {opt.lr, 0.5, 0.999, 1e-8});

  const int bs = std::max(2, opt.batch_size);
  for (std::int64_t it = 0; it < opt.iters; ++it) {
    std::vector<Tensor> f, t;
    for (int k = 0; k < bs; ++k) {
      const auto idx = rng.uniform_int(0, static_cast<std::int64_t>(train_n) - 1);
      const Tensor fi = io::slice(feats, idx), ti = io::slice(targets, idx);
      f.push_back(Tensor({fi.dim(1), fi.dim(2), fi.dim(3)}, std::vector<Real>(fi.data().begin(), fi.data().end())));
      t.push_back(Tensor({3, ti.dim(2), ti.dim(3)}, std::vector<Real>(ti.data().begin(), ti.data().end())));
    }
    Graph graph;
    adam.zero_grad();
    const Tensor loss = ops::mean(ops::abs(ops::sub(nn::decoder_forward(io::stack(f), dec, true), io::stack(t))));
    if (!std::isfinite(loss.item())) throw NumericError("probe: non-finite decoder loss");
    graph.backward(loss);
    adam.step();
  }

  NoGradGuard off;
  double total = 0;
  for (std::size_t k = train_n; k < n; ++k) {
    const Tensor out = nn::decoder_forward(io::slice(feats, static_cast<std::int64_t>(k)), dec, false);
    total += ops::mean(ops::abs(ops::sub(out, io::slice(targets, static_cast<std::int64_t>(k))))).item();
  }
  return {total / static_cast<double>(held), train_n, held};
}

std::vector<NearestMatch> nearest_real(const Tensor& fakes, const io::Dataset& data, const ProxyDistance& dist) {
  NoGradGuard off;
  std::vector<NearestMatch> out;
  for (std::int64_t f = 0; f < fakes.dim(0); ++f) {
    const Tensor fake = io::slice(fakes, f);
    NearestMatch best{static_cast<std::size_t>(f), 0, std::numeric_limits<double>::infinity()};
    for (std::size_t r = 0; r < data.size(); ++r) {
      const Tensor& img = data.images[r];
      const Tensor real({1, img.dim(0), img.dim(1), img.dim(2)}, std::vector<Real>(img.data().begin(), img.data().end()));
      const double v = dist(fake, real).item();
      if (v < best.distance) best = {static_cast<std::size_t>(f), r, v};
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace fastgan::analysis
