#include "fastgan/training/trainer.hpp"

#include <fmt/core.h>

#include <cmath>
#include <sstream>

#include "fastgan/log.hpp"
#include "fastgan/ops.hpp"
#include "fastgan/resize.hpp"

namespace fastgan::train {
namespace {

// EMA tracks parameters; batch-norm statistics are copied from the live G.
void sync_ema(GeneratorParams& ema, const GeneratorParams& g, double decay) {
  const auto shadow = ema.collect();
  const auto live = g.collect();
  ema_update(shadow.params, live.params, decay);
  nn::copy_values(shadow.buffers, live.buffers);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (batch norm), got " + std::to_string(batch_size));
  if (iters < 0) throw ConfigError("iters must be >= 0");
  if (!(ema_decay > 0 && ema_decay < 1)) throw ConfigError("ema_decay must lie in (0,1)");
  if (!(adam.lr >= 0)) throw ConfigError("lr must be >= 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw ConfigError("adam betas must lie in [0,1)");
  }
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

bool LossReport::finite() const {
  return std::isfinite(l_d_real) && std::isfinite(l_d_fake) && std::isfinite(l_recons_part) &&
         std::isfinite(l_recons_full) && std::isfinite(l_g);
}

std::string LossReport::str() const {
  return fmt::format("l_d_real={:.6g} l_d_fake={:.6g} l_recons_part={:.6g} l_recons_full={:.6g} l_g={:.6g}",
                     l_d_real, l_d_fake, l_recons_part, l_recons_full, l_g);
}

Trainer::Trainer(ModelConfig model, TrainConfig cfg)
    : model_(std::move(model)), cfg_(cfg), rng_(cfg.seed), opt_g_({}, cfg.adam), opt_d_({}, cfg.adam) {
  model_.validate();
  cfg_.validate();
  g_ = GeneratorParams::init(model_, rng_);
  d_ = DiscriminatorParams::init(model_, rng_);
  ema_ = g_.clone();
  for (const auto& p : ema_.collect().params) {
    Tensor t = p.tensor;
    t.set_requires_grad(false);
  }
  opt_g_ = Adam(g_.collect().params, cfg_.adam);
  opt_d_ = Adam(d_.collect().params, cfg_.adam);
}

Tensor part_target(const Tensor& real, std::span<const CropSpec> crops) {
  const auto n = real.dim(0);
  const int r = static_cast<int>(real.dim(2));
  std::vector<std::int64_t> top, left;
  for (std::int64_t k = 0; k < n; ++k) {
    const CropSpec& c = crops[crops.size() == 1 ? 0 : static_cast<std::size_t>(k)];
    top.push_back(c.image_top(r));
    left.push_back(c.image_left(r));
  }
  const int size = CropSpec::image_size(r);
  Tensor crop = ops::crop2d_per_sample(real, top, left, size, size);
  return resize_bilinear(crop, nn::kDecoderOutput, nn::kDecoderOutput);
}

Tensor full_target(const Tensor& real) {
  return resize_bilinear(real, nn::kDecoderOutput, nn::kDecoderOutput);
}

LossReport Trainer::step(const Tensor& real) {
  const std::int64_t n = real.dim(0);
  const std::int64_t r = model_.resolution;
  if (real.ndim() != 4 || real.dim(1) != 3 || real.dim(2) != r || real.dim(3) != r) {
    throw ShapeError("train step: expected reals [N,3," + std::to_string(r) + "," + std::to_string(r) +
                     "], got " + shape_str(real.shape()));
  }
  LossReport rep;
  const auto d_params = opt_d_.params();

  Graph g_graph;
  const Tensor z = sample_latent(n, model_.latent_dim, rng_);
  const Tensor fake = g_forward(z, g_, model_, true).image;
  const AugmentDraw draw_real = draw_augment(cfg_.aug, n, r, rng_);
  const AugmentDraw draw_fake = draw_augment(cfg_.aug, n, r, rng_);
  std::vector<CropSpec> crops(static_cast<std::size_t>(n));
  for (auto& c : crops) {
    c.i = static_cast<int>(rng_.uniform_int(0, CropSpec::kGrid - CropSpec::kExtent));
    c.j = static_cast<int>(rng_.uniform_int(0, CropSpec::kGrid - CropSpec::kExtent));
  }

  // D step. Fakes enter detached so no D-loss gradient reaches G.
  {
    Graph d_graph;
    opt_d_.zero_grad();
    const Tensor real_aug = apply_augment(real, draw_real);
    const DiscriminatorFeatures fr = d_forward(real_aug, d_, true);
    const Tensor l_real = hinge_real(fr.logits);
    const Tensor fake_aug = apply_augment(fake.detach(), draw_fake);
    const Tensor l_fake = hinge_fake(d_forward(fake_aug, d_, true).logits);
    Tensor loss = ops::add(l_real, l_fake);

    const Tensor t_part = part_target(real_aug.detach(), crops);
    const Tensor t_full = full_target(real_aug.detach());
    Tensor l_part, l_full;
    if (cfg_.self_supervised) {
      const Reconstruction rec = reconstruct(fr, crops, d_, true);
      l_part = image_distance(rec.part, t_part, cfg_.recon_norm);
      l_full = image_distance(rec.full, t_full, cfg_.recon_norm);
      loss = ops::add(loss, ops::add(l_part, l_full));
    } else {
      NoGradGuard off;
      DiscriminatorFeatures fd{fr.f1.detach(), fr.f2.detach(), {}};
      const Reconstruction rec = reconstruct(fd, crops, d_, false);
      l_part = image_distance(rec.part, t_part, cfg_.recon_norm);
      l_full = image_distance(rec.full, t_full, cfg_.recon_norm);
    }
    rep.l_d_real = l_real.item();
    rep.l_d_fake = l_fake.item();
    rep.l_recons_part = l_part.item();
    rep.l_recons_full = l_full.item();
    d_graph.backward(loss);
    opt_d_.step();
  }

  // G step: the same fakes through the updated D, whose weights stay frozen.
  {
    nn::FreezeGuard frozen(d_params);
    opt_g_.zero_grad();
    const Tensor fake_aug = apply_augment(fake, draw_fake);
    const Tensor l_g = g_loss(d_forward(fake_aug, d_, false).logits);
    rep.l_g = l_g.item();
    g_graph.backward(l_g);
  }
  opt_g_.step();

  sync_ema(ema_, g_, cfg_.ema_decay);
  ++step_;
  if (!rep.finite()) {
    throw NumericError(fmt::format("non-finite loss at step {}: {}", step_, rep.str()));
  }
  return rep;
}

LossLog::LossLog(const std::filesystem::path& path, std::int64_t resume_step) {
  std::vector<std::string> kept;
  if (resume_step > 0 && std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoll(line.substr(0, line.find(','))) <= resume_step) kept.push_back(line);
    }
  }
  out_.open(path, std::ios::trunc);
  if (!out_) throw IoError("cannot write loss log " + path.string());
  out_ << kHeader << '\n';
  for (const auto& l : kept) out_ << l << '\n';
  out_.flush();
}

void LossLog::append(std::int64_t step, const LossReport& r) {
  // 9 significant digits round-trip an f32 exactly.
  out_ << fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", step, r.l_d_real, r.l_d_fake,
                      r.l_recons_part, r.l_recons_full, r.l_g);
  out_.flush();
}

void run(Trainer& trainer, const LoopHooks& hooks) {
  if (!hooks.next_batch) throw ConfigError("training loop needs a batch source");
  const auto& cfg = trainer.config();
  while (trainer.steps_done() < cfg.iters) {
    const Tensor batch = hooks.next_batch(trainer.rng());
    const LossReport rep = trainer.step(batch);
    const std::int64_t s = trainer.steps_done();
    if (hooks.on_step) hooks.on_step(s, rep);
    const bool due = cfg.checkpoint_every > 0 && s % cfg.checkpoint_every == 0;
    if (hooks.on_checkpoint && (due || s == cfg.iters)) hooks.on_checkpoint(s);
  }
}

}  // namespace fastgan::train
