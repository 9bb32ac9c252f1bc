#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "fastgan/discriminator.hpp"
#include "fastgan/generator.hpp"
#include "fastgan/training/augment.hpp"
#include "fastgan/training/losses.hpp"
#include "fastgan/training/optim.hpp"

namespace fastgan::train {

struct TrainConfig {
  AdamConfig adam;  // shared by G and D
  int batch_size = 8;
  std::int64_t iters = 1000;
  double ema_decay = 0.999;
  AugmentPolicy aug = AugmentPolicy::all();
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 0;  // 0: only at the end
  ReconNorm recon_norm = ReconNorm::l1;
  // Reconstruction loss on D's features. Off gives the plain hinge baseline
  // (reconstruction is still measured, without gradients).
  bool self_supervised = true;

  void validate() const;  // throws ConfigError
};

struct LossReport {
  double l_d_real = 0;
  double l_d_fake = 0;
  double l_recons_part = 0;
  double l_recons_full = 0;
  double l_g = 0;

  bool finite() const;
  std::string str() const;
};

// Owns G, its EMA shadow, D (with decoders), both optimizers, and the random
// stream. All randomness after construction is drawn from rng().
class Trainer {
 public:
  Trainer(ModelConfig model, TrainConfig cfg);

  // One alternating D/G update on a batch of reals in [-1,1].
  LossReport step(const Tensor& real);

  const ModelConfig& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }
  GeneratorParams& g() { return g_; }
  GeneratorParams& ema() { return ema_; }
  DiscriminatorParams& d() { return d_; }
  Adam& opt_g() { return opt_g_; }
  Adam& opt_d() { return opt_d_; }
  Rng& rng() { return rng_; }
  std::int64_t steps_done() const { return step_; }
  void set_steps_done(std::int64_t s) { step_ = s; }

 private:
  ModelConfig model_;
  TrainConfig cfg_;
  Rng rng_;
  GeneratorParams g_;
  GeneratorParams ema_;
  DiscriminatorParams d_;
  Adam opt_g_;
  Adam opt_d_;
  std::int64_t step_ = 0;
};

// Real image crop matching the 8x8 f1 window, resized to the decoder size.
Tensor part_target(const Tensor& real, std::span<const CropSpec> crops);
Tensor full_target(const Tensor& real);

// Append-only loss CSV, flushed every row. Opening with `resume_step` keeps
// rows for steps <= resume_step and drops the rest.
class LossLog {
 public:
  static constexpr const char* kHeader = "step,l_d_real,l_d_fake,l_recons_part,l_recons_full,l_g";

  LossLog(const std::filesystem::path& path, std::int64_t resume_step = 0);
  void append(std::int64_t step, const LossReport& r);

 private:
  std::ofstream out_;
};

struct LoopHooks {
  std::function<Tensor(Rng&)> next_batch;                     // required
  std::function<void(std::int64_t, const LossReport&)> on_step;
  std::function<void(std::int64_t)> on_checkpoint;
};

// Runs steps until config().iters. on_checkpoint fires every checkpoint_every
// steps and after the last one.
void run(Trainer& trainer, const LoopHooks& hooks);

}  // namespace fastgan::train
