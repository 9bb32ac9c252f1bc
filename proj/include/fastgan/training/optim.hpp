#pragma once

#include <string>

#include "fastgan/nn/blocks.hpp"

namespace fastgan::train {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, one pair per parameter.
struct AdamState {
  nn::TensorList m;
  nn::TensorList v;
  std::int64_t step = 0;

  static AdamState zeros_like(const nn::TensorList& params);
};

// Bias-corrected Adam update of `params` using their accumulated gradients.
void adam_step(const nn::TensorList& params, AdamState& state, const AdamConfig& cfg);

class Adam {
 public:
  Adam(nn::TensorList params, AdamConfig cfg);

  void step() { adam_step(params_, state_, cfg_); }
  void zero_grad() { nn::zero_grads(params_); }

  const nn::TensorList& params() const { return params_; }
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }
  AdamConfig& config() { return cfg_; }

 private:
  nn::TensorList params_;
  AdamState state_;
  AdamConfig cfg_;
};

// shadow <- decay * shadow + (1 - decay) * params.
void ema_update(const nn::TensorList& shadow, const nn::TensorList& params, double decay);

}  // namespace fastgan::train
