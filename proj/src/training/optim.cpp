#include "fastgan/training/optim.hpp"

#include <cmath>

namespace fastgan::train {

AdamState AdamState::zeros_like(const nn::TensorList& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.push_back({p.name, Tensor::zeros(p.tensor.shape())});
    s.v.push_back({p.name, Tensor::zeros(p.tensor.shape())});
  }
  return s;
}

void adam_step(const nn::TensorList& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not match parameter list");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor w = params[k].tensor;
    Tensor m = state.m[k].tensor;
    Tensor v = state.v[k].tensor;
    auto ws = w.data();
    auto ms = m.data();
    auto vs = v.data();
    if (!w.has_grad()) {
      // Untouched this step: moments still decay, as with a zero gradient.
      for (std::size_t i = 0; i < ws.size(); ++i) {
        ms[i] = static_cast<Real>(cfg.beta1 * ms[i]);
        vs[i] = static_cast<Real>(cfg.beta2 * vs[i]);
        const double update = cfg.lr * (ms[i] / c1) / (std::sqrt(vs[i] / c2) + cfg.eps);
        ws[i] = static_cast<Real>(ws[i] - update);
      }
      continue;
    }
    const auto gs = w.grad();
    for (std::size_t i = 0; i < ws.size(); ++i) {
      const double g = gs[i];
      const double mi = cfg.beta1 * ms[i] + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * vs[i] + (1.0 - cfg.beta2) * g * g;
      ms[i] = static_cast<Real>(mi);
      vs[i] = static_cast<Real>(vi);
      const double update = cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps);
      ws[i] = static_cast<Real>(ws[i] - update);
    }
  }
}

Adam::Adam(nn::TensorList params, AdamConfig cfg)
    : params_(std::move(params)), state_(AdamState::zeros_like(params_)), cfg_(cfg) {}

void ema_update(const nn::TensorList& shadow, const nn::TensorList& params, double decay) {
  if (shadow.size() != params.size()) throw ShapeError("ema_update: collection sizes differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (shadow[k].tensor.shape() != params[k].tensor.shape()) {
      throw ShapeError("ema_update: shape mismatch at " + params[k].name);
    }
    Tensor s = shadow[k].tensor;
    auto ss = s.data();
    const auto ps = params[k].tensor.data();
    for (std::size_t i = 0; i < ss.size(); ++i) {
      ss[i] = static_cast<Real>(decay * ss[i] + (1.0 - decay) * ps[i]);
    }
  }
}

}  // namespace fastgan::train
