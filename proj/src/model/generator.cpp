#include "fastgan/generator.hpp"

namespace fastgan {

GeneratorParams GeneratorParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  GeneratorParams p;
  const int c4 = cfg.g_ch(4);
  p.project = nn::ConvParams::init(cfg.latent_dim, 2 * c4 * 16, 1, 1, 0, rng);
  p.project_bn = nn::BatchNormParams::init(2 * c4);
  for (int r = 8; r <= cfg.resolution; r *= 2) {
    p.up.emplace(r, nn::UpBlockParams::init(cfg.g_ch(r / 2), cfg.g_ch(r), rng));
  }
  for (const auto& pair : cfg.sle_pairs) {
    p.sle.emplace(pair, nn::SleParams::init(cfg.g_ch(pair.low), cfg.g_ch(pair.high), rng));
  }
  p.to_rgb = nn::ConvParams::init(cfg.g_ch(cfg.resolution), 3, 3, 1, 1, rng);
  return p;
}

void GeneratorParams::collect(const std::string& prefix, nn::ParamCollector& out) const {
  project.collect(prefix + ".project", out);
  project_bn.collect(prefix + ".project_bn", out);
  for (const auto& [r, blk] : up) blk.collect(prefix + ".up" + std::to_string(r), out);
  for (const auto& [pair, s] : sle) {
    s.collect(prefix + ".sle" + std::to_string(pair.low) + "_" + std::to_string(pair.high), out);
  }
  to_rgb.collect(prefix + ".to_rgb", out);
}

nn::ParamCollector GeneratorParams::collect(const std::string& prefix) const {
  nn::ParamCollector out;
  collect(prefix, out);
  return out;
}

GeneratorParams GeneratorParams::clone() const {
  // Structure copy shares storage; replace every tensor with a deep copy.
  GeneratorParams c = *this;
  auto deep = [](nn::ConvParams& conv) {
    conv.weight = conv.weight.clone().set_requires_grad(true);
    if (conv.bias.defined()) conv.bias = conv.bias.clone().set_requires_grad(true);
    if (conv.sn) conv.sn = ops::SpectralState{conv.sn->u.clone(), conv.sn->v.clone()};
  };
  auto deep_bn = [](nn::BatchNormParams& bn) {
    bn.gamma = bn.gamma.clone().set_requires_grad(true);
    bn.beta = bn.beta.clone().set_requires_grad(true);
    bn.state = {bn.state.running_mean.clone(), bn.state.running_var.clone()};
  };
  deep(c.project);
  deep_bn(c.project_bn);
  for (auto& [r, blk] : c.up) {
    deep(blk.conv);
    deep_bn(blk.bn);
  }
  for (auto& [pair, s] : c.sle) {
    deep(s.squeeze);
    deep(s.excite);
  }
  deep(c.to_rgb);
  return c;
}

GeneratorOutput g_forward(const Tensor& z, GeneratorParams& p, const ModelConfig& cfg,
                          bool training, const SleOverride* sle_override) {
  if (z.ndim() != 2 || z.dim(1) != cfg.latent_dim) {
    throw ShapeError("g_forward: latent must be [N," + std::to_string(cfg.latent_dim) + "], got " +
                     shape_str(z.shape()));
  }
  const std::int64_t N = z.dim(0);
  const int c4 = cfg.g_ch(4);
  if (sle_override) {
    for (const auto& [pair, t] : *sle_override) {
      if (!p.sle.contains(pair)) {
        throw ConfigError("SLE override for pair " + std::to_string(pair.low) + "->" +
                          std::to_string(pair.high) + " not present in this model");
      }
    }
  }

  GeneratorOutput out;
  std::map<int, Tensor> feats;
  Tensor h = ops::reshape(z, {N, cfg.latent_dim, 1, 1});
  h = nn::conv_forward(h, p.project, training);
  h = ops::reshape(h, {N, 2 * c4, 4, 4});
  h = ops::batch_norm2d(h, p.project_bn.gamma, p.project_bn.beta, p.project_bn.state, training);
  feats[4] = ops::glu(h);

  for (int r = 8; r <= cfg.resolution; r *= 2) {
    Tensor x = nn::up_block(feats[r / 2], p.up.at(r), training);
    for (auto& [pair, sle] : p.sle) {
      if (pair.high != r) continue;
      const Tensor& own = feats.at(pair.low);
      out.x_low[pair] = own;
      Tensor low = own;
      if (sle_override) {
        if (auto it = sle_override->find(pair); it != sle_override->end()) {
          if (it->second.shape() != own.shape()) {
            throw ShapeError("SLE override for pair " + std::to_string(pair.low) + "->" +
                             std::to_string(pair.high) + " has shape " +
                             shape_str(it->second.shape()) + ", expected " +
                             shape_str(own.shape()));
          }
          low = it->second;
        }
      }
      x = nn::sle_forward(low, x, sle);
    }
    feats[r] = x;
  }
  out.image = ops::tanh(nn::conv_forward(feats.at(cfg.resolution), p.to_rgb, training));
  return out;
}

Tensor sample_latent(std::int64_t n, int latent_dim, Rng& rng) {
  Tensor z({n, latent_dim});
  rng.fill_normal(z.data());
  return z;
}

}  // namespace fastgan
