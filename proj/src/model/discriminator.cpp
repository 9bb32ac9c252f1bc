#include "fastgan/discriminator.hpp"

#include <algorithm>

namespace fastgan {
namespace {

std::vector<std::int64_t> widths(const ModelConfig& cfg) {
  return {cfg.decoder_channels.begin(), cfg.decoder_channels.end()};
}

}  // namespace

DiscriminatorParams DiscriminatorParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  DiscriminatorParams p;
  p.resolution = cfg.resolution;
  int r = cfg.resolution;
  for (int k = 0; k < cfg.d_stem_convs(); ++k) {
    const int cin = k == 0 ? 3 : cfg.d_ch(r);
    p.stem.push_back(nn::ConvParams::init(cin, cfg.d_ch(r / 2), 4, 2, 1, rng, true, true));
    r /= 2;
  }
  for (; r > 8; r /= 2) p.down.push_back(nn::DownBlockParams::init(cfg.d_ch(r), cfg.d_ch(r / 2), rng));
  const int c8 = cfg.d_ch(8);
  const int head = std::max(4, c8 / 4);
  p.head = nn::ConvParams::init(c8, head, 4, 1, 0, rng, true, true);
  p.head_out = nn::ConvParams::init(head, 1, 1, 1, 0, rng, true, true);
  p.part_decoder = nn::DecoderParams::init(cfg.d_ch(16), widths(cfg), rng, true);
  p.full_decoder = nn::DecoderParams::init(c8, widths(cfg), rng, true);
  return p;
}

void DiscriminatorParams::collect(const std::string& prefix, nn::ParamCollector& out) const {
  for (std::size_t k = 0; k < stem.size(); ++k) stem[k].collect(prefix + ".stem" + std::to_string(k), out);
  for (std::size_t k = 0; k < down.size(); ++k) down[k].collect(prefix + ".down" + std::to_string(k), out);
  head.collect(prefix + ".head", out);
  head_out.collect(prefix + ".head_out", out);
  part_decoder.collect(prefix + ".dec_part", out);
  full_decoder.collect(prefix + ".dec_full", out);
}

nn::ParamCollector DiscriminatorParams::collect(const std::string& prefix) const {
  nn::ParamCollector out;
  collect(prefix, out);
  return out;
}

std::vector<const nn::ConvParams*> DiscriminatorParams::convs() const {
  std::vector<const nn::ConvParams*> out;
  for (const auto& c : stem) out.push_back(&c);
  for (const auto& b : down) {
    out.push_back(&b.down);
    out.push_back(&b.refine);
    out.push_back(&b.skip);
  }
  out.push_back(&head);
  out.push_back(&head_out);
  for (const auto* dec : {&part_decoder, &full_decoder}) {
    for (const auto& up : dec->ups) out.push_back(&up.conv);
    out.push_back(&dec->to_rgb);
  }
  return out;
}

DiscriminatorFeatures d_forward(const Tensor& img, DiscriminatorParams& p, bool training) {
  if (img.ndim() != 4 || img.dim(1) != 3 || img.dim(2) != p.resolution ||
      img.dim(3) != p.resolution) {
    throw ShapeError("d_forward: expected [N,3," + std::to_string(p.resolution) + "," +
                     std::to_string(p.resolution) + "] images, got " + shape_str(img.shape()));
  }
  DiscriminatorFeatures out;
  Tensor h = img;
  for (auto& conv : p.stem) h = ops::leaky_relu(nn::conv_forward(h, conv, training));
  for (auto& blk : p.down) {
    h = nn::down_block(h, blk, training);
    if (h.dim(2) == 16) out.f1 = h;
  }
  out.f2 = h;
  Tensor t = ops::leaky_relu(nn::conv_forward(h, p.head, training));
  out.logits = nn::conv_forward(t, p.head_out, training);
  return out;
}

void CropSpec::validate() const {
  if (i < 0 || j < 0 || i > kGrid - kExtent || j > kGrid - kExtent) {
    throw ShapeError("crop (" + std::to_string(i) + "," + std::to_string(j) +
                     ") outside the valid 0..8 range on the 16x16 grid");
  }
}

Reconstruction reconstruct(const DiscriminatorFeatures& feats, std::span<const CropSpec> crops,
                           DiscriminatorParams& p, bool training) {
  if (feats.f1.ndim() != 4 || feats.f1.dim(2) != CropSpec::kGrid ||
      feats.f1.dim(3) != CropSpec::kGrid) {
    throw ShapeError("reconstruct: f1 must be 16x16, got " + shape_str(feats.f1.shape()));
  }
  const std::int64_t n = feats.f1.dim(0);
  if (crops.size() != 1 && static_cast<std::int64_t>(crops.size()) != n) {
    throw ShapeError("reconstruct: " + std::to_string(crops.size()) + " crops for batch of " +
                     std::to_string(n));
  }
  std::vector<std::int64_t> top, left;
  for (std::int64_t k = 0; k < n; ++k) {
    const CropSpec& c = crops[crops.size() == 1 ? 0 : static_cast<std::size_t>(k)];
    c.validate();
    top.push_back(c.i);
    left.push_back(c.j);
  }
  Tensor part_in =
      ops::crop2d_per_sample(feats.f1, top, left, CropSpec::kExtent, CropSpec::kExtent);
  return {nn::decoder_forward(part_in, p.part_decoder, training),
          nn::decoder_forward(feats.f2, p.full_decoder, training)};
}

Reconstruction reconstruct(const DiscriminatorFeatures& feats, const CropSpec& crop,
                           DiscriminatorParams& p, bool training) {
  return reconstruct(feats, std::span<const CropSpec>(&crop, 1), p, training);
}

}  // namespace fastgan
