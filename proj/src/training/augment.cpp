#include "fastgan/training/augment.hpp"

#include <algorithm>
#include <sstream>

#include "fastgan/ops.hpp"

namespace fastgan::train {

AugmentPolicy AugmentPolicy::parse(const std::string& s) {
  AugmentPolicy p;
  if (s.empty() || s == "none") return p;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item == "color") {
      p.color = true;
    } else if (item == "translation") {
      p.translation = true;
    } else if (item == "cutout") {
      p.cutout = true;
    } else {
      throw ConfigError("unknown augmentation '" + item + "' (expected color, translation, cutout)");
    }
  }
  return p;
}

std::string AugmentPolicy::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(color, "color");
  add(translation, "translation");
  add(cutout, "cutout");
  return out.empty() ? "none" : out;
}

AugmentDraw draw_augment(const AugmentPolicy& policy, std::int64_t batch, std::int64_t resolution,
                         Rng& rng) {
  AugmentDraw d;
  const auto n = static_cast<std::size_t>(batch);
  if (policy.color) {
    for (std::size_t i = 0; i < n; ++i) d.brightness.push_back(static_cast<Real>(rng.uniform() - 0.5));
    for (std::size_t i = 0; i < n; ++i) d.saturation.push_back(static_cast<Real>(rng.uniform() * 2.0));
    for (std::size_t i = 0; i < n; ++i) d.contrast.push_back(static_cast<Real>(rng.uniform() + 0.5));
  }
  if (policy.translation) {
    const auto shift = static_cast<int>(resolution / 8);
    for (std::size_t i = 0; i < n; ++i) d.shift_y.push_back(static_cast<int>(rng.uniform_int(-shift, shift)));
    for (std::size_t i = 0; i < n; ++i) d.shift_x.push_back(static_cast<int>(rng.uniform_int(-shift, shift)));
  }
  if (policy.cutout) {
    d.cut_size = static_cast<int>(resolution / 2);
    // Square centred anywhere on [0, R], so it may hang off the border.
    for (std::size_t i = 0; i < n; ++i)
      d.cut_top.push_back(static_cast<int>(rng.uniform_int(0, resolution)) - d.cut_size / 2);
    for (std::size_t i = 0; i < n; ++i)
      d.cut_left.push_back(static_cast<int>(rng.uniform_int(0, resolution)) - d.cut_size / 2);
  }
  return d;
}

Tensor cutout_mask(const Shape& shape, const AugmentDraw& draw) {
  Tensor mask(shape, Real(1));
  const auto N = shape[0], C = shape[1], H = shape[2], W = shape[3];
  auto m = mask.data();
  for (std::int64_t n = 0; n < N; ++n) {
    const std::int64_t top = draw.cut_top[n], left = draw.cut_left[n];
    const std::int64_t y0 = std::max<std::int64_t>(0, top), y1 = std::min<std::int64_t>(H, top + draw.cut_size);
    const std::int64_t x0 = std::max<std::int64_t>(0, left), x1 = std::min<std::int64_t>(W, left + draw.cut_size);
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t i = y0; i < y1; ++i)
        for (std::int64_t j = x0; j < x1; ++j) m[((n * C + c) * H + i) * W + j] = Real(0);
  }
  return mask;
}

Tensor apply_augment(const Tensor& batch, const AugmentDraw& draw) {
  Tensor x = batch;
  if (!draw.brightness.empty()) x = ops::add_per_sample(x, draw.brightness);
  if (!draw.saturation.empty()) x = ops::blend_channel_mean(x, draw.saturation);
  if (!draw.contrast.empty()) x = ops::blend_sample_mean(x, draw.contrast);
  if (!draw.shift_y.empty()) x = ops::translate(x, draw.shift_y, draw.shift_x);
  if (!draw.cut_top.empty()) x = ops::mul(x, cutout_mask(x.shape(), draw));
  return x;
}

Tensor diff_augment(const Tensor& batch, const AugmentPolicy& policy, Rng& rng) {
  if (policy.empty()) return batch;
  return apply_augment(batch, draw_augment(policy, batch.dim(0), batch.dim(2), rng));
}

}  // namespace fastgan::train
