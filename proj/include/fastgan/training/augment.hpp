#pragma once

#include <string>
#include <vector>

#include "fastgan/rng.hpp"
#include "fastgan/tensor.hpp"

namespace fastgan::train {

struct AugmentPolicy {
  bool color = false;
  bool translation = false;
  bool cutout = false;

  static AugmentPolicy all() { return {true, true, true}; }
  // Comma-separated subset of {color, translation, cutout}; "" or "none" is empty.
  static AugmentPolicy parse(const std::string& s);
  std::string to_string() const;
  bool empty() const { return !color && !translation && !cutout; }
};

// Random parameters for one batch. Vectors are empty for disabled ops.
struct AugmentDraw {
  std::vector<Real> brightness;  // added, U(-0.5, 0.5)
  std::vector<Real> saturation;  // about the channel mean, 2*U(0,1)
  std::vector<Real> contrast;    // about the sample mean, U(0.5, 1.5)
  std::vector<int> shift_y, shift_x;  // integer shift in [-R/8, R/8], zero fill
  std::vector<int> cut_top, cut_left;  // cutout square origin (may lie off-image)
  int cut_size = 0;
};

AugmentDraw draw_augment(const AugmentPolicy& policy, std::int64_t batch, std::int64_t resolution,
                         Rng& rng);

// Applies color, then translation, then cutout. Differentiable in `batch`.
Tensor apply_augment(const Tensor& batch, const AugmentDraw& draw);

Tensor diff_augment(const Tensor& batch, const AugmentPolicy& policy, Rng& rng);

// 0/1 mask (zeros inside each cutout square) with the batch shape.
Tensor cutout_mask(const Shape& shape, const AugmentDraw& draw);

}  // namespace fastgan::train
