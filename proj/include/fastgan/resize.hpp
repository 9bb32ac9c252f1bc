#pragma once

#include "fastgan/tensor.hpp"

namespace fastgan {

// Antialiased bilinear (triangle-filter) resampling of a [N,C,H,W] tensor.
// Downscaling widens the filter support by the scale factor; upscaling is
// plain bilinear with half-pixel centers. Not differentiable.
Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w);

}  // namespace fastgan
