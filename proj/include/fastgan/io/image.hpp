#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fastgan/tensor.hpp"

namespace fastgan::io {

// 8-bit interleaved RGB.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3
};

// Decodes PNG or baseline JPEG (by signature). Grayscale/alpha are converted
// to RGB. Throws IoError on failure.
RgbImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& img);

// [3,H,W] or [1,3,H,W] in [-1,1] -> 8-bit, round(clamp((x+1)/2) * 255).
RgbImage tensor_to_image(const Tensor& chw);
// 8-bit -> [1,3,H,W] in [-1,1].
Tensor image_to_tensor(const RgbImage& img);

std::uint8_t quantize(Real v);

// Tiles [N,3,H,W] images row-major into a grid with `cols` columns.
RgbImage make_grid(const Tensor& images, int cols);

}  // namespace fastgan::io
