#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fastgan/io/image.hpp"
#include "fastgan/rng.hpp"

namespace fastgan::io {

struct Dataset {
  std::filesystem::path root;
  int resolution = 0;
  std::vector<std::string> names;  // lexicographic
  std::vector<Tensor> images;      // [3,R,R] in [-1,1]

  std::size_t size() const { return images.size(); }
};

// Center-crop to square, bilinear resize to `resolution`, scale to [-1,1].
Tensor preprocess(const RgbImage& img, int resolution);

// Loads every decodable PNG/JPEG directly under `root`. Undecodable files are
// skipped with a warning; an empty result is an IoError.
Dataset load_dataset(const std::filesystem::path& root, int resolution);

// Uniform draws with replacement, each flipped horizontally with p = 0.5.
Tensor sample_batch(const Dataset& ds, int batch_size, Rng& rng);

// Mirrors the last axis.
Tensor flip_horizontal(const Tensor& x);
// [3,H,W] tensors -> [N,3,H,W].
Tensor stack(const std::vector<Tensor>& items);
// Sample k of a batch as [1,C,H,W].
Tensor slice(const Tensor& batch, std::int64_t k);

}  // namespace fastgan::io
