#include "fastgan/io/dataset.hpp"

#include <algorithm>
#include <cctype>

#include "fastgan/log.hpp"
#include "fastgan/resize.hpp"

namespace fastgan::io {
namespace {

bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

Tensor preprocess(const RgbImage& img, int resolution) {
  if (img.width <= 0 || img.height <= 0) throw IoError("empty image");
  const int side = std::min(img.width, img.height);
  const int x0 = (img.width - side) / 2;
  const int y0 = (img.height - side) / 2;
  Tensor sq({1, 3, side, side});
  auto d = sq.data();
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < 3; ++c) {
        const auto v = img.pixels[(static_cast<std::size_t>(y0 + y) * img.width + x0 + x) * 3 + c];
        d[c * plane + static_cast<std::size_t>(y) * side + x] = static_cast<Real>(v / 255.0 * 2.0 - 1.0);
      }
  const Tensor out = side == resolution ? sq : resize_bilinear(sq, resolution, resolution);
  return Tensor({3, resolution, resolution}, std::vector<Real>(out.data().begin(), out.data().end()));
}

Dataset load_dataset(const std::filesystem::path& root, int resolution) {
  if (!std::filesystem::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.is_regular_file() && has_image_extension(e.path())) files.push_back(e.path());
  }
  std::ranges::sort(files, [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });

  Dataset ds;
  ds.root = root;
  ds.resolution = resolution;
  for (const auto& f : files) {
    try {
      ds.images.push_back(preprocess(read_image(f), resolution));
      ds.names.push_back(f.filename().string());
    } catch (const IoError& e) {
      log::warn("skipping {}: {}", f.string(), e.what());
    }
  }
  if (ds.images.empty()) throw IoError("no decodable PNG/JPEG images in " + root.string());
  log::info("loaded {} images from {} at {}x{}", ds.size(), root.string(), resolution, resolution);
  return ds;
}

Tensor flip_horizontal(const Tensor& x) {
  Tensor y(x.shape());
  const auto w = x.dim(-1);
  const auto src = x.data();
  auto dst = y.data();
  for (std::int64_t row = 0; row < x.numel() / w; ++row)
    for (std::int64_t j = 0; j < w; ++j) dst[row * w + j] = src[row * w + (w - 1 - j)];
  return y;
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  Shape shape = items.front().shape();
  shape.insert(shape.begin(), static_cast<std::int64_t>(items.size()));
  std::vector<Real> values;
  values.reserve(static_cast<std::size_t>(shape_numel(shape)));
  for (const auto& t : items) {
    if (t.shape() != items.front().shape()) throw ShapeError("stack: shapes differ");
    values.insert(values.end(), t.data().begin(), t.data().end());
  }
  return Tensor(std::move(shape), std::move(values));
}

Tensor slice(const Tensor& batch, std::int64_t k) {
  Shape shape = batch.shape();
  const std::int64_t per = batch.numel() / shape[0];
  shape[0] = 1;
  const auto src = batch.data().subspan(static_cast<std::size_t>(k * per), static_cast<std::size_t>(per));
  return Tensor(std::move(shape), std::vector<Real>(src.begin(), src.end()));
}

Tensor sample_batch(const Dataset& ds, int batch_size, Rng& rng) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (ds.images.empty()) throw IoError("sample_batch on an empty dataset");
  std::vector<Tensor> items;
  for (int k = 0; k < batch_size; ++k) {
    const auto idx = rng.uniform_int(0, static_cast<std::int64_t>(ds.size()) - 1);
    const Tensor& img = ds.images[static_cast<std::size_t>(idx)];
    items.push_back(rng.bernoulli(0.5) ? flip_horizontal(img) : img);
  }
  return stack(items);
}

}  // namespace fastgan::io
