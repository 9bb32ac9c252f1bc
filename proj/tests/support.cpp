#include "support.hpp"

#include <cmath>

#include "fastgan/io/image.hpp"

namespace fastgan::testing {

void write_synthetic_images(const std::filesystem::path& dir, int n, int width, int height,
                            std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  for (int k = 0; k < n; ++k) {
    io::RgbImage img{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
    const double bg[3] = {rng.uniform(0, 80), rng.uniform(40, 120), rng.uniform(60, 200)};
    const double fg[3] = {rng.uniform(150, 255), rng.uniform(80, 255), rng.uniform(0, 120)};
    const double cx = rng.uniform(0.3, 0.7) * width, cy = rng.uniform(0.3, 0.7) * height;
    const double rad = rng.uniform(0.15, 0.3) * std::min(width, height);
    const double stripe = rng.uniform(4, 10);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double d = std::hypot(x - cx, y - cy);
        const double shade = 0.75 + 0.25 * std::sin((x + y) / stripe);
        for (int c = 0; c < 3; ++c) {
          const double v = d < rad ? fg[c] * shade : bg[c] + 40.0 * y / height;
          img.pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
              static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
      }
    io::write_png(dir / ("img_" + std::to_string(100 + k) + ".png"), img);
  }
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fastgan_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fastgan::testing
