#include "fastgan/io/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>

namespace fastgan::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("PNG decode failed for " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("PNG decode failed for " + path.string() + ": " + msg);
  }
  return out;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RgbImage read_jpeg(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  jpeg_decompress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  RgbImage out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("JPEG decode failed for " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), sizeof(sig));
  in.close();
  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (std::equal(sig, sig + 8, kPng)) return read_png(path);
  if (sig[0] == 0xFF && sig[1] == 0xD8) return read_jpeg(path);
  throw IoError("unsupported image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("PNG encode failed for " + path.string() + ": " + image.message);
  }
}

std::uint8_t quantize(Real v) {
  const double u = std::clamp((static_cast<double>(v) + 1.0) * 0.5, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(u * 255.0));
}

RgbImage tensor_to_image(const Tensor& t) {
  const bool batched = t.ndim() == 4;
  if (!(t.ndim() == 3 || (batched && t.dim(0) == 1)) || t.dim(-3) != 3) {
    throw ShapeError("tensor_to_image: expected [3,H,W] or [1,3,H,W], got " + shape_str(t.shape()));
  }
  RgbImage img;
  img.height = static_cast<int>(t.dim(-2));
  img.width = static_cast<int>(t.dim(-1));
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(plane * 3);
  const auto d = t.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c) img.pixels[p * 3 + c] = quantize(d[c * plane + p]);
  return img;
}

Tensor image_to_tensor(const RgbImage& img) {
  Tensor t({1, 3, img.height, img.width});
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  auto d = t.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      d[c * plane + p] = static_cast<Real>(img.pixels[p * 3 + c] / 255.0 * 2.0 - 1.0);
  return t;
}

RgbImage make_grid(const Tensor& images, int cols) {
  if (images.ndim() != 4 || images.dim(1) != 3) {
    throw ShapeError("make_grid: expected [N,3,H,W], got " + shape_str(images.shape()));
  }
  const auto n = images.dim(0), h = images.dim(2), w = images.dim(3);
  cols = std::max(1, cols);
  const std::int64_t rows = (n + cols - 1) / cols;
  RgbImage grid;
  grid.width = static_cast<int>(w * cols);
  grid.height = static_cast<int>(h * rows);
  grid.pixels.assign(static_cast<std::size_t>(grid.width) * grid.height * 3, 0);
  const auto d = images.data();
  for (std::int64_t k = 0; k < n; ++k) {
    const std::int64_t oy = (k / cols) * h, ox = (k % cols) * w;
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j)
          grid.pixels[static_cast<std::size_t>(((oy + i) * grid.width + ox + j) * 3 + c)] =
              quantize(d[static_cast<std::size_t>(((k * 3 + c) * h + i) * w + j)]);
  }
  return grid;
}

}  // namespace fastgan::io
