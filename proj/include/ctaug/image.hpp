#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ctaug {

// Planar CHW float image, values nominally in [0,1].
struct Image {
  int64_t channels = 0;
  int64_t height = 0;
  int64_t width = 0;
  std::vector<float> pixels;  // channels * height * width

  Image() = default;
  Image(int64_t c, int64_t h, int64_t w)
      : channels(c), height(h), width(w),
        pixels(static_cast<size_t>(c * h * w), 0.0f) {}

  float& at(int64_t c, int64_t y, int64_t x) {
    return pixels[static_cast<size_t>((c * height + y) * width + x)];
  }
  float at(int64_t c, int64_t y, int64_t x) const {
    return pixels[static_cast<size_t>((c * height + y) * width + x)];
  }
  int64_t plane_size() const { return height * width; }
  bool valid() const {
    return channels >= 1 && height >= 1 && width >= 1 &&
           pixels.size() == static_cast<size_t>(channels * height * width);
  }
};

// Decodes PNG or JPEG (sniffed by magic bytes) to single-channel [0,1].
// RGB sources are reduced to Rec.601 luma.
Image load_image_gray(const std::filesystem::path& path);

// 16-bit grayscale PNG; pixels clamped to [0,1].
void save_png_gray16(const std::filesystem::path& path, const Image& img);

// 8-bit RGB PNG from interleaved rows (plot output).
void save_png_rgb8(const std::filesystem::path& path, int64_t width,
                   int64_t height, const std::vector<uint8_t>& rgb);

}  // namespace ctaug
