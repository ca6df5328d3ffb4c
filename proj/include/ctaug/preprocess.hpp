#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "ctaug/image.hpp"
#include "ctaug/rng.hpp"

namespace ctaug {

struct GaussianSpec {
  double sigma = 1.0;
  int radius = 2;  // kernel size = 2*radius + 1
};

// Normalized 1-D kernel, k(i) = exp(-i^2 / (2 sigma^2)), sum exactly handled
// in double. Throws on sigma <= 0 or radius < 1.
std::vector<double> gaussian_kernel(const GaussianSpec& spec);

// Separable convolution, reflect-101 borders, double accumulation per tap so
// constant images reproduce bit-exactly after the float round-trip.
Image gaussian_filter(const Image& img, const GaussianSpec& spec);

struct AugmentPolicy {
  double flip_prob = 0.5;        // horizontal only
  double max_rotate_deg = 10.0;
  double zoom_lo = 1.0;          // 0 < lo <= 1 <= hi
  double zoom_hi = 1.1;
  double warp_magnitude = 0.2;   // corner displacement <= warp * dim
  double lighting_lo = 0.8;      // multiplicative brightness/contrast bounds
  double lighting_hi = 1.2;
  int presize_dim = 256;
  int final_dim = 224;

  void validate() const;  // throws DataError on out-of-range fields
};

enum class CropMode { center, random };

// Intermediate (height, width) after scaling the short side to presize_dim.
std::pair<int64_t, int64_t> presize_dims(int64_t height, int64_t width,
                                         int64_t presize_dim);

// Bilinear resize so the short side equals presize_dim, then crop to
// final_dim x final_dim. rng is only consulted for CropMode::random.
Image presize_and_crop(const Image& img, const AugmentPolicy& policy,
                       CropMode mode, Rng* rng = nullptr);

// In order: horizontal flip, rotation, zoom, perspective warp, lighting.
// Shape-preserving; output clamped to [0,1]. A degenerate policy is the
// identity. The rng draw layout is fixed regardless of policy values.
Image augment(const Image& img, const AugmentPolicy& policy, Rng& rng);

// Single-channel [0,1] -> 3 replicated channels, per-channel (x - mean)/std.
Image to_model_tensor(const Image& img, const std::array<double, 3>& mean,
                      const std::array<double, 3>& std);

// Cache file name for a preprocessed slice: sha256 over source path + filter
// parameters, ".png" suffix.
std::string cache_file_name(const std::string& source_path,
                            const GaussianSpec& spec);

}  // namespace ctaug
