#include "ctaug/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ctaug/errors.hpp"
#include "ctaug/sha256.hpp"

namespace ctaug {

namespace {

constexpr double kPi = 3.14159265358979323846;

// reflect-101: ..., 2, 1, | 0, 1, ..., n-1, | n-2, n-3, ...
int64_t mirror_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

double mirror_coord(double x, double n) {
  if (n <= 1.0) return 0.0;
  const double hi = n - 1.0;
  while (x < 0.0 || x > hi) {
    if (x < 0.0) x = -x;
    if (x > hi) x = 2.0 * hi - x;
  }
  return x;
}

void require_valid(const Image& img, const char* op) {
  if (!img.valid()) throw DataError(std::string(op) + ": invalid image");
}

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
      c[i][j] = s;
    }
  return c;
}

Mat3 mat3_inverse(const Mat3& m) {
  const double det =
      m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
      m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
      m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-12) throw DataError("augment: singular transform");
  const double inv = 1.0 / det;
  Mat3 r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv;
  return r;
}

// Homography mapping the four src corners onto dst corners (8x8 solve).
Mat3 homography_from_corners(const std::array<std::array<double, 2>, 4>& src,
                             const std::array<std::array<double, 2>, 4>& dst) {
  double a[8][9] = {};
  for (int p = 0; p < 4; ++p) {
    const double x = src[p][0], y = src[p][1];
    const double u = dst[p][0], v = dst[p][1];
    double* r0 = a[2 * p];
    double* r1 = a[2 * p + 1];
    r0[0] = x; r0[1] = y; r0[2] = 1;
    r0[6] = -u * x; r0[7] = -u * y; r0[8] = u;
    r1[3] = x; r1[4] = y; r1[5] = 1;
    r1[6] = -v * x; r1[7] = -v * y; r1[8] = v;
  }
  // Gaussian elimination with partial pivoting
  for (int col = 0; col < 8; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 8; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12)
      throw DataError("augment: degenerate warp corners");
    if (pivot != col)
      for (int c = 0; c < 9; ++c) std::swap(a[col][c], a[pivot][c]);
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
    }
  }
  Mat3 h{};
  for (int i = 0; i < 8; ++i) {
    const double v = a[i][8] / a[i][i];
    h[i / 3][i % 3] = v;
  }
  h[2][2] = 1.0;
  return h;
}

float sample_bilinear_reflect(const Image& img, int64_t c, double y, double x) {
  y = mirror_coord(y, static_cast<double>(img.height));
  x = mirror_coord(x, static_cast<double>(img.width));
  const auto y0 = static_cast<int64_t>(std::floor(y));
  const auto x0 = static_cast<int64_t>(std::floor(x));
  const int64_t y1 = std::min(y0 + 1, img.height - 1);
  const int64_t x1 = std::min(x0 + 1, img.width - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const double v =
      (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
      fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
  return static_cast<float>(v);
}

Image resize_bilinear(const Image& img, int64_t out_h, int64_t out_w) {
  if (img.height == out_h && img.width == out_w) return img;
  Image out(img.channels, out_h, out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  for (int64_t c = 0; c < img.channels; ++c)
    for (int64_t y = 0; y < out_h; ++y) {
      const double src_y =
          std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                     static_cast<double>(img.height - 1));
      for (int64_t x = 0; x < out_w; ++x) {
        const double src_x =
            std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                       static_cast<double>(img.width - 1));
        out.at(c, y, x) = sample_bilinear_reflect(img, c, src_y, src_x);
      }
    }
  return out;
}

Image crop(const Image& img, int64_t top, int64_t left, int64_t size) {
  Image out(img.channels, size, size);
  for (int64_t c = 0; c < img.channels; ++c)
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x)
        out.at(c, y, x) = img.at(c, top + y, left + x);
  return out;
}

}  // namespace

void AugmentPolicy::validate() const {
  if (flip_prob < 0.0 || flip_prob > 1.0)
    throw DataError("augment: flip_prob must be in [0,1]");
  if (max_rotate_deg < 0.0)
    throw DataError("augment: max_rotate_deg must be non-negative");
  if (!(zoom_lo > 0.0 && zoom_lo <= 1.0 && zoom_hi >= 1.0))
    throw DataError("augment: zoom range must satisfy 0 < lo <= 1 <= hi");
  if (warp_magnitude < 0.0)
    throw DataError("augment: warp_magnitude must be non-negative");
  if (!(lighting_lo > 0.0 && lighting_lo <= lighting_hi))
    throw DataError("augment: lighting range must satisfy 0 < lo <= hi");
  if (presize_dim < 2 || final_dim < 1 || final_dim > presize_dim)
    throw DataError("augment: need 1 <= final_dim <= presize_dim");
}

std::vector<double> gaussian_kernel(const GaussianSpec& spec) {
  if (spec.sigma <= 0.0) throw DataError("gaussian: sigma must be positive");
  if (spec.radius < 1) throw DataError("gaussian: radius must be >= 1");
  std::vector<double> k(static_cast<size_t>(2 * spec.radius + 1));
  double sum = 0.0;
  for (int i = -spec.radius; i <= spec.radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) /
                              (2.0 * spec.sigma * spec.sigma));
    k[static_cast<size_t>(i + spec.radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

Image gaussian_filter(const Image& img, const GaussianSpec& spec) {
  require_valid(img, "gaussian_filter");
  const auto kernel = gaussian_kernel(spec);
  const int r = spec.radius;
  Image tmp(img.channels, img.height, img.width);
  Image out(img.channels, img.height, img.width);
  for (int64_t c = 0; c < img.channels; ++c) {
    // horizontal pass
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          acc += kernel[static_cast<size_t>(i + r)] *
                 static_cast<double>(img.at(c, y, mirror_index(x + i, img.width)));
        tmp.at(c, y, x) = static_cast<float>(acc);
      }
    // vertical pass
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          acc += kernel[static_cast<size_t>(i + r)] *
                 static_cast<double>(tmp.at(c, mirror_index(y + i, img.height), x));
        out.at(c, y, x) = static_cast<float>(acc);
      }
  }
  return out;
}

std::pair<int64_t, int64_t> presize_dims(int64_t height, int64_t width,
                                         int64_t presize_dim) {
  if (height <= width)
    return {presize_dim,
            static_cast<int64_t>(std::llround(
                static_cast<double>(width) * static_cast<double>(presize_dim) /
                static_cast<double>(height)))};
  return {static_cast<int64_t>(std::llround(
              static_cast<double>(height) * static_cast<double>(presize_dim) /
              static_cast<double>(width))),
          presize_dim};
}

Image presize_and_crop(const Image& img, const AugmentPolicy& policy,
                       CropMode mode, Rng* rng) {
  require_valid(img, "presize_and_crop");
  if (img.height < 2 || img.width < 2)
    throw DataError("presize_and_crop: image smaller than 2x2");
  if (policy.final_dim > policy.presize_dim)
    throw DataError("presize_and_crop: final_dim exceeds presize_dim");
  if (mode == CropMode::random && rng == nullptr)
    throw DataError("presize_and_crop: random crop needs an rng");

  const auto [out_h, out_w] =
      presize_dims(img.height, img.width, policy.presize_dim);
  const Image resized = resize_bilinear(img, out_h, out_w);

  const int64_t final_dim = policy.final_dim;
  int64_t top, left;
  if (mode == CropMode::center) {
    top = (resized.height - final_dim) / 2;
    left = (resized.width - final_dim) / 2;
  } else {
    top = rng->uniform_int(resized.height - final_dim + 1);
    left = rng->uniform_int(resized.width - final_dim + 1);
  }
  if (resized.height == final_dim && resized.width == final_dim) return resized;
  return crop(resized, top, left, final_dim);
}

Image augment(const Image& img, const AugmentPolicy& policy, Rng& rng) {
  require_valid(img, "augment");
  policy.validate();

  // Fixed draw layout: flip, angle, zoom, 8 warp offsets, contrast, brightness.
  const bool flip = rng.uniform() < policy.flip_prob;
  const double angle =
      rng.uniform(-policy.max_rotate_deg, policy.max_rotate_deg) * kPi / 180.0;
  const double zoom = rng.uniform(policy.zoom_lo, policy.zoom_hi);
  const double max_disp =
      policy.warp_magnitude * static_cast<double>(std::min(img.height, img.width));
  std::array<std::array<double, 2>, 4> disp{};
  for (auto& d : disp) {
    d[0] = rng.uniform(-max_disp, max_disp);
    d[1] = rng.uniform(-max_disp, max_disp);
  }
  const double contrast = rng.uniform(policy.lighting_lo, policy.lighting_hi);
  const double brightness = rng.uniform(policy.lighting_lo, policy.lighting_hi);

  Image work = img;
  if (flip) {
    for (int64_t c = 0; c < work.channels; ++c)
      for (int64_t y = 0; y < work.height; ++y)
        for (int64_t x = 0; x < work.width / 2; ++x)
          std::swap(work.at(c, y, x), work.at(c, y, work.width - 1 - x));
  }

  const bool warp_active = policy.warp_magnitude > 0.0;
  const bool geom_active = angle != 0.0 || zoom != 1.0 || warp_active;
  if (geom_active) {
    const double cx = (static_cast<double>(work.width) - 1.0) / 2.0;
    const double cy = (static_cast<double>(work.height) - 1.0) / 2.0;
    const Mat3 to_center = {{{1, 0, -cx}, {0, 1, -cy}, {0, 0, 1}}};
    const Mat3 from_center = {{{1, 0, cx}, {0, 1, cy}, {0, 0, 1}}};
    const double ca = std::cos(angle), sa = std::sin(angle);
    const Mat3 rot = {{{ca, -sa, 0}, {sa, ca, 0}, {0, 0, 1}}};
    const Mat3 zm = {{{zoom, 0, 0}, {0, zoom, 0}, {0, 0, 1}}};
    Mat3 h = mat3_mul(from_center, mat3_mul(zm, mat3_mul(rot, to_center)));
    if (warp_active) {
      const double w1 = static_cast<double>(work.width) - 1.0;
      const double h1 = static_cast<double>(work.height) - 1.0;
      const std::array<std::array<double, 2>, 4> corners = {
          {{0, 0}, {w1, 0}, {0, h1}, {w1, h1}}};
      std::array<std::array<double, 2>, 4> moved = corners;
      for (int i = 0; i < 4; ++i) {
        moved[i][0] += disp[i][0];
        moved[i][1] += disp[i][1];
      }
      h = mat3_mul(homography_from_corners(corners, moved), h);
    }
    const Mat3 inv = mat3_inverse(h);
    Image resampled(work.channels, work.height, work.width);
    for (int64_t y = 0; y < work.height; ++y)
      for (int64_t x = 0; x < work.width; ++x) {
        const double dx = static_cast<double>(x);
        const double dy = static_cast<double>(y);
        const double sw = inv[2][0] * dx + inv[2][1] * dy + inv[2][2];
        const double sx = (inv[0][0] * dx + inv[0][1] * dy + inv[0][2]) / sw;
        const double sy = (inv[1][0] * dx + inv[1][1] * dy + inv[1][2]) / sw;
        for (int64_t c = 0; c < work.channels; ++c)
          resampled.at(c, y, x) = sample_bilinear_reflect(work, c, sy, sx);
      }
    work = std::move(resampled);
  }

  if (contrast != 1.0 || brightness != 1.0) {
    for (auto& v : work.pixels) {
      const double lit =
          ((static_cast<double>(v) - 0.5) * contrast + 0.5) * brightness;
      v = static_cast<float>(std::clamp(lit, 0.0, 1.0));
    }
  } else {
    for (auto& v : work.pixels) v = std::clamp(v, 0.0f, 1.0f);
  }
  return work;
}

Image to_model_tensor(const Image& img, const std::array<double, 3>& mean,
                      const std::array<double, 3>& std) {
  require_valid(img, "to_model_tensor");
  if (img.channels != 1)
    throw DataError("to_model_tensor expects a single-channel image");
  for (double s : std)
    if (s == 0.0) throw DataError("to_model_tensor: zero std");
  Image out(3, img.height, img.width);
  for (int64_t c = 0; c < 3; ++c) {
    const double m = mean[static_cast<size_t>(c)];
    const double s = std[static_cast<size_t>(c)];
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x)
        out.at(c, y, x) =
            static_cast<float>((static_cast<double>(img.at(0, y, x)) - m) / s);
  }
  return out;
}

std::string cache_file_name(const std::string& source_path,
                            const GaussianSpec& spec) {
  std::ostringstream key;
  key << source_path << "|sigma=" << spec.sigma << "|radius=" << spec.radius;
  return sha256_hex(key.str()) + ".png";
}

}  // namespace ctaug
