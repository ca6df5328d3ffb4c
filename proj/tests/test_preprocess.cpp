#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ctaug/errors.hpp"
#include "ctaug/image.hpp"
#include "ctaug/preprocess.hpp"
#include "testutil.hpp"

using namespace ctaug;

namespace {

Image random_image(int64_t h, int64_t w, Rng& rng) {
  Image img(1, h, w);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
  return img;
}

// Independent oracle: dense 2-D convolution with the separable kernel's outer
// product, reflect-101 borders, double precision throughout.
Image dense_gaussian_oracle(const Image& img, const GaussianSpec& spec) {
  const int r = spec.radius;
  std::vector<double> k(static_cast<size_t>(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<size_t>(i + r)] = std::exp(-(double(i) * i) / (2.0 * spec.sigma * spec.sigma));
    sum += k[static_cast<size_t>(i + r)];
  }
  for (auto& v : k) v /= sum;

  const auto mirror = [](int64_t i, int64_t n) {
    if (n == 1) return int64_t{0};
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
  };
  Image out(img.channels, img.height, img.width);
  for (int64_t c = 0; c < img.channels; ++c)
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x) {
        double acc = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            acc += k[size_t(dy + r)] * k[size_t(dx + r)] *
                   double(img.at(c, mirror(y + dy, img.height), mirror(x + dx, img.width)));
        out.at(c, y, x) = static_cast<float>(acc);
      }
  return out;
}

}  // namespace

TEST_CASE("gaussian kernel: normalization across sigma range") {
  for (double sigma : {0.1, 0.5, 1.0, 2.7, 5.0, 10.0}) {
    for (int radius : {1, 2, 5, 11}) {
      const auto k = gaussian_kernel({sigma, radius});
      double sum = 0;
      for (double v : k) sum += v;
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      CHECK(k.size() == size_t(2 * radius + 1));
    }
  }
  CHECK_THROWS_AS(gaussian_kernel({0.0, 2}), DataError);
  CHECK_THROWS_AS(gaussian_kernel({-1.0, 2}), DataError);
  CHECK_THROWS_AS(gaussian_kernel({1.0, 0}), DataError);
}

TEST_CASE("gaussian filter: constant image reproduced exactly") {
  for (float c : {0.0f, 0.25f, 0.5f, 1.0f, 0.1234567f}) {
    Image img(1, 9, 13);
    for (auto& v : img.pixels) v = c;
    const Image out = gaussian_filter(img, {1.0, 2});
    for (size_t i = 0; i < out.pixels.size(); ++i) CHECK(out.pixels[i] == c);
  }
}

TEST_CASE("gaussian filter: center impulse matches closed form") {
  // radius 1, sigma 1: 1-D kernel [g, h, g], g = e^(-1/2)/(2e^(-1/2)+1)
  Image img(1, 5, 5);
  img.at(0, 2, 2) = 1.0f;
  const Image out = gaussian_filter(img, {1.0, 1});

  const double e = std::exp(-0.5);
  const double g = e / (2 * e + 1);
  const double h = 1.0 / (2 * e + 1);
  const double k1d[3] = {g, h, g};
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      CHECK(out.at(0, 2 + dy, 2 + dx) ==
            doctest::Approx(k1d[dy + 1] * k1d[dx + 1]).epsilon(1e-6));
  CHECK(out.at(0, 0, 0) == 0.0f);
}

TEST_CASE("gaussian filter: separable equals dense oracle on random images") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const Image img = random_image(32, 32, rng);
    const GaussianSpec spec{0.5 + rng.uniform() * 2.5, 1 + int(rng.uniform_int(3))};
    const Image fast = gaussian_filter(img, spec);
    const Image slow = dense_gaussian_oracle(img, spec);
    for (size_t i = 0; i < fast.pixels.size(); ++i)
      CHECK(std::abs(fast.pixels[i] - slow.pixels[i]) <= 1e-6);
  }
}

TEST_CASE("presize_and_crop: shape arithmetic") {
  Rng rng(77);
  AugmentPolicy p;
  p.presize_dim = 256;
  p.final_dim = 224;

  const Image big = random_image(512, 512, rng);
  const Image out = presize_and_crop(big, p, CropMode::center);
  CHECK(out.height == 224);
  CHECK(out.width == 224);

  // 300x600 at presize 256 -> intermediate 256x512 (short side factor 256/300)
  CHECK(presize_dims(300, 600, 256) == std::pair<int64_t, int64_t>{256, 512});
  CHECK(presize_dims(600, 300, 256) == std::pair<int64_t, int64_t>{512, 256});
  const Image wide = random_image(300, 600, rng);
  const Image cropped = presize_and_crop(wide, p, CropMode::center);
  CHECK(cropped.height == 224);
  CHECK(cropped.width == 224);

  // random crop is in range and deterministic under a fixed seed
  Rng crop_rng1(9), crop_rng2(9);
  const Image r1 = presize_and_crop(wide, p, CropMode::random, &crop_rng1);
  const Image r2 = presize_and_crop(wide, p, CropMode::random, &crop_rng2);
  for (size_t i = 0; i < r1.pixels.size(); ++i) CHECK(r1.pixels[i] == r2.pixels[i]);
}

TEST_CASE("presize_and_crop: identity when already at size") {
  Rng rng(78);
  AugmentPolicy p;
  p.presize_dim = 224;
  p.final_dim = 224;
  const Image img = random_image(224, 224, rng);
  const Image out = presize_and_crop(img, p, CropMode::center);
  REQUIRE(out.pixels.size() == img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(out.pixels[i] == img.pixels[i]);
}

TEST_CASE("presize_and_crop: rejects tiny images and bad policy") {
  Rng rng(79);
  AugmentPolicy p;
  const Image tiny = random_image(1, 5, rng);
  CHECK_THROWS_AS(presize_and_crop(tiny, p, CropMode::center), DataError);
  AugmentPolicy bad;
  bad.presize_dim = 100;
  bad.final_dim = 128;
  const Image ok = random_image(64, 64, rng);
  CHECK_THROWS_AS(presize_and_crop(ok, bad, CropMode::center), DataError);
}

TEST_CASE("augment: identity policy returns the input exactly") {
  Rng data_rng(80);
  const Image img = random_image(48, 40, data_rng);
  AugmentPolicy p;
  p.flip_prob = 0;
  p.max_rotate_deg = 0;
  p.zoom_lo = p.zoom_hi = 1.0;
  p.warp_magnitude = 0;
  p.lighting_lo = p.lighting_hi = 1.0;
  Rng rng(123);
  const Image out = augment(img, p, rng);
  REQUIRE(out.pixels.size() == img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(out.pixels[i] == img.pixels[i]);
}

TEST_CASE("augment: horizontal flip is an exact involution") {
  Rng data_rng(81);
  const Image img = random_image(16, 17, data_rng);
  AugmentPolicy p;
  p.flip_prob = 1.0;  // always flip
  p.max_rotate_deg = 0;
  p.zoom_lo = p.zoom_hi = 1.0;
  p.warp_magnitude = 0;
  p.lighting_lo = p.lighting_hi = 1.0;
  Rng rng1(1), rng2(2);
  const Image once = augment(img, p, rng1);
  const Image twice = augment(once, p, rng2);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(twice.pixels[i] == img.pixels[i]);
}

TEST_CASE("augment: fixed seed reproduces bit-exactly; output stays in range") {
  Rng data_rng(82);
  const Image img = random_image(32, 32, data_rng);
  AugmentPolicy p;  // defaults exercise every transform
  Rng rng1(555), rng2(555);
  const Image a = augment(img, p, rng1);
  const Image b = augment(img, p, rng2);
  REQUIRE(a.pixels.size() == b.pixels.size());
  for (size_t i = 0; i < a.pixels.size(); ++i) CHECK(a.pixels[i] == b.pixels[i]);
  CHECK(a.height == img.height);
  CHECK(a.width == img.width);
  for (float v : a.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("to_model_tensor: replication and standardization") {
  Image zero(1, 4, 4);
  const Image z3 = to_model_tensor(zero, {0, 0, 0}, {1, 1, 1});
  CHECK(z3.channels == 3);
  for (float v : z3.pixels) CHECK(v == 0.0f);

  Image half(1, 4, 4);
  for (auto& v : half.pixels) v = 0.5f;
  const Image centered = to_model_tensor(half, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5});
  for (float v : centered.pixels) CHECK(v == 0.0f);

  Rng rng(83);
  const Image rnd = random_image(8, 8, rng);
  const std::array<double, 3> mean{0.2, 0.5, 0.7};
  const std::array<double, 3> stddev{0.5, 0.25, 2.0};
  const Image out = to_model_tensor(rnd, mean, stddev);
  double mu = 0;
  for (float v : rnd.pixels) mu += v;
  mu /= double(rnd.pixels.size());
  for (int64_t c = 0; c < 3; ++c) {
    double cmu = 0;
    for (int64_t y = 0; y < 8; ++y)
      for (int64_t x = 0; x < 8; ++x) cmu += out.at(c, y, x);
    cmu /= 64.0;
    CHECK(cmu == doctest::Approx((mu - mean[size_t(c)]) / stddev[size_t(c)])
                     .epsilon(1e-6));
  }

  CHECK_THROWS_AS(to_model_tensor(rnd, mean, {0.0, 1, 1}), DataError);
}

TEST_CASE("cache_file_name is deterministic and parameter-sensitive") {
  const GaussianSpec s1{1.0, 2};
  const GaussianSpec s2{1.5, 2};
  CHECK(cache_file_name("/a/b.png", s1) == cache_file_name("/a/b.png", s1));
  CHECK(cache_file_name("/a/b.png", s1) != cache_file_name("/a/b.png", s2));
  CHECK(cache_file_name("/a/b.png", s1) != cache_file_name("/a/c.png", s1));
  CHECK(cache_file_name("/a/b.png", s1).size() == 64 + 4);
}

TEST_CASE("png round-trip through 16-bit cache format") {
  testutil::TempDir tmp("png");
  Rng rng(84);
  const Image img = random_image(20, 24, rng);
  const auto path = tmp.path() / "x.png";
  save_png_gray16(path, img);
  const Image back = load_image_gray(path);
  REQUIRE(back.height == img.height);
  REQUIRE(back.width == img.width);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 1.0 / 65535.0);
}

#include <jpeglib.h>

namespace {

void write_jpeg_gray(const std::filesystem::path& path, const Image& img,
                     int quality) {
  std::vector<uint8_t> row(static_cast<size_t>(img.width));
  FILE* f = std::fopen(path.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  jpeg_compress_struct cinfo{};
  jpeg_error_mgr err{};
  cinfo.err = jpeg_std_error(&err);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 1;
  cinfo.in_color_space = JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  for (int64_t y = 0; y < img.height; ++y) {
    for (int64_t x = 0; x < img.width; ++x)
      row[static_cast<size_t>(x)] =
          static_cast<uint8_t>(std::clamp(img.at(0, y, x), 0.0f, 1.0f) * 255.0f + 0.5f);
    uint8_t* rp = row.data();
    jpeg_write_scanlines(&cinfo, &rp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(f);
}

}  // namespace

TEST_CASE("jpeg input decodes to grayscale within lossy tolerance") {
  testutil::TempDir tmp("jpeg");
  Rng rng(85);
  // smooth image so JPEG stays close
  Image img(1, 24, 24);
  for (int64_t y = 0; y < 24; ++y)
    for (int64_t x = 0; x < 24; ++x)
      img.at(0, y, x) = static_cast<float>(0.2 + 0.5 * (double(x) / 24.0));
  const auto path = tmp.path() / "x.jpg";
  write_jpeg_gray(path, img, 95);
  const Image back = load_image_gray(path);
  REQUIRE(back.height == 24);
  REQUIRE(back.width == 24);
  double max_err = 0;
  for (size_t i = 0; i < img.pixels.size(); ++i)
    max_err = std::max(max_err, double(std::abs(back.pixels[i] - img.pixels[i])));
  CHECK(max_err < 0.05);
}

TEST_CASE("rgb png input reduces to luma") {
  testutil::TempDir tmp("rgbpng");
  const int64_t w = 8, h = 4;
  std::vector<uint8_t> rgb(static_cast<size_t>(w * h * 3));
  Rng rng(86);
  for (auto& v : rgb) v = static_cast<uint8_t>(rng.uniform_int(256));
  const auto path = tmp.path() / "rgb.png";
  save_png_rgb8(path, w, h, rgb);
  const Image gray = load_image_gray(path);
  REQUIRE(gray.channels == 1);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const size_t o = static_cast<size_t>((y * w + x) * 3);
      const double expected = (0.299 * rgb[o] + 0.587 * rgb[o + 1] +
                               0.114 * rgb[o + 2]) / 255.0;
      CHECK(std::abs(gray.at(0, y, x) - expected) <= 2e-3);
    }
}

TEST_CASE("augment policy validation") {
  Rng rng(90);
  const Image img = random_image(16, 16, rng);
  AugmentPolicy p;
  p.zoom_lo = 0.0;  // zoom must keep 0 < lo <= 1
  CHECK_THROWS_AS(augment(img, p, rng), DataError);
  p = AugmentPolicy{};
  p.zoom_hi = 0.9;  // hi must be >= 1
  CHECK_THROWS_AS(augment(img, p, rng), DataError);
  p = AugmentPolicy{};
  p.flip_prob = 1.5;
  CHECK_THROWS_AS(augment(img, p, rng), DataError);
  p = AugmentPolicy{};
  p.lighting_lo = 1.3;
  p.lighting_hi = 0.8;
  CHECK_THROWS_AS(augment(img, p, rng), DataError);
}
