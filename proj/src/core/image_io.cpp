#include "ctaug/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "ctaug/errors.hpp"

namespace ctaug {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw DataError("cannot open file: " + path.string());
  return f;
}

Image gray_from_rows(const std::vector<std::vector<uint8_t>>& rows,
                     int64_t width, int64_t height, int channels,
                     int bit_depth) {
  Image img(1, height, width);
  const float denom = bit_depth == 16 ? 65535.0f : 255.0f;
  for (int64_t y = 0; y < height; ++y) {
    const uint8_t* row = rows[static_cast<size_t>(y)].data();
    for (int64_t x = 0; x < width; ++x) {
      float v;
      if (channels == 1) {
        if (bit_depth == 16) {
          const uint16_t raw = static_cast<uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
          v = static_cast<float>(raw) / denom;
        } else {
          v = static_cast<float>(row[x]) / denom;
        }
      } else {
        // Rec.601 luma
        float r, g, b;
        if (bit_depth == 16) {
          r = static_cast<float>((row[6 * x] << 8) | row[6 * x + 1]) / denom;
          g = static_cast<float>((row[6 * x + 2] << 8) | row[6 * x + 3]) / denom;
          b = static_cast<float>((row[6 * x + 4] << 8) | row[6 * x + 5]) / denom;
        } else {
          r = static_cast<float>(row[3 * x]) / denom;
          g = static_cast<float>(row[3 * x + 1]) / denom;
          b = static_cast<float>(row[3 * x + 2]) / denom;
        }
        v = 0.299f * r + 0.587f * g + 0.114f * b;
      }
      img.at(0, y, x) = v;
    }
  }
  return img;
}

Image load_png_gray(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png init failed: " + path.string());
  }
  std::vector<std::vector<uint8_t>> rows;
  int64_t width = 0, height = 0;
  int channels = 0, bit_depth = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png decode failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  bit_depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: unsupported channel count in " + path.string());
  }
  const size_t rowbytes = png_get_rowbytes(png, info);
  rows.assign(static_cast<size_t>(height), std::vector<uint8_t>(rowbytes));
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(height));
  for (size_t y = 0; y < rows.size(); ++y) row_ptrs[y] = rows[y].data();
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return gray_from_rows(rows, width, height, channels, bit_depth);
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

Image load_jpeg_gray(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  jpeg_decompress_struct cinfo{};
  JpegErrorMgr err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  std::vector<std::vector<uint8_t>> rows;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DataError("jpeg decode failed: " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_GRAYSCALE;
  jpeg_start_decompress(&cinfo);
  const int64_t width = cinfo.output_width;
  const int64_t height = cinfo.output_height;
  rows.assign(static_cast<size_t>(height),
              std::vector<uint8_t>(static_cast<size_t>(width)));
  while (cinfo.output_scanline < cinfo.output_height) {
    uint8_t* row = rows[cinfo.output_scanline].data();
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return gray_from_rows(rows, width, height, 1, 8);
}

}  // namespace

Image load_image_gray(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  uint8_t magic[4] = {0, 0, 0, 0};
  const size_t got = std::fread(magic, 1, sizeof(magic), f.get());
  f.reset();
  if (got >= 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' &&
      magic[3] == 'G')
    return load_png_gray(path);
  if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8)
    return load_jpeg_gray(path);
  throw DataError("not a PNG or JPEG file: " + path.string());
}

void save_png_gray16(const std::filesystem::path& path, const Image& img) {
  if (!img.valid() || img.channels != 1)
    throw DataError("save_png_gray16 expects a valid single-channel image");
  // fill rows before entering libpng's longjmp scope
  std::vector<std::vector<uint8_t>> rows(
      static_cast<size_t>(img.height),
      std::vector<uint8_t>(static_cast<size_t>(img.width) * 2));
  for (int64_t y = 0; y < img.height; ++y) {
    uint8_t* row = rows[static_cast<size_t>(y)].data();
    for (int64_t x = 0; x < img.width; ++x) {
      float v = img.at(0, y, x);
      v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
      const uint16_t q = static_cast<uint16_t>(v * 65535.0f + 0.5f);
      row[2 * x] = static_cast<uint8_t>(q >> 8);  // network byte order
      row[2 * x + 1] = static_cast<uint8_t>(q & 0xff);
    }
  }
  FilePtr f = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png init failed: " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png encode failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (auto& row : rows) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_png_rgb8(const std::filesystem::path& path, int64_t width,
                   int64_t height, const std::vector<uint8_t>& rgb) {
  if (rgb.size() != static_cast<size_t>(width * height * 3))
    throw DataError("save_png_rgb8: buffer size mismatch");
  FilePtr f = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png init failed: " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png encode failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t y = 0; y < height; ++y)
    png_write_row(png,
                  const_cast<png_bytep>(rgb.data() + y * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace ctaug
