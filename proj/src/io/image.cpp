#include "cinegen/io/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace cinegen::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Image& img) {
  check_as<IoError>(img.width > 0 && img.height > 0 &&
                        img.pixels.size() ==
                            static_cast<size_t>(img.width) * img.height * 3,
                    "write_png: malformed image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  check_as<IoError>(fp != nullptr, "write_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            nullptr);
  check_as<IoError>(png != nullptr, "write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("write_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png: libpng failure for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] =
        const_cast<png_bytep>(img.pixels.data() + static_cast<size_t>(y) * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  check_as<IoError>(fp != nullptr, "read_png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           nullptr);
  check_as<IoError>(png != nullptr, "read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("read_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: libpng failure for " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  // normalize any input to 8-bit RGB
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  Image img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.resize(static_cast<size_t>(img.width) * img.height * 3);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] =
        img.pixels.data() + static_cast<size_t>(y) * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Tensor image_to_tensor(const Image& img) {
  Tensor t({3, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        t(c, y, x) =
            img.pixels[(static_cast<size_t>(y) * img.width + x) * 3 + c] / 255.0;
  return t;
}

Image tensor_to_image(const Tensor& chw) {
  check_as<ShapeError>(chw.rank() == 3 && (chw.dim(0) == 3 || chw.dim(0) == 1),
                       "tensor_to_image: expects [3|1, H, W]");
  Image img;
  img.height = static_cast<int>(chw.dim(1));
  img.width = static_cast<int>(chw.dim(2));
  img.pixels.resize(static_cast<size_t>(img.width) * img.height * 3);
  const bool mono = chw.dim(0) == 1;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = chw(mono ? 0 : c, y, x);
        const double clamped = std::min(1.0, std::max(0.0, v));
        img.pixels[(static_cast<size_t>(y) * img.width + x) * 3 + c] =
            static_cast<uint8_t>(std::lround(clamped * 255.0));
      }
  return img;
}

}  // namespace cinegen::io
