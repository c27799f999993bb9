#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cinegen/core/tensor.hpp"

namespace cinegen::io {

/// 8-bit RGB image, row-major interleaved.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // height * width * 3
};

void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

/// [C,H,W] tensor in [0,1] <-> RGB8. Single-channel tensors broadcast to RGB.
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& chw);

}  // namespace cinegen::io
