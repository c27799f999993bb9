#pragma once

#include <string>
#include <vector>

#include "cinegen/core/tensor.hpp"

namespace cinegen::data {

/// One training clip: frames in pixel space [0,1], plus its sidecar fields.
struct ClipExample {
  std::string id;
  Tensor video;  // [F, C, H, W]
  std::string caption;
  int domain_id = 0;
  double fps = 8.0;
};

struct Dataset {
  std::vector<ClipExample> clips;

  bool empty() const { return clips.empty(); }
  std::vector<int> domains() const;
};

/// On-disk layout: <dir>/<clip_id>/frame_0000.png ... plus clip.json with
/// caption, domain tag and fps. Clips load in lexicographic id order.
Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& ds, const std::string& dir);

/// Pixel [0,1] <-> model [-1,1] value ranges.
Tensor to_model_space(const Tensor& pixel);
Tensor to_pixel_space(const Tensor& model);

}  // namespace cinegen::data
