#pragma once

#include <cstdint>

#include "cinegen/data/dataset.hpp"

namespace cinegen::data {

/// Moving-square clip family used for toy training and tests: a flat
/// background with a brighter (or darker) square bouncing horizontally.
struct MovingSquareParams {
  int n_clips = 32;
  int frames = 8;
  int height = 8;
  int width = 16;
  int square = 4;        // square side in pixels
  double background = 0.3;
  double foreground = 0.95;
  int domain_id = 0;
  std::string domain_word = "bright";
  double speed = 2.0;    // pixels per frame
  double fps = 8.0;
  bool stills = false;   // one-frame clips for image-stage training
  uint64_t seed = 7;
};

Dataset make_moving_square_dataset(const MovingSquareParams& p);

/// Mean absolute inter-frame difference over a whole dataset (pixel space).
double mean_motion_energy(const Dataset& ds);

}  // namespace cinegen::data
