#include "cinegen/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cinegen/core/rng.hpp"

namespace cinegen::data {

namespace {

void draw_square(Tensor& video, Eigen::Index f, int x, int y, int side, double value) {
  const Eigen::Index C = video.dim(1), H = video.dim(2), W = video.dim(3);
  for (Eigen::Index c = 0; c < C; ++c)
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        const Eigen::Index yy = y + i, xx = x + j;
        if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
        video(f, c, yy, xx) = value;
      }
}

// triangle-wave bounce inside [0, limit]
int bounce(double pos, int limit) {
  if (limit <= 0) return 0;
  const double period = 2.0 * limit;
  double m = std::fmod(pos, period);
  if (m < 0) m += period;
  const double v = (m <= limit) ? m : period - m;
  return static_cast<int>(std::lround(v));
}

}  // namespace

Dataset make_moving_square_dataset(const MovingSquareParams& p) {
  check(p.n_clips >= 1 && p.height > 0 && p.width > 0 && p.square > 0 &&
            p.square <= std::min(p.height, p.width),
        "moving square: bad geometry");
  Rng rng(p.seed);
  Dataset ds;
  const int F = p.stills ? 1 : p.frames;
  const int x_limit = p.width - p.square;
  const int y_limit = p.height - p.square;

  for (int k = 0; k < p.n_clips; ++k) {
    ClipExample clip;
    char id[48];
    std::snprintf(id, sizeof(id), "clip_%s_%04d", p.domain_word.c_str(), k);
    clip.id = id;
    clip.domain_id = p.domain_id;
    clip.fps = p.fps;
    clip.video = Tensor::full({F, 3, p.height, p.width}, p.background);

    const int x0 = static_cast<int>(rng.uniform_int(0, x_limit));
    const int y0 = y_limit > 0 ? static_cast<int>(rng.uniform_int(0, y_limit)) : 0;
    const int dir = rng.uniform() < 0.5 ? -1 : 1;
    for (int f = 0; f < F; ++f) {
      const int x = bounce(x0 + dir * p.speed * f, x_limit);
      draw_square(clip.video, f, x, y0, p.square, p.foreground);
    }
    if (p.stills) {
      clip.caption = "a " + p.domain_word + " square on a flat background";
    } else {
      clip.caption = "a " + p.domain_word + " square moving " +
                     (dir > 0 ? "right" : "left") + " across a flat background";
    }
    ds.clips.push_back(std::move(clip));
  }
  return ds;
}

double mean_motion_energy(const Dataset& ds) {
  check(!ds.empty(), "mean_motion_energy: empty dataset");
  double total = 0.0;
  int counted = 0;
  for (const auto& clip : ds.clips) {
    const Eigen::Index F = clip.video.dim(0);
    if (F < 2) continue;
    const Eigen::Index per = clip.video.numel() / F;
    double acc = 0.0;
    for (Eigen::Index f = 0; f + 1 < F; ++f) {
      Eigen::Map<const ArrayX> a(clip.video.data() + f * per, per);
      Eigen::Map<const ArrayX> b(clip.video.data() + (f + 1) * per, per);
      acc += (a - b).abs().mean();
    }
    total += acc / static_cast<double>(F - 1);
    ++counted;
  }
  check(counted > 0, "mean_motion_energy: no multi-frame clips");
  return total / counted;
}

}  // namespace cinegen::data
