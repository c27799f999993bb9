#pragma once

#include <cstdint>

#include "cinegen/diffusion/schedule.hpp"
#include "cinegen/model/unet.hpp"

namespace cinegen::diffusion {

struct SampleConfig {
  int steps = 50;              // sampler steps, <= schedule T
  double guidance_scale = 3.0;  // 0 -> unconditional-only trajectory
  uint64_t seed = 0;
  int domain_id = 0;

  void validate(int schedule_T) const;
};

/// Deterministic denoising walk from seeded Gaussian noise: eps-prediction
/// with conditional/unconditional mixing weighted by guidance_scale (the
/// unconditional branch uses the empty-text embedding). Returns one clip
/// [1, frames, C, H, W] in model space [-1, 1].
Tensor sample(model::VideoDenoiser& m, const Tensor& cond, const Tensor& uncond,
              const SampleConfig& sconf, const DiffusionSchedule& sched);

}  // namespace cinegen::diffusion
