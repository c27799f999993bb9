#pragma once

#include <vector>

#include "cinegen/core/tensor.hpp"

namespace cinegen::diffusion {

/// Noise-level table: betas for t = 1..T and cumulative products
/// alpha_bar_t = prod_{s<=t} (1 - beta_s), with the convention alpha_bar_0 = 1.
struct DiffusionSchedule {
  int T = 0;
  ArrayX betas;       // [T], betas[t-1] = beta_t
  ArrayX alpha_bars;  // [T+1], alpha_bars[t] = abar_t

  double beta(int t) const {
    check(t >= 1 && t <= T, "schedule: timestep out of range");
    return betas[t - 1];
  }
  double alpha_bar(int t) const {
    check(t >= 0 && t <= T, "schedule: timestep out of range");
    return alpha_bars[t];
  }
};

/// Linear beta interpolation between beta_min and beta_max.
DiffusionSchedule make_schedule(int T, double beta_min, double beta_max);

/// Forward noising x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, one timestep
/// per batch item; t = 0 returns x0 exactly.
Tensor add_noise(const Tensor& x0, const std::vector<int64_t>& t, const Tensor& eps,
                 const DiffusionSchedule& sched);

}  // namespace cinegen::diffusion
