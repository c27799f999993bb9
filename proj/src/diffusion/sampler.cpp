#include "cinegen/diffusion/sampler.hpp"

#include <cmath>
#include <vector>

namespace cinegen::diffusion {

void SampleConfig::validate(int schedule_T) const {
  check(steps >= 1 && steps <= schedule_T,
        "sample config: steps must lie in [1, schedule T]");
  check(guidance_scale >= 0.0, "sample config: guidance_scale must be >= 0");
}

Tensor sample(model::VideoDenoiser& m, const Tensor& cond, const Tensor& uncond,
              const SampleConfig& sconf, const DiffusionSchedule& sched) {
  sconf.validate(sched.T);
  check(m.has_temporal(), "sample: model must carry temporal layers (video mode)");
  const auto& cfg = m.config();

  // descending timestep subsequence T .. 1
  std::vector<int> ts(static_cast<size_t>(sconf.steps));
  for (int i = 0; i < sconf.steps; ++i) {
    const double frac = static_cast<double>(sconf.steps - i) / sconf.steps;
    ts[static_cast<size_t>(i)] =
        std::max(1, static_cast<int>(std::lround(frac * sched.T)));
  }

  Rng rng(derive_seed(sconf.seed, "sample"));
  Tensor x({1, cfg.frames, cfg.in_channels, cfg.height, cfg.width});
  rng.fill_normal(x);

  const double g = sconf.guidance_scale;
  for (size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = (i + 1 < ts.size()) ? ts[i + 1] : 0;
    const std::vector<int64_t> tb{t};

    Tensor eps;
    if (g == 0.0) {
      eps = m.forward(x, tb, {uncond}, sconf.domain_id, true);
    } else if (g == 1.0) {
      eps = m.forward(x, tb, {cond}, sconf.domain_id, true);
    } else {
      Tensor eps_c = m.forward(x, tb, {cond}, sconf.domain_id, true);
      Tensor eps_u = m.forward(x, tb, {uncond}, sconf.domain_id, true);
      eps = Tensor(eps_c.shape());
      eps.array() = eps_u.array() + g * (eps_c.array() - eps_u.array());
    }

    const double abar_t = sched.alpha_bar(t);
    const double abar_p = sched.alpha_bar(t_prev);
    Tensor x0hat(x.shape());
    x0hat.array() =
        (x.array() - std::sqrt(1.0 - abar_t) * eps.array()) / std::sqrt(abar_t);
    x0hat.array() = x0hat.array().min(1.0).max(-1.0);
    x.array() = std::sqrt(abar_p) * x0hat.array() +
                std::sqrt(1.0 - abar_p) * eps.array();
    check(x.all_finite(), "sample: non-finite state at sampler step " +
                              std::to_string(i) + " (t=" + std::to_string(t) + ")");
  }
  return x;
}

}  // namespace cinegen::diffusion
