#include "cinegen/diffusion/schedule.hpp"

#include <cmath>

namespace cinegen::diffusion {

DiffusionSchedule make_schedule(int T, double beta_min, double beta_max) {
  check(T >= 1, "make_schedule: T must be >= 1");
  check(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0,
        "make_schedule: need 0 < beta_min <= beta_max < 1");
  DiffusionSchedule s;
  s.T = T;
  s.betas = ArrayX(T);
  s.alpha_bars = ArrayX(T + 1);
  s.alpha_bars[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    s.betas[t - 1] = beta_min + (beta_max - beta_min) * frac;
    s.alpha_bars[t] = s.alpha_bars[t - 1] * (1.0 - s.betas[t - 1]);
  }
  return s;
}

Tensor add_noise(const Tensor& x0, const std::vector<int64_t>& t, const Tensor& eps,
                 const DiffusionSchedule& sched) {
  check_as<ShapeError>(x0.rank() == 5, "add_noise: expects [B,F,C,H,W]");
  check_as<ShapeError>(x0.same_shape(eps), "add_noise: x0/eps shape mismatch");
  const Eigen::Index B = x0.dim(0);
  check_as<ShapeError>(static_cast<Eigen::Index>(t.size()) == B,
                       "add_noise: one timestep per batch item required");
  const Eigen::Index per = x0.numel() / B;
  Tensor xt(x0.shape());
  for (Eigen::Index b = 0; b < B; ++b) {
    const int64_t tb = t[static_cast<size_t>(b)];
    check(tb >= 0 && tb <= sched.T, "add_noise: timestep out of schedule range");
    Eigen::Map<ArrayX> out(xt.data() + b * per, per);
    Eigen::Map<const ArrayX> a(x0.data() + b * per, per);
    if (tb == 0) {
      out = a;
      continue;
    }
    const double abar = sched.alpha_bar(static_cast<int>(tb));
    Eigen::Map<const ArrayX> e(eps.data() + b * per, per);
    out = std::sqrt(abar) * a + std::sqrt(1.0 - abar) * e;
  }
  return xt;
}

}  // namespace cinegen::diffusion
