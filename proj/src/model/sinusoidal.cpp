#include "cinegen/model/sinusoidal.hpp"

#include <cmath>

namespace cinegen::model {

Tensor sinusoidal_embedding(const std::vector<int64_t>& positions, Eigen::Index dim) {
  check_as<ShapeError>(dim > 0 && dim % 2 == 0,
                       "sinusoidal_embedding: dim must be positive and even");
  for (int64_t p : positions)
    check(p >= 0, "sinusoidal_embedding: positions must be non-negative");

  const Eigen::Index n = static_cast<Eigen::Index>(positions.size());
  Tensor out({n, dim});
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pos = static_cast<double>(positions[static_cast<size_t>(i)]);
    for (Eigen::Index k = 0; k < dim / 2; ++k) {
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(dim));
      out(i, 2 * k) = std::sin(pos * freq);
      out(i, 2 * k + 1) = std::cos(pos * freq);
    }
  }
  return out;
}

}  // namespace cinegen::model
