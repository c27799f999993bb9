#pragma once

#include <cstdint>
#include <vector>

#include "cinegen/core/tensor.hpp"

namespace cinegen::model {

/// Interleaved sin/cos positional code at geometric frequencies
/// 10000^(-2k/dim): out[p, 2k] = sin(pos * f_k), out[p, 2k+1] = cos(pos * f_k).
/// Shared by diffusion timestep embedding and temporal frame-position encoding.
Tensor sinusoidal_embedding(const std::vector<int64_t>& positions, Eigen::Index dim);

}  // namespace cinegen::model
