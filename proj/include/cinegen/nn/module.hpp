#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cinegen/core/rng.hpp"
#include "cinegen/core/tensor.hpp"

namespace cinegen::nn {

/// Every model parameter belongs to exactly one group; the trainer freezes
/// and thaws whole groups per stage.
enum class ParamGroup { kBase, kAdapter, kTemporal };

inline const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kBase: return "BASE";
    case ParamGroup::kAdapter: return "ADAPTER";
    case ParamGroup::kTemporal: return "TEMPORAL";
  }
  return "?";
}

struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::kBase;
  std::vector<Eigen::Index> shape;
  ArrayX value;
  ArrayX grad;
  bool trainable = false;

  void init_zero(std::vector<Eigen::Index> sh) {
    shape = std::move(sh);
    const Eigen::Index n = Tensor::count(shape);
    value = ArrayX::Zero(n);
    grad = ArrayX::Zero(n);
  }

  void init_normal(std::vector<Eigen::Index> sh, Rng& rng, double stddev) {
    init_zero(std::move(sh));
    rng.fill_normal(value, 0.0, stddev);
  }

  void init_constant(std::vector<Eigen::Index> sh, double v) {
    init_zero(std::move(sh));
    value.setConstant(v);
  }

  void zero_grad() { grad.setZero(); }

  uint64_t byte_hash() const {
    return fnv1a64(value.data(), static_cast<size_t>(value.size()) * sizeof(double));
  }
};

/// Per-forward conditioning shared by all layers of the denoiser. During
/// backward, blocks accumulate grads for the shared tensors via the pointers.
struct Context {
  const Tensor* time_emb = nullptr;   // [N, time_embed_dim], post-MLP
  const Tensor* text_emb = nullptr;   // [N, tokens, text_embed_dim]
  Tensor* time_emb_grad = nullptr;
  int domain_id = 0;
  bool temporal_enabled = false;
  // video geometry for temporal layers (rows of the folded batch are b*frames+f)
  Eigen::Index batch = 0;
  Eigen::Index frames = 1;
};

/// A differentiable block. forward caches whatever backward needs, so a
/// module instance is single-flight: one forward, then at most one backward.
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor forward(const Tensor& x, const Context& ctx) = 0;
  virtual Tensor backward(const Tensor& grad_out, const Context& ctx) = 0;
  virtual void collect(std::vector<Parameter*>& out) = 0;

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    collect(out);
    return out;
  }
};

inline void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace cinegen::nn
