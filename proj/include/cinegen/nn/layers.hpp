#pragma once

#include <string>
#include <vector>

#include "cinegen/nn/module.hpp"

namespace cinegen::nn {

/// y = x W^T + b over row-major [N, in] -> [N, out].
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, ParamGroup group, Eigen::Index in, Eigen::Index out,
         Rng& rng, bool zero_init = false);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(std::vector<Parameter*>& out);

  Eigen::Index in_features() const { return in_; }
  Eigen::Index out_features() const { return out_; }

  Parameter weight;  // [out, in]
  Parameter bias;    // [out]

 private:
  Eigen::Index in_ = 0, out_ = 0;
  Tensor cached_x_;
};

/// 2D convolution via im2col + GEMM. Kernel (kh, kw), per-axis zero padding.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, ParamGroup group, Eigen::Index in_ch, Eigen::Index out_ch,
         Eigen::Index kh, Eigen::Index kw, Eigen::Index stride, Eigen::Index pad_h,
         Eigen::Index pad_w, Rng& rng, bool zero_init = false);

  Tensor forward(const Tensor& x);  // [N, Cin, H, W] -> [N, Cout, Ho, Wo]
  Tensor backward(const Tensor& grad_out);
  void collect(std::vector<Parameter*>& out);

  Parameter weight;  // [Cout, Cin*kh*kw]
  Parameter bias;    // [Cout]

 private:
  Eigen::Index in_ch_ = 0, out_ch_ = 0, kh_ = 0, kw_ = 0, stride_ = 1, pad_h_ = 0,
               pad_w_ = 0;
  std::vector<Eigen::Index> in_shape_;
  std::vector<MatrixX> cached_cols_;
};

/// Group normalization over [N, C, H, W]; affine stage optional so adapter
/// blocks can substitute a domain-aware affine.
class GroupNorm {
 public:
  GroupNorm() = default;
  GroupNorm(std::string name, ParamGroup group, Eigen::Index channels,
            Eigen::Index groups, bool affine);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(std::vector<Parameter*>& out);

  Parameter gamma;  // [C] when affine
  Parameter beta;   // [C] when affine

 private:
  Eigen::Index channels_ = 0, groups_ = 0;
  bool affine_ = true;
  double eps_ = 1e-5;
  Tensor cached_xhat_;
  std::vector<double> cached_istd_;  // per (n, group)
  std::vector<Eigen::Index> in_shape_;
};

/// Per-domain channel-wise affine H = X * alpha_d + beta_d. One learnable
/// scaler/shifter pair per domain; alpha starts at 1, beta at 0.
class DomainNorm {
 public:
  DomainNorm() = default;
  DomainNorm(std::string name, ParamGroup group, Eigen::Index n_domains,
             Eigen::Index channels);

  /// x: [N, C, ...] with channel axis 1; shape preserved.
  Tensor forward(const Tensor& x, int domain_id);
  Tensor backward(const Tensor& grad_out, int domain_id);
  void collect(std::vector<Parameter*>& out);

  Eigen::Index n_domains() const { return n_domains_; }
  Eigen::Index channels() const { return channels_; }

  Parameter alpha;  // [n_domains, C]
  Parameter beta;   // [n_domains, C]

 private:
  Eigen::Index n_domains_ = 0, channels_ = 0;
  Tensor cached_x_;
};

class SiLU {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

 private:
  Tensor cached_x_;
};

/// Multi-head scaled dot-product attention over token sequences.
/// Self-attention when the key/value source is the query source.
class AttentionCore {
 public:
  AttentionCore() = default;
  AttentionCore(std::string name, ParamGroup group, Eigen::Index channels,
                Eigen::Index kv_dim, Eigen::Index heads, Rng& rng,
                bool zero_init_proj);

  /// xq: [N, Lq, C], xkv: [N, Lk, kv_dim] -> [N, Lq, C]
  Tensor forward(const Tensor& xq, const Tensor& xkv);
  /// Returns grad wrt xq; adds grad wrt xkv into grad_kv if non-null.
  Tensor backward(const Tensor& grad_out, Tensor* grad_kv);
  void collect(std::vector<Parameter*>& out);

  Parameter wq, bq, wk, bk, wv, bv, wo, bo;

 private:
  Eigen::Index channels_ = 0, kv_dim_ = 0, heads_ = 0, head_dim_ = 0;
  Tensor cached_xq_, cached_xkv_;
  std::vector<MatrixX> cached_q_, cached_k_, cached_v_, cached_o_;
  std::vector<MatrixX> cached_attn_;  // one [Lq, Lk] per (n, head)
};

/// Nearest-neighbour x2 spatial upsample with exact gradient (sum pooling).
Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& grad_out);

}  // namespace cinegen::nn
