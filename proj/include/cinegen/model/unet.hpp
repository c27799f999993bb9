#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cinegen/model/sinusoidal.hpp"
#include "cinegen/nn/layers.hpp"

namespace cinegen::model {

using nn::Context;
using nn::ParamGroup;
using nn::Parameter;

struct ModelConfig {
  int in_channels = 3;
  int base_channels = 32;
  std::vector<int> channel_mults = {1, 2};
  int frames = 8;
  int height = 8;
  int width = 16;  // landscape: width/height >= 1
  int n_domains = 2;
  int text_embed_dim = 32;
  int time_embed_dim = 64;
  std::vector<int> attn_levels;  // empty -> lowest-resolution level only
  int norm_groups = 8;
  int attn_heads = 4;
  int text_tokens = 8;

  void validate() const;
  std::vector<int> resolved_attn_levels() const;
  int levels() const { return static_cast<int>(channel_mults.size()); }
  int level_channels(int i) const { return base_channels * channel_mults[static_cast<size_t>(i)]; }
};

/// Spatial residual block: norm-act-conv twice with a timestep bias between.
/// Adapter flavour swaps the norms' affine stage for domain-aware pairs and
/// zero-inits the closing convolution.
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(const std::string& name, ParamGroup group, Eigen::Index in_ch,
           Eigen::Index out_ch, Eigen::Index time_dim, Eigen::Index norm_groups,
           Eigen::Index n_domains, Rng& rng, bool zero_init_out);

  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& grad_out, const Context& ctx);
  void collect(std::vector<Parameter*>& out);

  Eigen::Index out_channels() const { return out_ch_; }

 private:
  Eigen::Index in_ch_ = 0, out_ch_ = 0;
  nn::GroupNorm norm1_, norm2_;
  std::optional<nn::DomainNorm> dn1_, dn2_;
  nn::SiLU act1_, act2_, act_emb_;
  nn::Conv2d conv1_, conv2_;
  nn::Linear time_proj_;
  std::optional<nn::Conv2d> skip_;
};

/// Spatial transformer block: self-attention then text cross-attention,
/// each pre-normed with a residual add.
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(const std::string& name, ParamGroup group, Eigen::Index channels,
                 Eigen::Index text_dim, Eigen::Index heads, Eigen::Index norm_groups,
                 Rng& rng, bool zero_init_proj);

  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& grad_out, const Context& ctx);
  void collect(std::vector<Parameter*>& out);

  Eigen::Index channels() const { return channels_; }

 private:
  Eigen::Index channels_ = 0;
  nn::GroupNorm norm1_, norm2_;
  nn::AttentionCore self_, cross_;
};

/// Residual block over the frame axis: 1D convolutions (kernel 3) applied per
/// spatial location, closing convolution zero-initialized.
class TemporalResBlock {
 public:
  TemporalResBlock() = default;
  TemporalResBlock(const std::string& name, Eigen::Index channels,
                   Eigen::Index norm_groups, Rng& rng);

  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& grad_out, const Context& ctx);
  void collect(std::vector<Parameter*>& out);

 private:
  Eigen::Index channels_ = 0;
  nn::GroupNorm norm1_, norm2_;
  nn::SiLU act1_, act2_;
  nn::Conv2d conv1_, conv2_;
};

/// Self-attention over the frame axis with sinusoidal frame-position codes
/// added to the branch input; output projection zero-initialized.
class TemporalAttention {
 public:
  TemporalAttention() = default;
  TemporalAttention(const std::string& name, Eigen::Index channels,
                    Eigen::Index heads, Eigen::Index norm_groups, Rng& rng);

  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& grad_out, const Context& ctx);
  void collect(std::vector<Parameter*>& out);

 private:
  Eigen::Index channels_ = 0;
  nn::GroupNorm norm_;
  nn::AttentionCore self_;
};

/// A spatial block plus its optional temporal companion.
struct ResStation {
  ResBlock spatial;
  std::optional<TemporalResBlock> temporal;

  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& grad_out, const Context& ctx);
  void collect(std::vector<Parameter*>& out);
};

struct AttnStation {
  AttentionBlock spatial;
  std::optional<TemporalAttention> temporal;

  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& grad_out, const Context& ctx);
  void collect(std::vector<Parameter*>& out);
};

/// Inserted unit: modified ResBlk (domain-aware norms) followed by an
/// attention layer mirroring the host block's hyperparameters.
struct AdapterUnit {
  ResStation res;
  AttnStation attn;

  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& grad_out, const Context& ctx);
  void collect(std::vector<Parameter*>& out);
};

/// Conditional video denoiser: a per-frame image U-Net backbone that can be
/// extended in place with domain-aware spatial adapters (before each Up/Down
/// block) and temporal layers (after each spatial layer). Freshly inserted
/// blocks are exact identities, so the extended model reproduces the backbone
/// until trained.
class VideoDenoiser {
 public:
  VideoDenoiser() = default;

  static VideoDenoiser build_base(const ModelConfig& config, uint64_t seed);

  void insert_spatial_adapters();
  void insert_temporal_layers();
  bool has_adapters() const { return has_adapters_; }
  bool has_temporal() const { return has_temporal_; }

  /// x: [batch, frames, channels, height, width]; t: one timestep per batch
  /// item; cond: one [tokens, text_embed_dim] embedding per batch item.
  /// Returns predicted noise with the input's shape.
  Tensor forward(const Tensor& x, const std::vector<int64_t>& t,
                 const std::vector<Tensor>& cond, int domain_id,
                 bool temporal_enabled);

  /// Accumulates parameter gradients for the last forward call.
  void backward(const Tensor& grad_out);

  std::vector<Parameter*> parameters();
  std::map<ParamGroup, std::vector<Parameter*>> parameter_groups();

  const ModelConfig& config() const { return cfg_; }
  uint64_t seed() const { return seed_; }

  int adapter_unit_count() const;
  int spatial_res_count() const;
  int spatial_attn_count() const;
  int temporal_res_count() const;
  int temporal_attn_count() const;

 private:
  struct DownLevel {
    ResStation res;
    std::optional<AttnStation> attn;
    std::optional<AdapterUnit> adapter;  // before the Down block
    std::optional<nn::Conv2d> downsample;
  };
  struct UpLevel {
    int level = 0;
    Eigen::Index cat_cur_ch = 0, cat_skip_ch = 0;
    ResStation res;
    std::optional<AttnStation> attn;
    std::optional<AdapterUnit> adapter;  // before the Up block
    std::optional<nn::Conv2d> upconv;
  };

  Context make_context(const Tensor& time_emb, const Tensor& text_emb,
                       int domain_id, bool temporal_enabled) const;

  ModelConfig cfg_;
  uint64_t seed_ = 0;
  bool has_adapters_ = false;
  bool has_temporal_ = false;

  nn::Linear time_mlp1_, time_mlp2_;
  nn::SiLU time_act_;
  nn::Conv2d stem_;
  std::vector<DownLevel> down_;
  ResStation mid_res1_;
  AttnStation mid_attn_;
  ResStation mid_res2_;
  std::vector<UpLevel> up_;  // execution order: deepest level first
  nn::GroupNorm out_norm_;
  nn::SiLU out_act_;
  nn::Conv2d out_conv_;

  // last-forward state for backward
  Tensor fwd_time_emb_, fwd_text_emb_;
  std::vector<int64_t> fwd_t_;
  int fwd_domain_ = 0;
  bool fwd_temporal_ = false;
  Eigen::Index fwd_batch_ = 0, fwd_frames_ = 0;
};

// Spec-facing construction surface.
VideoDenoiser build_base_model(const ModelConfig& config, uint64_t seed);
void insert_spatial_adapters(VideoDenoiser& model);
void insert_temporal_layers(VideoDenoiser& model);

/// Standalone Eq.-style per-channel domain map H = X * alpha_d + beta_d for
/// [N, C, ...] tensors (module form lives in nn::DomainNorm).
Tensor domain_norm(const Tensor& x, int domain_id, nn::DomainNorm& params);

}  // namespace cinegen::model
