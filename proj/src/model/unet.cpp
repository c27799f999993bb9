#include "cinegen/model/unet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cinegen::model {

namespace {

// [N,C,H,W] <-> [N, H*W, C]
Tensor spatial_tokens(const Tensor& x) {
  const Eigen::Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y({N, H * W, C});
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index c = 0; c < C; ++c) {
      const double* src = x.data() + (n * C + c) * H * W;
      double* dst = y.data() + n * H * W * C + c;
      for (Eigen::Index p = 0; p < H * W; ++p) dst[p * C] = src[p];
    }
  return y;
}

Tensor spatial_untokens(const Tensor& t, Eigen::Index H, Eigen::Index W) {
  const Eigen::Index N = t.dim(0), C = t.dim(2);
  Tensor y({N, C, H, W});
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index c = 0; c < C; ++c) {
      double* dst = y.data() + (n * C + c) * H * W;
      const double* src = t.data() + n * H * W * C + c;
      for (Eigen::Index p = 0; p < H * W; ++p) dst[p] = src[p * C];
    }
  return y;
}

// [B*F, C, H, W] -> [B*H*W, C, F, 1] sequences for 1D frame convolutions
Tensor fold_to_sequences(const Tensor& x, Eigen::Index B, Eigen::Index F) {
  const Eigen::Index C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y({B * H * W, C, F, 1});
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index f = 0; f < F; ++f)
      for (Eigen::Index c = 0; c < C; ++c) {
        const double* src = x.data() + ((b * F + f) * C + c) * H * W;
        for (Eigen::Index h = 0; h < H; ++h)
          for (Eigen::Index w = 0; w < W; ++w)
            y.data()[((((b * H + h) * W + w) * C + c) * F) + f] = src[h * W + w];
      }
  return y;
}

Tensor unfold_from_sequences(const Tensor& s, Eigen::Index B, Eigen::Index F,
                             Eigen::Index H, Eigen::Index W) {
  const Eigen::Index C = s.dim(1);
  Tensor y({B * F, C, H, W});
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index f = 0; f < F; ++f)
      for (Eigen::Index c = 0; c < C; ++c) {
        double* dst = y.data() + ((b * F + f) * C + c) * H * W;
        for (Eigen::Index h = 0; h < H; ++h)
          for (Eigen::Index w = 0; w < W; ++w)
            dst[h * W + w] = s.data()[((((b * H + h) * W + w) * C + c) * F) + f];
      }
  return y;
}

// [B*F, C, H, W] -> [B*H*W, F, C] frame-token sequences for temporal attention
Tensor frame_tokens(const Tensor& x, Eigen::Index B, Eigen::Index F) {
  const Eigen::Index C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y({B * H * W, F, C});
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index f = 0; f < F; ++f)
      for (Eigen::Index c = 0; c < C; ++c) {
        const double* src = x.data() + ((b * F + f) * C + c) * H * W;
        for (Eigen::Index h = 0; h < H; ++h)
          for (Eigen::Index w = 0; w < W; ++w)
            y.data()[(((b * H + h) * W + w) * F + f) * C + c] = src[h * W + w];
      }
  return y;
}

Tensor frame_untokens(const Tensor& t, Eigen::Index B, Eigen::Index F,
                      Eigen::Index H, Eigen::Index W) {
  const Eigen::Index C = t.dim(2);
  Tensor y({B * F, C, H, W});
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index f = 0; f < F; ++f)
      for (Eigen::Index c = 0; c < C; ++c) {
        double* dst = y.data() + ((b * F + f) * C + c) * H * W;
        for (Eigen::Index h = 0; h < H; ++h)
          for (Eigen::Index w = 0; w < W; ++w)
            dst[h * W + w] = t.data()[(((b * H + h) * W + w) * F + f) * C + c];
      }
  return y;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Eigen::Index N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2),
                     W = a.dim(3);
  check_as<ShapeError>(b.dim(0) == N && b.dim(2) == H && b.dim(3) == W,
                       "concat_channels: shape mismatch");
  Tensor y({N, Ca + Cb, H, W});
  const Eigen::Index plane = H * W;
  for (Eigen::Index n = 0; n < N; ++n) {
    std::copy(a.data() + n * Ca * plane, a.data() + (n + 1) * Ca * plane,
              y.data() + n * (Ca + Cb) * plane);
    std::copy(b.data() + n * Cb * plane, b.data() + (n + 1) * Cb * plane,
              y.data() + (n * (Ca + Cb) + Ca) * plane);
  }
  return y;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& g, Eigen::Index Ca,
                                         Eigen::Index Cb) {
  const Eigen::Index N = g.dim(0), H = g.dim(2), W = g.dim(3);
  Tensor ga({N, Ca, H, W}), gb({N, Cb, H, W});
  const Eigen::Index plane = H * W;
  for (Eigen::Index n = 0; n < N; ++n) {
    std::copy(g.data() + n * (Ca + Cb) * plane,
              g.data() + (n * (Ca + Cb) + Ca) * plane, ga.data() + n * Ca * plane);
    std::copy(g.data() + (n * (Ca + Cb) + Ca) * plane,
              g.data() + (n + 1) * (Ca + Cb) * plane, gb.data() + n * Cb * plane);
  }
  return {std::move(ga), std::move(gb)};
}

void add_channel_bias(Tensor& h, const Tensor& bias_nc) {
  const Eigen::Index N = h.dim(0), C = h.dim(1), plane = h.dim(2) * h.dim(3);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index c = 0; c < C; ++c) {
      Eigen::Map<ArrayX>(h.data() + (n * C + c) * plane, plane) += bias_nc(n, c);
    }
}

Tensor reduce_channel_bias(const Tensor& g) {
  const Eigen::Index N = g.dim(0), C = g.dim(1), plane = g.dim(2) * g.dim(3);
  Tensor out({N, C});
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index c = 0; c < C; ++c)
      out(n, c) = Eigen::Map<const ArrayX>(g.data() + (n * C + c) * plane, plane).sum();
  return out;
}

}  // namespace

// ------------------------------------------------------------ ModelConfig

void ModelConfig::validate() const {
  check_as<ConfigError>(in_channels > 0 && base_channels > 0 && frames >= 2 &&
                            height > 0 && width > 0 && n_domains >= 1 &&
                            text_embed_dim > 0 && time_embed_dim > 0 &&
                            norm_groups > 0 && attn_heads > 0 && text_tokens > 0,
                        "model config: all dimensions must be positive (frames >= 2, "
                        "n_domains >= 1)");
  check_as<ConfigError>(!channel_mults.empty(), "model config: channel_mults empty");
  check_as<ConfigError>(width >= height, "model config: landscape aspect required");
  check_as<ConfigError>(time_embed_dim % 2 == 0, "model config: time_embed_dim odd");
  const int L = levels();
  int div = 1 << (L - 1);
  check_as<ConfigError>(height % div == 0 && width % div == 0,
                        "model config: height/width not divisible by 2^(levels-1)");
  for (int m : channel_mults) {
    check_as<ConfigError>(m > 0, "model config: channel mult <= 0");
    const int ch = base_channels * m;
    check_as<ConfigError>(ch % norm_groups == 0, "model config: channels % norm_groups != 0");
    check_as<ConfigError>(ch % attn_heads == 0, "model config: channels % attn_heads != 0");
    check_as<ConfigError>(ch % 2 == 0, "model config: channels must be even");
  }
  for (int a : attn_levels)
    check_as<ConfigError>(a >= 0 && a < L, "model config: attn level out of range");
}

std::vector<int> ModelConfig::resolved_attn_levels() const {
  if (!attn_levels.empty()) return attn_levels;
  return {levels() - 1};
}

// --------------------------------------------------------------- ResBlock

ResBlock::ResBlock(const std::string& name, ParamGroup group, Eigen::Index in_ch,
                   Eigen::Index out_ch, Eigen::Index time_dim,
                   Eigen::Index norm_groups, Eigen::Index n_domains, Rng& rng,
                   bool zero_init_out)
    : in_ch_(in_ch), out_ch_(out_ch) {
  const bool domain_affine = n_domains > 0;
  norm1_ = nn::GroupNorm(name + ".norm1", group, in_ch,
                         std::min<Eigen::Index>(norm_groups, in_ch), !domain_affine);
  norm2_ = nn::GroupNorm(name + ".norm2", group, out_ch,
                         std::min<Eigen::Index>(norm_groups, out_ch), !domain_affine);
  if (domain_affine) {
    dn1_.emplace(name + ".norm1", group, n_domains, in_ch);
    dn2_.emplace(name + ".norm2", group, n_domains, out_ch);
  }
  conv1_ = nn::Conv2d(name + ".conv1", group, in_ch, out_ch, 3, 3, 1, 1, 1, rng);
  conv2_ = nn::Conv2d(name + ".conv2", group, out_ch, out_ch, 3, 3, 1, 1, 1, rng,
                      zero_init_out);
  time_proj_ = nn::Linear(name + ".time_proj", group, time_dim, out_ch, rng);
  if (in_ch != out_ch)
    skip_.emplace(name + ".skip", group, in_ch, out_ch, 1, 1, 1, 0, 0, rng);
}

Tensor ResBlock::forward(const Tensor& x, const Context& ctx) {
  Tensor h = norm1_.forward(x);
  if (dn1_) h = dn1_->forward(h, ctx.domain_id);
  h = act1_.forward(h);
  h = conv1_.forward(h);
  Tensor e = act_emb_.forward(*ctx.time_emb);
  Tensor te = time_proj_.forward(e);
  add_channel_bias(h, te);
  Tensor r = norm2_.forward(h);
  if (dn2_) r = dn2_->forward(r, ctx.domain_id);
  r = act2_.forward(r);
  r = conv2_.forward(r);
  if (skip_) {
    Tensor s = skip_->forward(x);
    r.array() += s.array();
  } else {
    r.array() += x.array();
  }
  return r;
}

Tensor ResBlock::backward(const Tensor& grad_out, const Context& ctx) {
  Tensor g = conv2_.backward(grad_out);
  g = act2_.backward(g);
  if (dn2_) g = dn2_->backward(g, ctx.domain_id);
  g = norm2_.backward(g);
  // timestep-bias branch
  Tensor gte = reduce_channel_bias(g);
  Tensor ge = time_proj_.backward(gte);
  ge = act_emb_.backward(ge);
  check(ctx.time_emb_grad != nullptr, "resblock backward: missing time grad sink");
  ctx.time_emb_grad->array() += ge.array();
  // main branch
  g = conv1_.backward(g);
  g = act1_.backward(g);
  if (dn1_) g = dn1_->backward(g, ctx.domain_id);
  g = norm1_.backward(g);
  // residual
  if (skip_) {
    Tensor gs = skip_->backward(grad_out);
    g.array() += gs.array();
  } else {
    g.array() += grad_out.array();
  }
  return g;
}

void ResBlock::collect(std::vector<Parameter*>& out) {
  norm1_.collect(out);
  if (dn1_) dn1_->collect(out);
  conv1_.collect(out);
  time_proj_.collect(out);
  norm2_.collect(out);
  if (dn2_) dn2_->collect(out);
  conv2_.collect(out);
  if (skip_) skip_->collect(out);
}

// --------------------------------------------------------- AttentionBlock

AttentionBlock::AttentionBlock(const std::string& name, ParamGroup group,
                               Eigen::Index channels, Eigen::Index text_dim,
                               Eigen::Index heads, Eigen::Index norm_groups,
                               Rng& rng, bool zero_init_proj)
    : channels_(channels) {
  norm1_ = nn::GroupNorm(name + ".norm1", group, channels, norm_groups, true);
  norm2_ = nn::GroupNorm(name + ".norm2", group, channels, norm_groups, true);
  self_ = nn::AttentionCore(name + ".self", group, channels, channels, heads, rng,
                            zero_init_proj);
  cross_ = nn::AttentionCore(name + ".cross", group, channels, text_dim, heads, rng,
                             zero_init_proj);
}

Tensor AttentionBlock::forward(const Tensor& x, const Context& ctx) {
  const Eigen::Index H = x.dim(2), W = x.dim(3);
  Tensor t1 = spatial_tokens(norm1_.forward(x));
  Tensor a1 = self_.forward(t1, t1);
  Tensor x1 = x;
  x1.array() += spatial_untokens(a1, H, W).array();
  Tensor t2 = spatial_tokens(norm2_.forward(x1));
  Tensor a2 = cross_.forward(t2, *ctx.text_emb);
  Tensor y = x1;
  y.array() += spatial_untokens(a2, H, W).array();
  return y;
}

Tensor AttentionBlock::backward(const Tensor& grad_out, const Context&) {
  const Eigen::Index H = grad_out.dim(2), W = grad_out.dim(3);
  // cross sublayer (text grads are discarded: the encoder client is frozen input)
  Tensor ga2 = spatial_tokens(grad_out);
  Tensor gt2 = cross_.backward(ga2, nullptr);
  Tensor gx1 = norm2_.backward(spatial_untokens(gt2, H, W));
  gx1.array() += grad_out.array();
  // self sublayer
  Tensor ga1 = spatial_tokens(gx1);
  Tensor gkv(ga1.shape());
  Tensor gq = self_.backward(ga1, &gkv);
  gq.array() += gkv.array();
  Tensor gx = norm1_.backward(spatial_untokens(gq, H, W));
  gx.array() += gx1.array();
  return gx;
}

void AttentionBlock::collect(std::vector<Parameter*>& out) {
  norm1_.collect(out);
  self_.collect(out);
  norm2_.collect(out);
  cross_.collect(out);
}

// ------------------------------------------------------- TemporalResBlock

TemporalResBlock::TemporalResBlock(const std::string& name, Eigen::Index channels,
                                   Eigen::Index norm_groups, Rng& rng)
    : channels_(channels) {
  const ParamGroup g = ParamGroup::kTemporal;
  norm1_ = nn::GroupNorm(name + ".norm1", g, channels, norm_groups, true);
  norm2_ = nn::GroupNorm(name + ".norm2", g, channels, norm_groups, true);
  conv1_ = nn::Conv2d(name + ".conv1", g, channels, channels, 3, 1, 1, 1, 0, rng);
  conv2_ = nn::Conv2d(name + ".conv2", g, channels, channels, 3, 1, 1, 1, 0, rng,
                      /*zero_init=*/true);
}

Tensor TemporalResBlock::forward(const Tensor& x, const Context& ctx) {
  const Eigen::Index H = x.dim(2), W = x.dim(3);
  Tensor xs = fold_to_sequences(x, ctx.batch, ctx.frames);
  Tensor h = act1_.forward(norm1_.forward(xs));
  h = conv1_.forward(h);
  h = act2_.forward(norm2_.forward(h));
  h = conv2_.forward(h);
  h.array() += xs.array();
  return unfold_from_sequences(h, ctx.batch, ctx.frames, H, W);
}

Tensor TemporalResBlock::backward(const Tensor& grad_out, const Context& ctx) {
  const Eigen::Index H = grad_out.dim(2), W = grad_out.dim(3);
  Tensor gs = fold_to_sequences(grad_out, ctx.batch, ctx.frames);
  Tensor g = conv2_.backward(gs);
  g = norm2_.backward(act2_.backward(g));
  g = conv1_.backward(g);
  g = norm1_.backward(act1_.backward(g));
  g.array() += gs.array();
  return unfold_from_sequences(g, ctx.batch, ctx.frames, H, W);
}

void TemporalResBlock::collect(std::vector<Parameter*>& out) {
  norm1_.collect(out);
  conv1_.collect(out);
  norm2_.collect(out);
  conv2_.collect(out);
}

// ------------------------------------------------------ TemporalAttention

TemporalAttention::TemporalAttention(const std::string& name, Eigen::Index channels,
                                     Eigen::Index heads, Eigen::Index norm_groups,
                                     Rng& rng)
    : channels_(channels) {
  const ParamGroup g = ParamGroup::kTemporal;
  norm_ = nn::GroupNorm(name + ".norm", g, channels, norm_groups, true);
  self_ = nn::AttentionCore(name + ".self", g, channels, channels, heads, rng,
                            /*zero_init_proj=*/true);
}

Tensor TemporalAttention::forward(const Tensor& x, const Context& ctx) {
  const Eigen::Index H = x.dim(2), W = x.dim(3), F = ctx.frames;
  Tensor ts = frame_tokens(norm_.forward(x), ctx.batch, F);
  // frame-position encoding added to the branch input
  std::vector<int64_t> pos(static_cast<size_t>(F));
  std::iota(pos.begin(), pos.end(), 0);
  Tensor pe = sinusoidal_embedding(pos, channels_);
  const Eigen::Index L = ts.dim(0);
  for (Eigen::Index l = 0; l < L; ++l)
    Eigen::Map<ArrayX>(ts.data() + l * F * channels_, F * channels_) +=
        Eigen::Map<const ArrayX>(pe.data(), F * channels_);
  Tensor a = self_.forward(ts, ts);
  Tensor y = x;
  y.array() += frame_untokens(a, ctx.batch, F, H, W).array();
  return y;
}

Tensor TemporalAttention::backward(const Tensor& grad_out, const Context& ctx) {
  const Eigen::Index H = grad_out.dim(2), W = grad_out.dim(3);
  Tensor ga = frame_tokens(grad_out, ctx.batch, ctx.frames);
  Tensor gkv(ga.shape());
  Tensor gq = self_.backward(ga, &gkv);
  gq.array() += gkv.array();  // position code add has identity grad
  Tensor gx = norm_.backward(frame_untokens(gq, ctx.batch, ctx.frames, H, W));
  gx.array() += grad_out.array();
  return gx;
}

void TemporalAttention::collect(std::vector<Parameter*>& out) {
  norm_.collect(out);
  self_.collect(out);
}

// ----------------------------------------------------------- Stations

Tensor ResStation::forward(const Tensor& x, const Context& ctx) {
  Tensor y = spatial.forward(x, ctx);
  if (temporal && ctx.temporal_enabled) y = temporal->forward(y, ctx);
  return y;
}

Tensor ResStation::backward(const Tensor& grad_out, const Context& ctx) {
  Tensor g = grad_out;
  if (temporal && ctx.temporal_enabled) g = temporal->backward(g, ctx);
  return spatial.backward(g, ctx);
}

void ResStation::collect(std::vector<Parameter*>& out) {
  spatial.collect(out);
  if (temporal) temporal->collect(out);
}

Tensor AttnStation::forward(const Tensor& x, const Context& ctx) {
  Tensor y = spatial.forward(x, ctx);
  if (temporal && ctx.temporal_enabled) y = temporal->forward(y, ctx);
  return y;
}

Tensor AttnStation::backward(const Tensor& grad_out, const Context& ctx) {
  Tensor g = grad_out;
  if (temporal && ctx.temporal_enabled) g = temporal->backward(g, ctx);
  return spatial.backward(g, ctx);
}

void AttnStation::collect(std::vector<Parameter*>& out) {
  spatial.collect(out);
  if (temporal) temporal->collect(out);
}

Tensor AdapterUnit::forward(const Tensor& x, const Context& ctx) {
  return attn.forward(res.forward(x, ctx), ctx);
}

Tensor AdapterUnit::backward(const Tensor& grad_out, const Context& ctx) {
  return res.backward(attn.backward(grad_out, ctx), ctx);
}

void AdapterUnit::collect(std::vector<Parameter*>& out) {
  res.collect(out);
  attn.collect(out);
}

// ---------------------------------------------------------- VideoDenoiser

VideoDenoiser VideoDenoiser::build_base(const ModelConfig& config, uint64_t seed) {
  config.validate();
  VideoDenoiser m;
  m.cfg_ = config;
  m.seed_ = seed;
  Rng rng(derive_seed(seed, "base"));
  const ParamGroup g = ParamGroup::kBase;
  const Eigen::Index td = config.time_embed_dim;
  const auto attn_levels = config.resolved_attn_levels();
  auto has_attn = [&](int lvl) {
    return std::find(attn_levels.begin(), attn_levels.end(), lvl) != attn_levels.end();
  };

  m.time_mlp1_ = nn::Linear("time_mlp.fc1", g, td, td, rng);
  m.time_mlp2_ = nn::Linear("time_mlp.fc2", g, td, td, rng);
  m.stem_ = nn::Conv2d("stem", g, config.in_channels, config.base_channels, 3, 3, 1,
                       1, 1, rng);

  const int L = config.levels();
  Eigen::Index cur = config.base_channels;
  for (int i = 0; i < L; ++i) {
    const Eigen::Index ch = config.level_channels(i);
    DownLevel lvl;
    const std::string base = "down" + std::to_string(i);
    lvl.res.spatial = ResBlock(base + ".res", g, cur, ch, td, config.norm_groups, 0,
                               rng, false);
    cur = ch;
    if (has_attn(i)) {
      lvl.attn.emplace();
      lvl.attn->spatial =
          AttentionBlock(base + ".attn", g, ch, config.text_embed_dim,
                         config.attn_heads, config.norm_groups, rng, false);
    }
    if (i < L - 1) {
      lvl.downsample.emplace(base + ".down", g, ch, ch, 3, 3, 2, 1, 1, rng);
    }
    m.down_.push_back(std::move(lvl));
  }

  const Eigen::Index cl = config.level_channels(L - 1);
  m.mid_res1_.spatial =
      ResBlock("mid.res1", g, cl, cl, td, config.norm_groups, 0, rng, false);
  m.mid_attn_.spatial = AttentionBlock("mid.attn", g, cl, config.text_embed_dim,
                                       config.attn_heads, config.norm_groups, rng,
                                       false);
  m.mid_res2_.spatial =
      ResBlock("mid.res2", g, cl, cl, td, config.norm_groups, 0, rng, false);

  cur = cl;
  for (int i = L - 1; i >= 0; --i) {
    const Eigen::Index ch = config.level_channels(i);
    UpLevel lvl;
    lvl.level = i;
    lvl.cat_cur_ch = cur;
    lvl.cat_skip_ch = ch;
    const std::string base = "up" + std::to_string(i);
    lvl.res.spatial = ResBlock(base + ".res", g, cur + ch, ch, td,
                               config.norm_groups, 0, rng, false);
    cur = ch;
    if (has_attn(i)) {
      lvl.attn.emplace();
      lvl.attn->spatial =
          AttentionBlock(base + ".attn", g, ch, config.text_embed_dim,
                         config.attn_heads, config.norm_groups, rng, false);
    }
    if (i > 0) {
      const Eigen::Index next_ch = config.level_channels(i - 1);
      lvl.upconv.emplace(base + ".up", g, ch, next_ch, 3, 3, 1, 1, 1, rng);
      cur = next_ch;
    }
    m.up_.push_back(std::move(lvl));
  }

  m.out_norm_ = nn::GroupNorm("out.norm", g, config.base_channels,
                              config.norm_groups, true);
  m.out_conv_ = nn::Conv2d("out.conv", g, config.base_channels, config.in_channels,
                           3, 3, 1, 1, 1, rng);
  return m;
}

void VideoDenoiser::insert_spatial_adapters() {
  check_as<StageError>(!has_adapters_, "spatial adapters already inserted");
  Rng rng(derive_seed(seed_, "adapters"));
  const ParamGroup g = ParamGroup::kAdapter;
  const Eigen::Index td = cfg_.time_embed_dim;
  const int L = cfg_.levels();
  for (int i = 0; i < L - 1; ++i) {
    const Eigen::Index ch = cfg_.level_channels(i);
    auto& lvl = down_[static_cast<size_t>(i)];
    lvl.adapter.emplace();
    const std::string base = "adapter.down" + std::to_string(i);
    lvl.adapter->res.spatial = ResBlock(base + ".res", g, ch, ch, td,
                                        cfg_.norm_groups, cfg_.n_domains, rng,
                                        /*zero_init_out=*/true);
    lvl.adapter->attn.spatial =
        AttentionBlock(base + ".attn", g, ch, cfg_.text_embed_dim, cfg_.attn_heads,
                       cfg_.norm_groups, rng, /*zero_init_proj=*/true);
  }
  for (auto& lvl : up_) {
    if (lvl.level == 0) continue;  // no Up block below level 0
    const Eigen::Index ch = cfg_.level_channels(lvl.level);
    lvl.adapter.emplace();
    const std::string base = "adapter.up" + std::to_string(lvl.level);
    lvl.adapter->res.spatial = ResBlock(base + ".res", g, ch, ch, td,
                                        cfg_.norm_groups, cfg_.n_domains, rng,
                                        /*zero_init_out=*/true);
    lvl.adapter->attn.spatial =
        AttentionBlock(base + ".attn", g, ch, cfg_.text_embed_dim, cfg_.attn_heads,
                       cfg_.norm_groups, rng, /*zero_init_proj=*/true);
  }
  has_adapters_ = true;
}

void VideoDenoiser::insert_temporal_layers() {
  check_as<StageError>(has_adapters_,
                       "temporal layers require spatial adapters to be inserted first");
  check_as<StageError>(!has_temporal_, "temporal layers already inserted");
  Rng rng(derive_seed(seed_, "temporal"));

  auto add_res = [&](ResStation& st, const std::string& name) {
    st.temporal.emplace(name + ".temporal", st.spatial.out_channels(),
                        cfg_.norm_groups, rng);
  };
  auto add_attn = [&](AttnStation& st, const std::string& name) {
    st.temporal.emplace(name + ".temporal", st.spatial.channels(), cfg_.attn_heads,
                        cfg_.norm_groups, rng);
  };

  for (size_t i = 0; i < down_.size(); ++i) {
    const std::string base = "down" + std::to_string(i);
    add_res(down_[i].res, base + ".res");
    if (down_[i].attn) add_attn(*down_[i].attn, base + ".attn");
    if (down_[i].adapter) {
      add_res(down_[i].adapter->res, "adapter." + base + ".res");
      add_attn(down_[i].adapter->attn, "adapter." + base + ".attn");
    }
  }
  add_res(mid_res1_, "mid.res1");
  add_attn(mid_attn_, "mid.attn");
  add_res(mid_res2_, "mid.res2");
  for (auto& lvl : up_) {
    const std::string base = "up" + std::to_string(lvl.level);
    add_res(lvl.res, base + ".res");
    if (lvl.attn) add_attn(*lvl.attn, base + ".attn");
    if (lvl.adapter) {
      add_res(lvl.adapter->res, "adapter." + base + ".res");
      add_attn(lvl.adapter->attn, "adapter." + base + ".attn");
    }
  }
  has_temporal_ = true;
}

Context VideoDenoiser::make_context(const Tensor& time_emb, const Tensor& text_emb,
                                    int domain_id, bool temporal_enabled) const {
  Context ctx;
  ctx.time_emb = &time_emb;
  ctx.text_emb = &text_emb;
  ctx.domain_id = domain_id;
  ctx.temporal_enabled = temporal_enabled;
  ctx.batch = fwd_batch_;
  ctx.frames = fwd_frames_;
  return ctx;
}

Tensor VideoDenoiser::forward(const Tensor& x, const std::vector<int64_t>& t,
                              const std::vector<Tensor>& cond, int domain_id,
                              bool temporal_enabled) {
  check_as<ShapeError>(x.rank() == 5, "forward: expects [B,F,C,H,W]");
  const Eigen::Index B = x.dim(0), F = x.dim(1), C = x.dim(2), H = x.dim(3),
                     W = x.dim(4);
  check_as<ShapeError>(C == cfg_.in_channels && H == cfg_.height && W == cfg_.width,
                       "forward: channel/height/width do not match model config");
  check_as<ShapeError>(!temporal_enabled || F == cfg_.frames,
                       "forward: video mode requires config frame count");
  check(!temporal_enabled || has_temporal_,
        "forward: temporal mode requested but temporal layers are absent");
  check(domain_id >= 0 && domain_id < cfg_.n_domains, "forward: unknown domain_id");
  check_as<ShapeError>(static_cast<Eigen::Index>(t.size()) == B,
                       "forward: one timestep per batch item required");
  check_as<ShapeError>(static_cast<Eigen::Index>(cond.size()) == B,
                       "forward: one text condition per batch item required");
  check_as<ShapeError>(x.all_finite(), "forward: non-finite input");

  fwd_batch_ = B;
  fwd_frames_ = F;
  fwd_domain_ = domain_id;
  fwd_temporal_ = temporal_enabled;
  const Eigen::Index N = B * F;

  // timestep embedding, shared by every ResBlock
  std::vector<int64_t> tf(static_cast<size_t>(N));
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index f = 0; f < F; ++f)
      tf[static_cast<size_t>(b * F + f)] = t[static_cast<size_t>(b)];
  fwd_t_ = tf;
  Tensor sin_emb = sinusoidal_embedding(tf, cfg_.time_embed_dim);
  Tensor e = time_mlp1_.forward(sin_emb);
  e = time_act_.forward(e);
  fwd_time_emb_ = time_mlp2_.forward(e);

  // per-frame text embedding, fixed token count
  const Eigen::Index T = cfg_.text_tokens, D = cfg_.text_embed_dim;
  fwd_text_emb_ = Tensor({N, T, D});
  for (Eigen::Index b = 0; b < B; ++b) {
    const Tensor& cb = cond[static_cast<size_t>(b)];
    check_as<ShapeError>(cb.rank() == 2 && cb.dim(1) == D && cb.dim(0) >= 1,
                         "forward: text condition must be [tokens, text_embed_dim]");
    check_as<ShapeError>(cb.all_finite(), "forward: non-finite text condition");
    const Eigen::Index rows = std::min<Eigen::Index>(cb.dim(0), T);
    for (Eigen::Index f = 0; f < F; ++f) {
      double* dst = fwd_text_emb_.data() + ((b * F + f) * T) * D;
      std::fill(dst, dst + T * D, 0.0);
      std::copy(cb.data(), cb.data() + rows * D, dst);
    }
  }

  Context ctx = make_context(fwd_time_emb_, fwd_text_emb_, domain_id,
                             temporal_enabled);

  Tensor h = x.reshaped({N, C, H, W});
  h = stem_.forward(h);
  std::vector<Tensor> skips;
  const int L = cfg_.levels();
  for (int i = 0; i < L; ++i) {
    auto& lvl = down_[static_cast<size_t>(i)];
    h = lvl.res.forward(h, ctx);
    if (lvl.attn) h = lvl.attn->forward(h, ctx);
    skips.push_back(h);
    if (i < L - 1) {
      if (lvl.adapter) h = lvl.adapter->forward(h, ctx);
      h = lvl.downsample->forward(h);
    }
  }
  h = mid_res1_.forward(h, ctx);
  h = mid_attn_.forward(h, ctx);
  h = mid_res2_.forward(h, ctx);
  for (auto& lvl : up_) {
    Tensor s = std::move(skips.back());
    skips.pop_back();
    h = concat_channels(h, s);
    h = lvl.res.forward(h, ctx);
    if (lvl.attn) h = lvl.attn->forward(h, ctx);
    if (lvl.level > 0) {
      if (lvl.adapter) h = lvl.adapter->forward(h, ctx);
      h = nn::upsample2x(h);
      h = lvl.upconv->forward(h);
    }
  }
  h = out_norm_.forward(h);
  h = out_act_.forward(h);
  h = out_conv_.forward(h);
  return h.reshaped({B, F, C, H, W});
}

void VideoDenoiser::backward(const Tensor& grad_out) {
  const Eigen::Index B = fwd_batch_, F = fwd_frames_;
  const Eigen::Index N = B * F;
  Tensor time_grad({N, static_cast<Eigen::Index>(cfg_.time_embed_dim)});
  Context ctx = make_context(fwd_time_emb_, fwd_text_emb_, fwd_domain_,
                             fwd_temporal_);
  ctx.time_emb_grad = &time_grad;

  Tensor g = grad_out.reshaped(
      {N, static_cast<Eigen::Index>(cfg_.in_channels),
       static_cast<Eigen::Index>(cfg_.height), static_cast<Eigen::Index>(cfg_.width)});
  g = out_conv_.backward(g);
  g = out_act_.backward(g);
  g = out_norm_.backward(g);

  std::vector<Tensor> skip_grads(static_cast<size_t>(cfg_.levels()));
  for (auto it = up_.rbegin(); it != up_.rend(); ++it) {
    auto& lvl = *it;
    if (lvl.level > 0) {
      g = lvl.upconv->backward(g);
      g = nn::upsample2x_backward(g);
      if (lvl.adapter) g = lvl.adapter->backward(g, ctx);
    }
    if (lvl.attn) g = lvl.attn->backward(g, ctx);
    g = lvl.res.backward(g, ctx);
    auto [gcur, gskip] = split_channels(g, lvl.cat_cur_ch, lvl.cat_skip_ch);
    skip_grads[static_cast<size_t>(lvl.level)] = std::move(gskip);
    g = std::move(gcur);
  }
  g = mid_res2_.backward(g, ctx);
  g = mid_attn_.backward(g, ctx);
  g = mid_res1_.backward(g, ctx);
  for (int i = cfg_.levels() - 1; i >= 0; --i) {
    auto& lvl = down_[static_cast<size_t>(i)];
    if (i < cfg_.levels() - 1) {
      g = lvl.downsample->backward(g);
      if (lvl.adapter) g = lvl.adapter->backward(g, ctx);
    }
    g.array() += skip_grads[static_cast<size_t>(i)].array();
    if (lvl.attn) g = lvl.attn->backward(g, ctx);
    g = lvl.res.backward(g, ctx);
  }
  stem_.backward(g);

  Tensor ge = time_mlp2_.backward(time_grad);
  ge = time_act_.backward(ge);
  time_mlp1_.backward(ge);
}

std::vector<Parameter*> VideoDenoiser::parameters() {
  std::vector<Parameter*> out;
  time_mlp1_.collect(out);
  time_mlp2_.collect(out);
  stem_.collect(out);
  for (auto& lvl : down_) {
    lvl.res.collect(out);
    if (lvl.attn) lvl.attn->collect(out);
    if (lvl.adapter) lvl.adapter->collect(out);
    if (lvl.downsample) lvl.downsample->collect(out);
  }
  mid_res1_.collect(out);
  mid_attn_.collect(out);
  mid_res2_.collect(out);
  for (auto& lvl : up_) {
    lvl.res.collect(out);
    if (lvl.attn) lvl.attn->collect(out);
    if (lvl.adapter) lvl.adapter->collect(out);
    if (lvl.upconv) lvl.upconv->collect(out);
  }
  out_norm_.collect(out);
  out_conv_.collect(out);
  return out;
}

std::map<ParamGroup, std::vector<Parameter*>> VideoDenoiser::parameter_groups() {
  std::map<ParamGroup, std::vector<Parameter*>> groups;
  groups[ParamGroup::kBase];
  groups[ParamGroup::kAdapter];
  groups[ParamGroup::kTemporal];
  for (Parameter* p : parameters()) groups[p->group].push_back(p);
  return groups;
}

int VideoDenoiser::adapter_unit_count() const {
  int n = 0;
  for (const auto& lvl : down_) n += lvl.adapter ? 1 : 0;
  for (const auto& lvl : up_) n += lvl.adapter ? 1 : 0;
  return n;
}

int VideoDenoiser::spatial_res_count() const {
  int n = 2;  // mid blocks
  for (const auto& lvl : down_) n += 1 + (lvl.adapter ? 1 : 0);
  for (const auto& lvl : up_) n += 1 + (lvl.adapter ? 1 : 0);
  return n;
}

int VideoDenoiser::spatial_attn_count() const {
  int n = 1;  // mid attention
  for (const auto& lvl : down_) n += (lvl.attn ? 1 : 0) + (lvl.adapter ? 1 : 0);
  for (const auto& lvl : up_) n += (lvl.attn ? 1 : 0) + (lvl.adapter ? 1 : 0);
  return n;
}

int VideoDenoiser::temporal_res_count() const {
  if (!has_temporal_) return 0;
  return spatial_res_count();
}

int VideoDenoiser::temporal_attn_count() const {
  if (!has_temporal_) return 0;
  return spatial_attn_count();
}

VideoDenoiser build_base_model(const ModelConfig& config, uint64_t seed) {
  return VideoDenoiser::build_base(config, seed);
}

void insert_spatial_adapters(VideoDenoiser& model) { model.insert_spatial_adapters(); }

void insert_temporal_layers(VideoDenoiser& model) { model.insert_temporal_layers(); }

Tensor domain_norm(const Tensor& x, int domain_id, nn::DomainNorm& params) {
  return params.forward(x, domain_id);
}

}  // namespace cinegen::model
