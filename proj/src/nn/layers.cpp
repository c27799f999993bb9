#include "cinegen/nn/layers.hpp"

#include <cmath>

namespace cinegen::nn {

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, ParamGroup group, Eigen::Index in, Eigen::Index out,
               Rng& rng, bool zero_init)
    : in_(in), out_(out) {
  weight.name = name + ".weight";
  bias.name = name + ".bias";
  weight.group = bias.group = group;
  if (zero_init) {
    weight.init_zero({out, in});
  } else {
    weight.init_normal({out, in}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  }
  bias.init_zero({out});
}

Tensor Linear::forward(const Tensor& x) {
  check_as<ShapeError>(x.rank() >= 2 && x.shape().back() == in_,
                       "linear: input feature mismatch");
  cached_x_ = x;
  const Eigen::Index n = x.numel() / in_;
  Tensor y({n, out_});
  auto xm = as_matrix(cached_x_, n, in_);
  auto w = Eigen::Map<const RowMatrixX>(weight.value.data(), out_, in_);
  auto b = Eigen::Map<const VectorX>(bias.value.data(), out_);
  as_matrix(y, n, out_) = (xm * w.transpose()).rowwise() + b.transpose();
  std::vector<Eigen::Index> out_shape = x.shape();
  out_shape.back() = out_;
  y.reshape(out_shape);
  return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const Eigen::Index n = grad_out.numel() / out_;
  auto gy = as_matrix(grad_out, n, out_);
  auto xm = as_matrix(cached_x_, n, in_);
  auto w = Eigen::Map<const RowMatrixX>(weight.value.data(), out_, in_);
  Eigen::Map<RowMatrixX> gw(weight.grad.data(), out_, in_);
  Eigen::Map<VectorX> gb(bias.grad.data(), out_);
  gw.noalias() += gy.transpose() * xm;
  gb.noalias() += gy.colwise().sum().transpose();
  Tensor gx(cached_x_.shape());
  as_matrix(gx, n, in_).noalias() = gy * w;
  return gx;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, ParamGroup group, Eigen::Index in_ch,
               Eigen::Index out_ch, Eigen::Index kh, Eigen::Index kw,
               Eigen::Index stride, Eigen::Index pad_h, Eigen::Index pad_w, Rng& rng,
               bool zero_init)
    : in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw), stride_(stride),
      pad_h_(pad_h), pad_w_(pad_w) {
  weight.name = name + ".weight";
  bias.name = name + ".bias";
  weight.group = bias.group = group;
  const Eigen::Index fan_in = in_ch * kh * kw;
  if (zero_init) {
    weight.init_zero({out_ch, fan_in});
  } else {
    weight.init_normal({out_ch, fan_in}, rng,
                       1.0 / std::sqrt(static_cast<double>(fan_in)));
  }
  bias.init_zero({out_ch});
}

namespace {

void im2col(const double* x, Eigen::Index C, Eigen::Index H, Eigen::Index W,
            Eigen::Index kh, Eigen::Index kw, Eigen::Index stride,
            Eigen::Index pad_h, Eigen::Index pad_w, Eigen::Index Ho, Eigen::Index Wo,
            MatrixX& col) {
  col.setZero();
  for (Eigen::Index c = 0; c < C; ++c) {
    for (Eigen::Index i = 0; i < kh; ++i) {
      for (Eigen::Index j = 0; j < kw; ++j) {
        const Eigen::Index row = (c * kh + i) * kw + j;
        for (Eigen::Index oh = 0; oh < Ho; ++oh) {
          const Eigen::Index ih = oh * stride - pad_h + i;
          if (ih < 0 || ih >= H) continue;
          for (Eigen::Index ow = 0; ow < Wo; ++ow) {
            const Eigen::Index iw = ow * stride - pad_w + j;
            if (iw < 0 || iw >= W) continue;
            col(row, oh * Wo + ow) = x[(c * H + ih) * W + iw];
          }
        }
      }
    }
  }
}

void col2im_add(const MatrixX& col, Eigen::Index C, Eigen::Index H, Eigen::Index W,
                Eigen::Index kh, Eigen::Index kw, Eigen::Index stride,
                Eigen::Index pad_h, Eigen::Index pad_w, Eigen::Index Ho,
                Eigen::Index Wo, double* gx) {
  for (Eigen::Index c = 0; c < C; ++c) {
    for (Eigen::Index i = 0; i < kh; ++i) {
      for (Eigen::Index j = 0; j < kw; ++j) {
        const Eigen::Index row = (c * kh + i) * kw + j;
        for (Eigen::Index oh = 0; oh < Ho; ++oh) {
          const Eigen::Index ih = oh * stride - pad_h + i;
          if (ih < 0 || ih >= H) continue;
          for (Eigen::Index ow = 0; ow < Wo; ++ow) {
            const Eigen::Index iw = ow * stride - pad_w + j;
            if (iw < 0 || iw >= W) continue;
            gx[(c * H + ih) * W + iw] += col(row, oh * Wo + ow);
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x) {
  check_as<ShapeError>(x.rank() == 4 && x.dim(1) == in_ch_, "conv2d: bad input shape");
  const Eigen::Index N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const Eigen::Index Ho = (H + 2 * pad_h_ - kh_) / stride_ + 1;
  const Eigen::Index Wo = (W + 2 * pad_w_ - kw_) / stride_ + 1;
  check_as<ShapeError>(Ho >= 1 && Wo >= 1, "conv2d: output would be empty");
  in_shape_ = x.shape();
  cached_cols_.assign(static_cast<size_t>(N), MatrixX(in_ch_ * kh_ * kw_, Ho * Wo));

  Tensor y({N, out_ch_, Ho, Wo});
  auto w = Eigen::Map<const RowMatrixX>(weight.value.data(), out_ch_,
                                        in_ch_ * kh_ * kw_);
  auto b = Eigen::Map<const VectorX>(bias.value.data(), out_ch_);
  const Eigen::Index plane = Ho * Wo;
  for (Eigen::Index n = 0; n < N; ++n) {
    MatrixX& col = cached_cols_[static_cast<size_t>(n)];
    im2col(x.data() + n * in_ch_ * H * W, in_ch_, H, W, kh_, kw_, stride_, pad_h_,
           pad_w_, Ho, Wo, col);
    Eigen::Map<RowMatrixX> yn(y.data() + n * out_ch_ * plane, out_ch_, plane);
    yn.noalias() = w * col;
    yn.colwise() += b;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Eigen::Index N = in_shape_[0], H = in_shape_[2], W = in_shape_[3];
  const Eigen::Index Ho = grad_out.dim(2), Wo = grad_out.dim(3);
  const Eigen::Index plane = Ho * Wo;
  auto w = Eigen::Map<const RowMatrixX>(weight.value.data(), out_ch_,
                                        in_ch_ * kh_ * kw_);
  Eigen::Map<RowMatrixX> gw(weight.grad.data(), out_ch_, in_ch_ * kh_ * kw_);
  Eigen::Map<VectorX> gb(bias.grad.data(), out_ch_);

  Tensor gx(in_shape_);
  for (Eigen::Index n = 0; n < N; ++n) {
    Eigen::Map<const RowMatrixX> gyn(grad_out.data() + n * out_ch_ * plane, out_ch_,
                                     plane);
    const MatrixX& col = cached_cols_[static_cast<size_t>(n)];
    gw.noalias() += gyn * col.transpose();
    gb.noalias() += gyn.rowwise().sum();
    MatrixX gcol = w.transpose() * gyn;
    col2im_add(gcol, in_ch_, H, W, kh_, kw_, stride_, pad_h_, pad_w_, Ho, Wo,
               gx.data() + n * in_ch_ * H * W);
  }
  return gx;
}

void Conv2d::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ------------------------------------------------------------- GroupNorm

GroupNorm::GroupNorm(std::string name, ParamGroup group, Eigen::Index channels,
                     Eigen::Index groups, bool affine)
    : channels_(channels), groups_(groups), affine_(affine) {
  check_as<ShapeError>(channels % groups == 0, "groupnorm: channels % groups != 0");
  if (affine_) {
    gamma.name = name + ".gamma";
    beta.name = name + ".beta";
    gamma.group = beta.group = group;
    gamma.init_constant({channels}, 1.0);
    beta.init_zero({channels});
  }
}

Tensor GroupNorm::forward(const Tensor& x) {
  check_as<ShapeError>(x.rank() == 4 && x.dim(1) == channels_,
                       "groupnorm: bad input shape");
  const Eigen::Index N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const Eigen::Index cpg = channels_ / groups_;
  const Eigen::Index m = cpg * H * W;
  in_shape_ = x.shape();
  cached_xhat_ = Tensor(x.shape());
  cached_istd_.assign(static_cast<size_t>(N * groups_), 0.0);

  Tensor y(x.shape());
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index g = 0; g < groups_; ++g) {
      const Eigen::Index off = (n * channels_ + g * cpg) * H * W;
      Eigen::Map<const ArrayX> xs(x.data() + off, m);
      const double mean = xs.mean();
      const double var = (xs - mean).square().mean();
      const double istd = 1.0 / std::sqrt(var + eps_);
      cached_istd_[static_cast<size_t>(n * groups_ + g)] = istd;
      Eigen::Map<ArrayX> xh(cached_xhat_.data() + off, m);
      xh = (xs - mean) * istd;
      Eigen::Map<ArrayX> ys(y.data() + off, m);
      if (affine_) {
        for (Eigen::Index c = 0; c < cpg; ++c) {
          const Eigen::Index ch = g * cpg + c;
          ys.segment(c * H * W, H * W) =
              xh.segment(c * H * W, H * W) * gamma.value[ch] + beta.value[ch];
        }
      } else {
        ys = xh;
      }
    }
  }
  return y;
}

Tensor GroupNorm::backward(const Tensor& grad_out) {
  const Eigen::Index N = in_shape_[0], H = in_shape_[2], W = in_shape_[3];
  const Eigen::Index cpg = channels_ / groups_;
  const Eigen::Index m = cpg * H * W;
  Tensor gx(in_shape_);
  ArrayX gxhat(m);
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index g = 0; g < groups_; ++g) {
      const Eigen::Index off = (n * channels_ + g * cpg) * H * W;
      Eigen::Map<const ArrayX> gy(grad_out.data() + off, m);
      Eigen::Map<const ArrayX> xh(cached_xhat_.data() + off, m);
      if (affine_) {
        for (Eigen::Index c = 0; c < cpg; ++c) {
          const Eigen::Index ch = g * cpg + c;
          const auto gyc = gy.segment(c * H * W, H * W);
          const auto xhc = xh.segment(c * H * W, H * W);
          gxhat.segment(c * H * W, H * W) = gyc * gamma.value[ch];
          gamma.grad[ch] += (gyc * xhc).sum();
          beta.grad[ch] += gyc.sum();
        }
      } else {
        gxhat = gy;
      }
      const double istd = cached_istd_[static_cast<size_t>(n * groups_ + g)];
      const double sum1 = gxhat.sum();
      const double sum2 = (gxhat * xh).sum();
      Eigen::Map<ArrayX> gxs(gx.data() + off, m);
      gxs = (istd / static_cast<double>(m)) *
            (static_cast<double>(m) * gxhat - sum1 - xh * sum2);
    }
  }
  return gx;
}

void GroupNorm::collect(std::vector<Parameter*>& out) {
  if (affine_) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
}

// ------------------------------------------------------------ DomainNorm

DomainNorm::DomainNorm(std::string name, ParamGroup group, Eigen::Index n_domains,
                       Eigen::Index channels)
    : n_domains_(n_domains), channels_(channels) {
  alpha.name = name + ".alpha";
  beta.name = name + ".beta";
  alpha.group = beta.group = group;
  alpha.init_constant({n_domains, channels}, 1.0);
  beta.init_zero({n_domains, channels});
}

Tensor DomainNorm::forward(const Tensor& x, int domain_id) {
  check(domain_id >= 0 && domain_id < n_domains_, "domain_norm: unknown domain_id");
  check_as<ShapeError>(x.rank() >= 2 && x.dim(1) == channels_,
                       "domain_norm: channel mismatch");
  cached_x_ = x;
  const Eigen::Index N = x.dim(0);
  const Eigen::Index inner = x.numel() / (N * channels_);
  Tensor y(x.shape());
  const Eigen::Index d0 = static_cast<Eigen::Index>(domain_id) * channels_;
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index c = 0; c < channels_; ++c) {
      const Eigen::Index off = (n * channels_ + c) * inner;
      Eigen::Map<const ArrayX> xs(x.data() + off, inner);
      Eigen::Map<ArrayX> ys(y.data() + off, inner);
      ys = xs * alpha.value[d0 + c] + beta.value[d0 + c];
    }
  }
  return y;
}

Tensor DomainNorm::backward(const Tensor& grad_out, int domain_id) {
  const Eigen::Index N = cached_x_.dim(0);
  const Eigen::Index inner = cached_x_.numel() / (N * channels_);
  const Eigen::Index d0 = static_cast<Eigen::Index>(domain_id) * channels_;
  Tensor gx(cached_x_.shape());
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index c = 0; c < channels_; ++c) {
      const Eigen::Index off = (n * channels_ + c) * inner;
      Eigen::Map<const ArrayX> gy(grad_out.data() + off, inner);
      Eigen::Map<const ArrayX> xs(cached_x_.data() + off, inner);
      Eigen::Map<ArrayX> gxs(gx.data() + off, inner);
      alpha.grad[d0 + c] += (gy * xs).sum();
      beta.grad[d0 + c] += gy.sum();
      gxs = gy * alpha.value[d0 + c];
    }
  }
  return gx;
}

void DomainNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&alpha);
  out.push_back(&beta);
}

// ------------------------------------------------------------------ SiLU

Tensor SiLU::forward(const Tensor& x) {
  cached_x_ = x;
  Tensor y(x.shape());
  y.array() = x.array() / (1.0 + (-x.array()).exp());
  return y;
}

Tensor SiLU::backward(const Tensor& grad_out) {
  Tensor gx(cached_x_.shape());
  const auto sig = 1.0 / (1.0 + (-cached_x_.array()).exp());
  gx.array() = grad_out.array() * sig * (1.0 + cached_x_.array() * (1.0 - sig));
  return gx;
}

// --------------------------------------------------------- AttentionCore

AttentionCore::AttentionCore(std::string name, ParamGroup group,
                             Eigen::Index channels, Eigen::Index kv_dim,
                             Eigen::Index heads, Rng& rng, bool zero_init_proj)
    : channels_(channels), kv_dim_(kv_dim), heads_(heads),
      head_dim_(channels / heads) {
  check_as<ShapeError>(channels % heads == 0, "attention: channels % heads != 0");
  auto init = [&](Parameter& w, Parameter& b, const char* nm, Eigen::Index out,
                  Eigen::Index in, bool zero) {
    w.name = name + "." + nm + ".weight";
    b.name = name + "." + nm + ".bias";
    w.group = b.group = group;
    if (zero) {
      w.init_zero({out, in});
    } else {
      w.init_normal({out, in}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    }
    b.init_zero({out});
  };
  init(wq, bq, "q", channels, channels, false);
  init(wk, bk, "k", channels, kv_dim, false);
  init(wv, bv, "v", channels, kv_dim, false);
  init(wo, bo, "proj", channels, channels, zero_init_proj);
}

Tensor AttentionCore::forward(const Tensor& xq, const Tensor& xkv) {
  check_as<ShapeError>(xq.rank() == 3 && xq.dim(2) == channels_,
                       "attention: bad query shape");
  check_as<ShapeError>(xkv.rank() == 3 && xkv.dim(2) == kv_dim_ &&
                           xkv.dim(0) == xq.dim(0),
                       "attention: bad key/value shape");
  const Eigen::Index N = xq.dim(0), Lq = xq.dim(1), Lk = xkv.dim(1);
  cached_xq_ = xq;
  cached_xkv_ = xkv;
  cached_q_.assign(static_cast<size_t>(N), MatrixX());
  cached_k_.assign(static_cast<size_t>(N), MatrixX());
  cached_v_.assign(static_cast<size_t>(N), MatrixX());
  cached_o_.assign(static_cast<size_t>(N), MatrixX());
  cached_attn_.assign(static_cast<size_t>(N * heads_), MatrixX());

  auto mwq = Eigen::Map<const RowMatrixX>(wq.value.data(), channels_, channels_);
  auto mwk = Eigen::Map<const RowMatrixX>(wk.value.data(), channels_, kv_dim_);
  auto mwv = Eigen::Map<const RowMatrixX>(wv.value.data(), channels_, kv_dim_);
  auto mwo = Eigen::Map<const RowMatrixX>(wo.value.data(), channels_, channels_);
  auto vbq = Eigen::Map<const VectorX>(bq.value.data(), channels_);
  auto vbk = Eigen::Map<const VectorX>(bk.value.data(), channels_);
  auto vbv = Eigen::Map<const VectorX>(bv.value.data(), channels_);
  auto vbo = Eigen::Map<const VectorX>(bo.value.data(), channels_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

  Tensor y({N, Lq, channels_});
  for (Eigen::Index n = 0; n < N; ++n) {
    Eigen::Map<const RowMatrixX> xqn(xq.data() + n * Lq * channels_, Lq, channels_);
    Eigen::Map<const RowMatrixX> xkn(xkv.data() + n * Lk * kv_dim_, Lk, kv_dim_);
    MatrixX& Q = cached_q_[static_cast<size_t>(n)];
    MatrixX& K = cached_k_[static_cast<size_t>(n)];
    MatrixX& V = cached_v_[static_cast<size_t>(n)];
    MatrixX& O = cached_o_[static_cast<size_t>(n)];
    Q = (xqn * mwq.transpose()).rowwise() + vbq.transpose();
    K = (xkn * mwk.transpose()).rowwise() + vbk.transpose();
    V = (xkn * mwv.transpose()).rowwise() + vbv.transpose();
    O.resize(Lq, channels_);
    for (Eigen::Index h = 0; h < heads_; ++h) {
      const auto Qh = Q.middleCols(h * head_dim_, head_dim_);
      const auto Kh = K.middleCols(h * head_dim_, head_dim_);
      const auto Vh = V.middleCols(h * head_dim_, head_dim_);
      MatrixX logits = (Qh * Kh.transpose()) * scale;
      // row-wise stable softmax
      MatrixX& A = cached_attn_[static_cast<size_t>(n * heads_ + h)];
      A.resize(Lq, Lk);
      for (Eigen::Index r = 0; r < Lq; ++r) {
        const double mx = logits.row(r).maxCoeff();
        A.row(r) = (logits.row(r).array() - mx).exp();
        A.row(r) /= A.row(r).sum();
      }
      O.middleCols(h * head_dim_, head_dim_).noalias() = A * Vh;
    }
    Eigen::Map<RowMatrixX> yn(y.data() + n * Lq * channels_, Lq, channels_);
    yn.noalias() = O * mwo.transpose();
    yn.rowwise() += vbo.transpose();
  }
  return y;
}

Tensor AttentionCore::backward(const Tensor& grad_out, Tensor* grad_kv) {
  const Eigen::Index N = cached_xq_.dim(0), Lq = cached_xq_.dim(1),
                     Lk = cached_xkv_.dim(1);
  auto mwq = Eigen::Map<const RowMatrixX>(wq.value.data(), channels_, channels_);
  auto mwk = Eigen::Map<const RowMatrixX>(wk.value.data(), channels_, kv_dim_);
  auto mwv = Eigen::Map<const RowMatrixX>(wv.value.data(), channels_, kv_dim_);
  auto mwo = Eigen::Map<const RowMatrixX>(wo.value.data(), channels_, channels_);
  Eigen::Map<RowMatrixX> gwq(wq.grad.data(), channels_, channels_);
  Eigen::Map<RowMatrixX> gwk(wk.grad.data(), channels_, kv_dim_);
  Eigen::Map<RowMatrixX> gwv(wv.grad.data(), channels_, kv_dim_);
  Eigen::Map<RowMatrixX> gwo(wo.grad.data(), channels_, channels_);
  Eigen::Map<VectorX> gbq(bq.grad.data(), channels_);
  Eigen::Map<VectorX> gbk(bk.grad.data(), channels_);
  Eigen::Map<VectorX> gbv(bv.grad.data(), channels_);
  Eigen::Map<VectorX> gbo(bo.grad.data(), channels_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

  Tensor gxq(cached_xq_.shape());
  for (Eigen::Index n = 0; n < N; ++n) {
    Eigen::Map<const RowMatrixX> gyn(grad_out.data() + n * Lq * channels_, Lq,
                                     channels_);
    Eigen::Map<const RowMatrixX> xqn(cached_xq_.data() + n * Lq * channels_, Lq,
                                     channels_);
    Eigen::Map<const RowMatrixX> xkn(cached_xkv_.data() + n * Lk * kv_dim_, Lk,
                                     kv_dim_);
    const MatrixX& Q = cached_q_[static_cast<size_t>(n)];
    const MatrixX& K = cached_k_[static_cast<size_t>(n)];
    const MatrixX& V = cached_v_[static_cast<size_t>(n)];
    const MatrixX& O = cached_o_[static_cast<size_t>(n)];

    gwo.noalias() += gyn.transpose() * O;
    gbo.noalias() += gyn.colwise().sum().transpose();
    MatrixX gO = gyn * mwo;

    MatrixX gQ = MatrixX::Zero(Lq, channels_);
    MatrixX gK = MatrixX::Zero(Lk, channels_);
    MatrixX gV = MatrixX::Zero(Lk, channels_);
    for (Eigen::Index h = 0; h < heads_; ++h) {
      const auto Qh = Q.middleCols(h * head_dim_, head_dim_);
      const auto Kh = K.middleCols(h * head_dim_, head_dim_);
      const auto Vh = V.middleCols(h * head_dim_, head_dim_);
      const MatrixX& A = cached_attn_[static_cast<size_t>(n * heads_ + h)];
      const auto gOh = gO.middleCols(h * head_dim_, head_dim_);
      MatrixX gA = gOh * Vh.transpose();
      gV.middleCols(h * head_dim_, head_dim_).noalias() = A.transpose() * gOh;
      // softmax backward: gS = A .* (gA - rowsum(gA .* A))
      MatrixX gS(Lq, Lk);
      for (Eigen::Index r = 0; r < Lq; ++r) {
        const double dot = (gA.row(r).array() * A.row(r).array()).sum();
        gS.row(r) = A.row(r).array() * (gA.row(r).array() - dot);
      }
      gQ.middleCols(h * head_dim_, head_dim_).noalias() = (gS * Kh) * scale;
      gK.middleCols(h * head_dim_, head_dim_).noalias() =
          (gS.transpose() * Qh) * scale;
    }

    gwq.noalias() += gQ.transpose() * xqn;
    gbq.noalias() += gQ.colwise().sum().transpose();
    gwk.noalias() += gK.transpose() * xkn;
    gbk.noalias() += gK.colwise().sum().transpose();
    gwv.noalias() += gV.transpose() * xkn;
    gbv.noalias() += gV.colwise().sum().transpose();

    Eigen::Map<RowMatrixX> gxqn(gxq.data() + n * Lq * channels_, Lq, channels_);
    gxqn.noalias() = gQ * mwq;
    if (grad_kv != nullptr) {
      Eigen::Map<RowMatrixX> gxkn(grad_kv->data() + n * Lk * kv_dim_, Lk, kv_dim_);
      gxkn.noalias() += gK * mwk;
      gxkn.noalias() += gV * mwv;
    }
  }
  return gxq;
}

void AttentionCore::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo}) out.push_back(p);
}

// -------------------------------------------------------------- Upsample

Tensor upsample2x(const Tensor& x) {
  check_as<ShapeError>(x.rank() == 4, "upsample2x: expects [N,C,H,W]");
  const Eigen::Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y({N, C, H * 2, W * 2});
  for (Eigen::Index nc = 0; nc < N * C; ++nc) {
    const double* src = x.data() + nc * H * W;
    double* dst = y.data() + nc * 4 * H * W;
    for (Eigen::Index i = 0; i < H; ++i) {
      for (Eigen::Index j = 0; j < W; ++j) {
        const double v = src[i * W + j];
        double* d = dst + (2 * i) * (2 * W) + 2 * j;
        d[0] = v;
        d[1] = v;
        d[2 * W] = v;
        d[2 * W + 1] = v;
      }
    }
  }
  return y;
}

Tensor upsample2x_backward(const Tensor& grad_out) {
  const Eigen::Index N = grad_out.dim(0), C = grad_out.dim(1);
  const Eigen::Index H = grad_out.dim(2) / 2, W = grad_out.dim(3) / 2;
  Tensor gx({N, C, H, W});
  for (Eigen::Index nc = 0; nc < N * C; ++nc) {
    const double* g = grad_out.data() + nc * 4 * H * W;
    double* dst = gx.data() + nc * H * W;
    for (Eigen::Index i = 0; i < H; ++i) {
      for (Eigen::Index j = 0; j < W; ++j) {
        const double* s = g + (2 * i) * (2 * W) + 2 * j;
        dst[i * W + j] = s[0] + s[1] + s[2 * W] + s[2 * W + 1];
      }
    }
  }
  return gx;
}

}  // namespace cinegen::nn
