#include "cinegen/audio/embeddings.hpp"

#include <cmath>

#include "cinegen/core/rng.hpp"
#include "cinegen/model/text_encoder.hpp"

namespace cinegen::audio {

namespace {

EmbeddingVector normalized(ArrayX v) {
  EmbeddingVector e;
  const double n = std::sqrt(v.square().sum());
  check(n > 0.0, "embedding: zero vector cannot be normalized");
  e.values = v / n;
  e.norm = 1.0;
  return e;
}

}  // namespace

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  check_as<ShapeError>(a.dim() == b.dim(), "cosine: dimension mismatch");
  check(a.norm > 0.0 && b.norm > 0.0, "cosine: zero-norm operand");
  return (a.values * b.values).sum() / (a.norm * b.norm);
}

HashedBagTextEmbedder::HashedBagTextEmbedder(Eigen::Index dim) : dim_(dim) {
  check(dim > 0, "text embedder: dim must be > 0");
}

EmbeddingVector HashedBagTextEmbedder::embed(const std::string& text) const {
  const auto tokens = model::tokenize_words(text);
  check(!tokens.empty(), "embed_text: text has no tokens");
  ArrayX counts = ArrayX::Zero(dim_);
  for (const std::string& tok : tokens)
    counts[static_cast<Eigen::Index>(fnv1a64(tok) % static_cast<uint64_t>(dim_))] +=
        1.0;
  return normalized(std::move(counts));
}

FrameStatsVideoEmbedder::FrameStatsVideoEmbedder(Eigen::Index dim) : dim_(dim) {
  check(dim > 0, "video embedder: dim must be > 0");
}

EmbeddingVector FrameStatsVideoEmbedder::embed(const Tensor& clip) const {
  constexpr uint64_t kProjectionSeed = 0xa0d10fea;
  Tensor c = clip;
  if (c.rank() == 5) {
    check_as<ShapeError>(c.dim(0) == 1, "embed_video: batch axis must be 1");
    c.reshape({c.dim(1), c.dim(2), c.dim(3), c.dim(4)});
  }
  check_as<ShapeError>(c.rank() == 4, "embed_video: expects [F, C, H, W]");
  const Eigen::Index F = c.dim(0), C = c.dim(1), plane = c.dim(2) * c.dim(3);
  check(F >= 1 && c.numel() > 0, "embed_video: empty clip");
  check(c.all_finite(), "embed_video: non-finite clip");

  // feature: per-frame channel means, inter-frame difference means, bias 1
  const Eigen::Index feat_len = F * C + (F - 1) * C + 1;
  ArrayX feat(feat_len);
  Eigen::Index k = 0;
  for (Eigen::Index f = 0; f < F; ++f)
    for (Eigen::Index ch = 0; ch < C; ++ch)
      feat[k++] =
          Eigen::Map<const ArrayX>(c.data() + (f * C + ch) * plane, plane).mean();
  for (Eigen::Index f = 0; f + 1 < F; ++f)
    for (Eigen::Index ch = 0; ch < C; ++ch) {
      Eigen::Map<const ArrayX> a(c.data() + (f * C + ch) * plane, plane);
      Eigen::Map<const ArrayX> b(c.data() + ((f + 1) * C + ch) * plane, plane);
      feat[k++] = (b - a).abs().mean();
    }
  feat[k++] = 1.0;

  // fixed random projection, keyed by (input index, output index)
  ArrayX out = ArrayX::Zero(dim_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(feat_len));
  for (Eigen::Index j = 0; j < dim_; ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < feat_len; ++i)
      acc += feat[i] * hash_normal(static_cast<uint64_t>(i),
                                   static_cast<uint64_t>(j), kProjectionSeed);
    out[j] = acc * scale;
  }
  return normalized(std::move(out));
}

EmbeddingVector embed_text(const std::string& text, Eigen::Index dim) {
  return HashedBagTextEmbedder(dim).embed(text);
}

EmbeddingVector embed_video(const Tensor& clip, Eigen::Index dim) {
  return FrameStatsVideoEmbedder(dim).embed(clip);
}

}  // namespace cinegen::audio
