#pragma once

#include <memory>
#include <string>

#include "cinegen/core/tensor.hpp"

namespace cinegen::audio {

/// Fixed-dimension query/key vector with its Euclidean norm cached.
struct EmbeddingVector {
  ArrayX values;
  double norm = 0.0;

  Eigen::Index dim() const { return values.size(); }
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Pluggable embedders. The in-repo stubs are deterministic and unit-norm so
/// retrieval tests run offline.
class TextEmbedClient {
 public:
  virtual ~TextEmbedClient() = default;
  virtual EmbeddingVector embed(const std::string& text) const = 0;
  virtual Eigen::Index dim() const = 0;
};

class VideoEmbedClient {
 public:
  virtual ~VideoEmbedClient() = default;
  /// clip: [F, C, H, W] (a leading batch axis of size 1 is also accepted)
  virtual EmbeddingVector embed(const Tensor& clip) const = 0;
  virtual Eigen::Index dim() const = 0;
};

/// Hashed bag-of-words: tokenize, hash each token into one of dim buckets,
/// count, L2-normalize.
class HashedBagTextEmbedder : public TextEmbedClient {
 public:
  explicit HashedBagTextEmbedder(Eigen::Index dim);
  EmbeddingVector embed(const std::string& text) const override;
  Eigen::Index dim() const override { return dim_; }

 private:
  Eigen::Index dim_;
};

/// Per-frame channel means plus inter-frame difference means (and a constant
/// bias element), pushed through a seeded fixed random projection, then
/// L2-normalized.
class FrameStatsVideoEmbedder : public VideoEmbedClient {
 public:
  explicit FrameStatsVideoEmbedder(Eigen::Index dim);
  EmbeddingVector embed(const Tensor& clip) const override;
  Eigen::Index dim() const override { return dim_; }

 private:
  Eigen::Index dim_;
};

// Stub-backed convenience entry points.
EmbeddingVector embed_text(const std::string& text, Eigen::Index dim);
EmbeddingVector embed_video(const Tensor& clip, Eigen::Index dim);

}  // namespace cinegen::audio
