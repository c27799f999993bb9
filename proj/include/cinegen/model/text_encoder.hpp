#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cinegen/core/tensor.hpp"

namespace cinegen::model {

/// Pluggable text-embedding client for the denoiser's cross-attention:
/// text -> [tokens, dim]. Implementations must be stateless per call.
class TextEncoderClient {
 public:
  virtual ~TextEncoderClient() = default;
  virtual Tensor embed(const std::string& text) const = 0;
  virtual Eigen::Index dim() const = 0;
};

/// Deterministic offline encoder: each lowercase word hashes to a fixed
/// pseudo-random vector. Empty text maps to a single zero token, which also
/// serves as the unconditional embedding during guided sampling.
class HashedTextEncoder : public TextEncoderClient {
 public:
  explicit HashedTextEncoder(Eigen::Index dim, Eigen::Index max_tokens = 8);
  Tensor embed(const std::string& text) const override;
  Eigen::Index dim() const override { return dim_; }

 private:
  Eigen::Index dim_;
  Eigen::Index max_tokens_;
};

std::vector<std::string> tokenize_words(const std::string& text);

std::unique_ptr<TextEncoderClient> make_text_encoder(const std::string& provider,
                                                     Eigen::Index dim,
                                                     Eigen::Index max_tokens);

}  // namespace cinegen::model
