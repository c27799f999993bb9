#include "cinegen/model/text_encoder.hpp"

#include <cctype>
#include <cmath>

#include "cinegen/core/rng.hpp"

namespace cinegen::model {

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

HashedTextEncoder::HashedTextEncoder(Eigen::Index dim, Eigen::Index max_tokens)
    : dim_(dim), max_tokens_(max_tokens) {
  check(dim > 0 && max_tokens > 0, "text encoder: dim and max_tokens must be > 0");
}

Tensor HashedTextEncoder::embed(const std::string& text) const {
  constexpr uint64_t kProjectionSeed = 0x7e7c0de5u;
  std::vector<std::string> tokens = tokenize_words(text);
  if (tokens.size() > static_cast<size_t>(max_tokens_))
    tokens.resize(static_cast<size_t>(max_tokens_));

  const Eigen::Index n = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(tokens.size()));
  Tensor out({n, dim_});
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (size_t i = 0; i < tokens.size(); ++i) {
    const uint64_t th = fnv1a64(tokens[i]);
    for (Eigen::Index j = 0; j < dim_; ++j)
      out(static_cast<Eigen::Index>(i), j) =
          scale * hash_normal(th, static_cast<uint64_t>(j), kProjectionSeed);
  }
  return out;  // zero row stays for empty text
}

std::unique_ptr<TextEncoderClient> make_text_encoder(const std::string& provider,
                                                     Eigen::Index dim,
                                                     Eigen::Index max_tokens) {
  check_as<ConfigError>(provider == "stub",
                        "textenc.provider: only \"stub\" is available");
  return std::make_unique<HashedTextEncoder>(dim, max_tokens);
}

}  // namespace cinegen::model
