#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "cinegen/core/error.hpp"

namespace cinegen::script {

struct GenParams {
  int max_tokens = 512;
  double temperature = 0.7;
  uint64_t seed = 0;
};

/// Single request/response text-expansion endpoint. Implementations must
/// tolerate concurrent calls; transport failures raise ClientError.
class TextExpansionClient {
 public:
  virtual ~TextExpansionClient() = default;
  virtual std::string complete(const std::string& prompt,
                               const GenParams& params) const = 0;
};

/// Deterministic in-repo stand-in: answers script-expansion prompts with a
/// numbered scene list built from a fixture phrase table (selected by prompt
/// hash), and tone prompts with a keyword-matched category. All tests run
/// offline against this client.
class StubExpansionClient : public TextExpansionClient {
 public:
  std::string complete(const std::string& prompt,
                       const GenParams& params) const override;
};

/// POSTs {"prompt", "max_tokens", "temperature", "seed"} as JSON to the
/// configured endpoint and expects {"completion": "..."} back. The API key is
/// read from the environment variable named in the config and sent as a
/// bearer token when present.
class HttpExpansionClient : public TextExpansionClient {
 public:
  HttpExpansionClient(std::string endpoint, std::string api_key_env);
  std::string complete(const std::string& prompt,
                       const GenParams& params) const override;

 private:
  std::string endpoint_;
  std::string api_key_env_;
};

std::unique_ptr<TextExpansionClient> make_expansion_client(
    const std::string& provider, const std::string& endpoint,
    const std::string& api_key_env);

}  // namespace cinegen::script
