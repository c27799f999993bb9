#include "cinegen/script/text_client.hpp"

// Eigen (via rng.hpp) must precede httplib.h: system headers pulled in by the
// latter leak macros that collide with Eigen internals.
#include "cinegen/core/rng.hpp"
#include "cinegen/script/script_gen.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <regex>

namespace cinegen::script {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

const std::array<const char*, 8> kShots{
    "Close-up", "Wide shot", "Aerial view", "Tracking shot",
    "Slow pan", "Low-angle shot", "Over-the-shoulder view", "Static shot"};

const std::array<const char*, 10> kActions{
    "establishing the scene", "moving through golden light",
    "picking up speed",       "crossing the frame",
    "facing the horizon",     "in dramatic motion",
    "weaving past obstacles", "at the height of the action",
    "slowing to a rest",      "in a triumphant finale"};

}  // namespace

std::string StubExpansionClient::complete(const std::string& prompt,
                                          const GenParams& params) const {
  (void)params;
  // tone-summary request
  const size_t tone_marker = prompt.find("Respond with exactly one word");
  if (tone_marker != std::string::npos) {
    const size_t body_at = prompt.find("Scripts:\n");
    const std::string body =
        lower(body_at == std::string::npos ? prompt : prompt.substr(body_at));
    // coarse script-side cues; the caller's mapping handles anything else
    if (body.find("victory") != std::string::npos ||
        body.find("checkered") != std::string::npos ||
        body.find("triumph") != std::string::npos)
      return "triumphant";
    if (body.find("shadow") != std::string::npos ||
        body.find("fog") != std::string::npos)
      return "mysterious";
    if (body.find("calm") != std::string::npos ||
        body.find("peaceful") != std::string::npos)
      return "serene";
    if (body.find("dark") != std::string::npos ||
        body.find("storm") != std::string::npos)
      return "ominous";
    if (body.find("race") != std::string::npos ||
        body.find("chase") != std::string::npos)
      return "tense";
    return "epic";
  }

  // script-expansion request
  int n = 10;
  std::smatch m;
  static const std::regex count_re(R"(Write a sequence of (\d+) prompts)");
  if (std::regex_search(prompt, m, count_re)) n = std::stoi(m[1]);

  std::string subject = "the main character";
  const std::string marker = "The movie is about ";
  const size_t at = prompt.rfind(marker);
  if (at != std::string::npos) subject = prompt.substr(at + marker.size());

  const uint64_t h = fnv1a64(prompt);
  std::string out;
  for (int i = 0; i < n; ++i) {
    const char* shot = kShots[(h + static_cast<uint64_t>(i)) % kShots.size()];
    const char* action =
        kActions[(h / 7 + static_cast<uint64_t>(i)) % kActions.size()];
    out += std::to_string(i + 1) + ". " + shot + " of " + subject + ", " + action +
           ", 4K, high resolution.\n";
  }
  return out;
}

HttpExpansionClient::HttpExpansionClient(std::string endpoint,
                                         std::string api_key_env)
    : endpoint_(std::move(endpoint)), api_key_env_(std::move(api_key_env)) {
  check_as<ConfigError>(!endpoint_.empty(), "llm.endpoint must be set for http");
}

std::string HttpExpansionClient::complete(const std::string& prompt,
                                          const GenParams& params) const {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint_, m, url_re))
    throw ConfigError("llm.endpoint is not a valid http(s) URL: " + endpoint_);
  const std::string host = m[1];
  const std::string path = m[2].matched && m[2].length() > 0 ? m[2].str() : "/";

  httplib::Client cli(host);
  cli.set_read_timeout(30, 0);
  httplib::Headers headers;
  if (!api_key_env_.empty()) {
    if (const char* key = std::getenv(api_key_env_.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const nlohmann::json body{{"prompt", prompt},
                            {"max_tokens", params.max_tokens},
                            {"temperature", params.temperature},
                            {"seed", params.seed}};
  auto res = cli.Post(path, headers, body.dump(), "application/json");
  if (!res)
    throw ClientError("llm endpoint unreachable: " + endpoint_);
  if (res->status != 200)
    throw ClientError("llm endpoint returned status " +
                      std::to_string(res->status));
  try {
    const nlohmann::json j = nlohmann::json::parse(res->body);
    return j.at("completion").get<std::string>();
  } catch (const std::exception& e) {
    throw ClientError(std::string("llm endpoint returned malformed JSON: ") +
                      e.what());
  }
}

std::unique_ptr<TextExpansionClient> make_expansion_client(
    const std::string& provider, const std::string& endpoint,
    const std::string& api_key_env) {
  if (provider == "stub") return std::make_unique<StubExpansionClient>();
  if (provider == "http")
    return std::make_unique<HttpExpansionClient>(endpoint, api_key_env);
  throw ConfigError("llm.provider must be \"stub\" or \"http\", got: " + provider);
}

}  // namespace cinegen::script
