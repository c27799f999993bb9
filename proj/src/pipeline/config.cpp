#include "cinegen/pipeline/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "cinegen/core/rng.hpp"

namespace cinegen::pipeline {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& section) {
  check_as<ConfigError>(j.is_object(), "config: " + section + " must be an object");
  for (const auto& [key, _] : j.items())
    check_as<ConfigError>(allowed.count(key) > 0,
                          "config: unknown key \"" + key + "\" in " + section);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for \"") + key + "\": " +
                      e.what());
  }
}

}  // namespace

void PipelineConfig::validate() const {
  check_as<ConfigError>(llm.provider == "stub" || llm.provider == "http",
                        "config: llm.provider must be \"stub\" or \"http\"");
  check_as<ConfigError>(llm.retries >= 0, "config: llm.retries must be >= 0");
  check_as<ConfigError>(textenc.provider == "stub",
                        "config: textenc.provider must be \"stub\"");
  model.validate();
  check_as<ConfigError>(schedule.T >= 1, "config: schedule.T must be >= 1");
  check_as<ConfigError>(
      schedule.beta_min > 0.0 && schedule.beta_min <= schedule.beta_max &&
          schedule.beta_max < 1.0,
      "config: schedule betas must satisfy 0 < beta_min <= beta_max < 1");
  check_as<ConfigError>(train.steps >= 1 && train.batch >= 1 &&
                            train.learning_rate > 0.0,
                        "config: train section invariants violated");
  check_as<ConfigError>(train.ema_decay > 0.0 && train.ema_decay < 1.0,
                        "config: train.ema_decay must be in (0,1)");
  check_as<ConfigError>(sample.steps >= 1 && sample.steps <= schedule.T,
                        "config: sample.steps must be in [1, schedule.T]");
  check_as<ConfigError>(sample.guidance_scale >= 0.0,
                        "config: sample.guidance_scale must be >= 0");
  check_as<ConfigError>(sample.domain_id >= 0 &&
                            sample.domain_id < model.n_domains,
                        "config: sample.domain_id out of range");
  check_as<ConfigError>(audio.dim > 0, "config: audio.dim must be > 0");
  check_as<ConfigError>(audio.lambda >= 0.0 && audio.lambda <= 1.0,
                        "config: audio.lambda must be in [0,1]");
  check_as<ConfigError>(audio.k >= 1, "config: audio.k must be >= 1");
  check_as<ConfigError>(assembly.fps > 0.0, "config: assembly.fps must be > 0");
  check_as<ConfigError>(assembly.upscaler == "identity",
                        "config: assembly.upscaler: only \"identity\" ships");
  check_as<ConfigError>(eval.extractor == "stub",
                        "config: eval.extractor must be \"stub\"");
  check_as<ConfigError>(!io.out_dir.empty(), "config: io.out_dir must be set");
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig cfg;
  reject_unknown_keys(j, {"llm", "textenc", "model", "schedule", "train", "sample",
                          "audio", "assembly", "eval", "io"},
                      "top level");
  if (j.contains("llm")) {
    const json& s = j.at("llm");
    reject_unknown_keys(s, {"provider", "endpoint", "api_key_env", "retries",
                            "max_tokens", "temperature"},
                        "llm");
    read(s, "provider", cfg.llm.provider);
    read(s, "endpoint", cfg.llm.endpoint);
    read(s, "api_key_env", cfg.llm.api_key_env);
    read(s, "retries", cfg.llm.retries);
    read(s, "max_tokens", cfg.llm.max_tokens);
    read(s, "temperature", cfg.llm.temperature);
  }
  if (j.contains("textenc")) {
    const json& s = j.at("textenc");
    reject_unknown_keys(s, {"provider"}, "textenc");
    read(s, "provider", cfg.textenc.provider);
  }
  if (j.contains("model")) {
    const json& s = j.at("model");
    reject_unknown_keys(s, {"in_channels", "base_channels", "channel_mults",
                            "frames", "height", "width", "n_domains",
                            "text_embed_dim", "time_embed_dim", "attn_levels",
                            "norm_groups", "attn_heads", "text_tokens"},
                        "model");
    read(s, "in_channels", cfg.model.in_channels);
    read(s, "base_channels", cfg.model.base_channels);
    read(s, "channel_mults", cfg.model.channel_mults);
    read(s, "frames", cfg.model.frames);
    read(s, "height", cfg.model.height);
    read(s, "width", cfg.model.width);
    read(s, "n_domains", cfg.model.n_domains);
    read(s, "text_embed_dim", cfg.model.text_embed_dim);
    read(s, "time_embed_dim", cfg.model.time_embed_dim);
    read(s, "attn_levels", cfg.model.attn_levels);
    read(s, "norm_groups", cfg.model.norm_groups);
    read(s, "attn_heads", cfg.model.attn_heads);
    read(s, "text_tokens", cfg.model.text_tokens);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    reject_unknown_keys(s, {"T", "beta_min", "beta_max"}, "schedule");
    read(s, "T", cfg.schedule.T);
    read(s, "beta_min", cfg.schedule.beta_min);
    read(s, "beta_max", cfg.schedule.beta_max);
  }
  if (j.contains("train")) {
    const json& s = j.at("train");
    reject_unknown_keys(s, {"steps", "batch", "learning_rate", "ema_decay",
                            "pinned_domain", "log_every"},
                        "train");
    read(s, "steps", cfg.train.steps);
    read(s, "batch", cfg.train.batch);
    read(s, "learning_rate", cfg.train.learning_rate);
    read(s, "ema_decay", cfg.train.ema_decay);
    read(s, "pinned_domain", cfg.train.pinned_domain);
    read(s, "log_every", cfg.train.log_every);
  }
  if (j.contains("sample")) {
    const json& s = j.at("sample");
    reject_unknown_keys(s, {"steps", "guidance_scale", "domain_id"}, "sample");
    read(s, "steps", cfg.sample.steps);
    read(s, "guidance_scale", cfg.sample.guidance_scale);
    read(s, "domain_id", cfg.sample.domain_id);
  }
  if (j.contains("audio")) {
    const json& s = j.at("audio");
    reject_unknown_keys(s, {"catalog_dir", "dim", "lambda", "k"}, "audio");
    read(s, "catalog_dir", cfg.audio.catalog_dir);
    read(s, "dim", cfg.audio.dim);
    read(s, "lambda", cfg.audio.lambda);
    read(s, "k", cfg.audio.k);
  }
  if (j.contains("assembly")) {
    const json& s = j.at("assembly");
    reject_unknown_keys(s, {"fps", "music_gain_db", "sfx_gain_db", "upscaler"},
                        "assembly");
    read(s, "fps", cfg.assembly.fps);
    read(s, "music_gain_db", cfg.assembly.music_gain_db);
    read(s, "sfx_gain_db", cfg.assembly.sfx_gain_db);
    read(s, "upscaler", cfg.assembly.upscaler);
  }
  if (j.contains("eval")) {
    const json& s = j.at("eval");
    reject_unknown_keys(s, {"extractor"}, "eval");
    read(s, "extractor", cfg.eval.extractor);
  }
  if (j.contains("io")) {
    const json& s = j.at("io");
    reject_unknown_keys(s, {"out_dir", "seed"}, "io");
    read(s, "out_dir", cfg.io.out_dir);
    read(s, "seed", cfg.io.seed);
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  return json{
      {"llm",
       {{"provider", cfg.llm.provider},
        {"endpoint", cfg.llm.endpoint},
        {"api_key_env", cfg.llm.api_key_env},
        {"retries", cfg.llm.retries},
        {"max_tokens", cfg.llm.max_tokens},
        {"temperature", cfg.llm.temperature}}},
      {"textenc", {{"provider", cfg.textenc.provider}}},
      {"model",
       {{"in_channels", cfg.model.in_channels},
        {"base_channels", cfg.model.base_channels},
        {"channel_mults", cfg.model.channel_mults},
        {"frames", cfg.model.frames},
        {"height", cfg.model.height},
        {"width", cfg.model.width},
        {"n_domains", cfg.model.n_domains},
        {"text_embed_dim", cfg.model.text_embed_dim},
        {"time_embed_dim", cfg.model.time_embed_dim},
        {"attn_levels", cfg.model.attn_levels},
        {"norm_groups", cfg.model.norm_groups},
        {"attn_heads", cfg.model.attn_heads},
        {"text_tokens", cfg.model.text_tokens}}},
      {"schedule",
       {{"T", cfg.schedule.T},
        {"beta_min", cfg.schedule.beta_min},
        {"beta_max", cfg.schedule.beta_max}}},
      {"train",
       {{"steps", cfg.train.steps},
        {"batch", cfg.train.batch},
        {"learning_rate", cfg.train.learning_rate},
        {"ema_decay", cfg.train.ema_decay},
        {"pinned_domain", cfg.train.pinned_domain},
        {"log_every", cfg.train.log_every}}},
      {"sample",
       {{"steps", cfg.sample.steps},
        {"guidance_scale", cfg.sample.guidance_scale},
        {"domain_id", cfg.sample.domain_id}}},
      {"audio",
       {{"catalog_dir", cfg.audio.catalog_dir},
        {"dim", cfg.audio.dim},
        {"lambda", cfg.audio.lambda},
        {"k", cfg.audio.k}}},
      {"assembly",
       {{"fps", cfg.assembly.fps},
        {"music_gain_db", cfg.assembly.music_gain_db},
        {"sfx_gain_db", cfg.assembly.sfx_gain_db},
        {"upscaler", cfg.assembly.upscaler}}},
      {"eval", {{"extractor", cfg.eval.extractor}}},
      {"io", {{"out_dir", cfg.io.out_dir}, {"seed", cfg.io.seed}}}};
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  check_as<ConfigError>(in.good(), "config: cannot open file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config: JSON parse failure in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

uint64_t config_hash(const PipelineConfig& cfg) {
  return fnv1a64(config_to_json(cfg).dump());  // nlohmann keeps keys sorted
}

std::string config_hash_hex(const PipelineConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  return buf;
}

}  // namespace cinegen::pipeline
