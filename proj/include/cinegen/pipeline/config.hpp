#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "cinegen/model/unet.hpp"

namespace cinegen::pipeline {

struct LlmConfig {
  std::string provider = "stub";  // "stub" | "http"
  std::string endpoint;
  std::string api_key_env = "CINEGEN_LLM_API_KEY";
  int retries = 1;
  int max_tokens = 512;
  double temperature = 0.7;
};

struct TextEncConfig {
  std::string provider = "stub";
};

struct ScheduleConfig {
  int T = 100;
  double beta_min = 1e-4;
  double beta_max = 0.02;
};

struct TrainSection {
  int steps = 200;
  int batch = 4;
  double learning_rate = 2e-3;
  double ema_decay = 0.999;
  int pinned_domain = 0;
  int log_every = 10;
};

struct SampleSection {
  int steps = 50;
  double guidance_scale = 3.0;
  int domain_id = 0;
};

struct AudioSection {
  std::string catalog_dir;
  int dim = 64;
  double lambda = 0.5;  // text/video fusion weight
  int k = 1;            // SFX choices kept per scene
};

struct AssemblySection {
  double fps = 8.0;
  double music_gain_db = -12.0;
  double sfx_gain_db = -6.0;
  std::string upscaler = "identity";
};

struct EvalSection {
  std::string extractor = "stub";
};

struct IoSection {
  std::string out_dir = "out";
  uint64_t seed = 1234;
};

/// Whole-pipeline configuration tree. Parsing is strict: unknown keys are
/// rejected everywhere, and invariants are checked before any stage runs.
struct PipelineConfig {
  LlmConfig llm;
  TextEncConfig textenc;
  model::ModelConfig model;
  ScheduleConfig schedule;
  TrainSection train;
  SampleSection sample;
  AudioSection audio;
  AssemblySection assembly;
  EvalSection eval;
  IoSection io;

  void validate() const;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);  // fully resolved

/// Reads, parses and validates a config file; any failure is a ConfigError.
PipelineConfig load_config(const std::string& path);

/// Hash of the resolved configuration (sorted-key canonical dump).
uint64_t config_hash(const PipelineConfig& cfg);
std::string config_hash_hex(const PipelineConfig& cfg);

}  // namespace cinegen::pipeline
