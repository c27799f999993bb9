#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "cinegen/model/unet.hpp"

namespace cinegen::model {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct CheckpointMeta {
  int format_version = 1;
  ModelConfig config;
  uint64_t seed = 0;
  bool has_adapters = false;
  bool has_temporal = false;
  std::vector<std::string> stages;  // training-stage provenance, in order
  bool has_ema = false;
  std::string weights_hash;  // fnv1a64 over raw parameter bytes, hex
};

/// Single-file archive: magic, JSON header (config, stage provenance, named
/// parameter table with group tags), then raw little-endian doubles; an EMA
/// copy of every parameter follows when present.
void save_checkpoint(const std::string& path, VideoDenoiser& model,
                     const std::vector<std::string>& stages,
                     const std::vector<ArrayX>* ema = nullptr);

struct LoadedCheckpoint {
  VideoDenoiser model;
  CheckpointMeta meta;
  std::vector<ArrayX> ema;  // aligned with model.parameters(); empty if absent
};

LoadedCheckpoint load_checkpoint(const std::string& path);

CheckpointMeta read_checkpoint_meta(const std::string& path);

/// Swaps EMA values into the model's parameters (used for sampling).
void apply_ema_weights(VideoDenoiser& model, const std::vector<ArrayX>& ema);

}  // namespace cinegen::model
