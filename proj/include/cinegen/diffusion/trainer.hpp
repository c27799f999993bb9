#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cinegen/data/dataset.hpp"
#include "cinegen/diffusion/schedule.hpp"
#include "cinegen/model/text_encoder.hpp"
#include "cinegen/model/unet.hpp"

namespace cinegen::diffusion {

enum class TrainStage { kBasePretrain, kSpatialFinetune, kTemporalTrain, kMovieFinetune };

const char* to_string(TrainStage stage);
TrainStage parse_stage(const std::string& name);

/// Per-stage trainable selection: the stage's own group, nothing else.
std::vector<model::Parameter*> trainable_set(model::VideoDenoiser& m, TrainStage stage);

/// Spatial stages fold frames into the batch; video stages mix them.
bool temporal_enabled_for(TrainStage stage);

struct TrainConfig {
  TrainStage stage = TrainStage::kBasePretrain;
  int steps = 200;
  int batch = 4;
  double learning_rate = 2e-3;
  uint64_t seed = 0;
  double ema_decay = 0.999;
  int pinned_domain = 0;  // domain routing for single-domain stages
  int log_every = 10;
  int smooth_window = 25;
  std::string metrics_path;  // JSON-lines sink; empty disables

  void validate() const;
};

struct TrainReport {
  std::vector<double> losses;
  double initial_smoothed = 0.0;
  double final_smoothed = 0.0;
  std::vector<std::string> trainable_params;
  std::vector<std::string> changed_params;  // byte-level census over all params
  std::vector<ArrayX> ema;                  // aligned with model.parameters()
};

/// eps-prediction MSE with draws in a fixed order (per item: t, then the
/// noise tensor), so a seeded Rng makes the loss deterministic.
using DenoiseFn =
    std::function<Tensor(const Tensor& x_t, const std::vector<int64_t>& t)>;
double training_loss_with(const DenoiseFn& denoise, const Tensor& x0,
                          const DiffusionSchedule& sched, Rng& rng);

double training_loss(model::VideoDenoiser& m, const Tensor& x0,
                     const std::vector<Tensor>& cond, int domain_id,
                     const DiffusionSchedule& sched, Rng& rng,
                     bool temporal_enabled);

/// Optimizes exactly trainable_set(stage) with Adam, keeps an EMA copy of the
/// parameters, and leaves every frozen parameter bitwise unchanged.
/// stage_history carries the stages already applied to the model (checkpoint
/// provenance); stage order must be non-decreasing.
TrainReport train(model::VideoDenoiser& m, const data::Dataset& dataset,
                  const DiffusionSchedule& sched,
                  const model::TextEncoderClient& encoder, const TrainConfig& tconf,
                  const std::vector<std::string>& stage_history);

}  // namespace cinegen::diffusion
