#include "cinegen/diffusion/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace cinegen::diffusion {

using model::Parameter;
using model::VideoDenoiser;
using nn::ParamGroup;

const char* to_string(TrainStage stage) {
  switch (stage) {
    case TrainStage::kBasePretrain: return "BASE_PRETRAIN";
    case TrainStage::kSpatialFinetune: return "SPATIAL_FINETUNE";
    case TrainStage::kTemporalTrain: return "TEMPORAL_TRAIN";
    case TrainStage::kMovieFinetune: return "MOVIE_FINETUNE";
  }
  return "?";
}

TrainStage parse_stage(const std::string& name) {
  if (name == "BASE_PRETRAIN") return TrainStage::kBasePretrain;
  if (name == "SPATIAL_FINETUNE") return TrainStage::kSpatialFinetune;
  if (name == "TEMPORAL_TRAIN") return TrainStage::kTemporalTrain;
  if (name == "MOVIE_FINETUNE") return TrainStage::kMovieFinetune;
  throw StageError("unknown training stage: " + name);
}

std::vector<Parameter*> trainable_set(VideoDenoiser& m, TrainStage stage) {
  ParamGroup want;
  switch (stage) {
    case TrainStage::kBasePretrain: want = ParamGroup::kBase; break;
    case TrainStage::kSpatialFinetune:
    case TrainStage::kMovieFinetune: want = ParamGroup::kAdapter; break;
    case TrainStage::kTemporalTrain: want = ParamGroup::kTemporal; break;
  }
  std::vector<Parameter*> out;
  for (Parameter* p : m.parameters())
    if (p->group == want) out.push_back(p);
  return out;
}

bool temporal_enabled_for(TrainStage stage) {
  return stage == TrainStage::kTemporalTrain || stage == TrainStage::kMovieFinetune;
}

void TrainConfig::validate() const {
  check(steps >= 1, "train config: steps must be >= 1");
  check(batch >= 1, "train config: batch must be >= 1");
  check(learning_rate > 0.0, "train config: learning_rate must be > 0");
  check(ema_decay > 0.0 && ema_decay < 1.0, "train config: ema_decay in (0,1)");
}

double training_loss_with(const DenoiseFn& denoise, const Tensor& x0,
                          const DiffusionSchedule& sched, Rng& rng) {
  check_as<ShapeError>(x0.rank() == 5, "training_loss: expects [B,F,C,H,W]");
  check(x0.all_finite(), "training_loss: non-finite input");
  const Eigen::Index B = x0.dim(0);
  std::vector<int64_t> t(static_cast<size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) t[static_cast<size_t>(b)] = rng.uniform_int(1, sched.T);
  Tensor eps(x0.shape());
  rng.fill_normal(eps);
  const Tensor xt = add_noise(x0, t, eps, sched);
  const Tensor pred = denoise(xt, t);
  check_as<ShapeError>(pred.same_shape(x0), "training_loss: prediction shape mismatch");
  const double loss = (pred.array() - eps.array()).square().mean();
  check(std::isfinite(loss), "training_loss: non-finite loss");
  return loss;
}

double training_loss(VideoDenoiser& m, const Tensor& x0,
                     const std::vector<Tensor>& cond, int domain_id,
                     const DiffusionSchedule& sched, Rng& rng,
                     bool temporal_enabled) {
  return training_loss_with(
      [&](const Tensor& xt, const std::vector<int64_t>& t) {
        return m.forward(xt, t, cond, domain_id, temporal_enabled);
      },
      x0, sched, rng);
}

namespace {

struct AdamState {
  std::vector<ArrayX> m, v;
  int64_t step = 0;

  explicit AdamState(const std::vector<Parameter*>& params) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const Parameter* p : params) {
      m.push_back(ArrayX::Zero(p->value.size()));
      v.push_back(ArrayX::Zero(p->value.size()));
    }
  }

  void apply(std::vector<Parameter*>& params, double lr) {
    ++step;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i];
      m[i] = b1 * m[i] + (1.0 - b1) * p.grad;
      v[i] = b2 * v[i] + (1.0 - b2) * p.grad.square();
      p.value -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
    }
  }
};

// A still pool flattens clips into single frames for the image stages.
struct StillRef {
  const data::ClipExample* clip;
  Eigen::Index frame;
};

double window_mean(const std::vector<double>& xs, size_t begin, size_t count) {
  double acc = 0.0;
  for (size_t i = begin; i < begin + count; ++i) acc += xs[i];
  return acc / static_cast<double>(count);
}

}  // namespace

TrainReport train(VideoDenoiser& m, const data::Dataset& dataset,
                  const DiffusionSchedule& sched,
                  const model::TextEncoderClient& encoder, const TrainConfig& tconf,
                  const std::vector<std::string>& stage_history) {
  tconf.validate();
  check(!dataset.empty(), "train: empty dataset");

  // Stage legality.
  const TrainStage stage = tconf.stage;
  for (const std::string& prior : stage_history)
    check_as<StageError>(static_cast<int>(parse_stage(prior)) <=
                             static_cast<int>(stage),
                         "train: stages must be applied in non-decreasing order "
                         "(already ran " + prior + ")");
  if (stage == TrainStage::kSpatialFinetune)
    check_as<StageError>(m.has_adapters(),
                         "train: SPATIAL_FINETUNE requires spatial adapters");
  if (stage == TrainStage::kTemporalTrain)
    check_as<StageError>(m.has_temporal(),
                         "train: TEMPORAL_TRAIN requires temporal layers");
  if (stage == TrainStage::kMovieFinetune) {
    check_as<StageError>(m.has_temporal(),
                         "train: MOVIE_FINETUNE requires temporal layers");
    check_as<StageError>(std::find(stage_history.begin(), stage_history.end(),
                                   std::string("TEMPORAL_TRAIN")) !=
                             stage_history.end(),
                         "train: MOVIE_FINETUNE requires a TEMPORAL_TRAIN "
                         "checkpoint");
  }

  auto all_params = m.parameters();
  auto trainable = trainable_set(m, stage);
  check(!trainable.empty(), "train: trainable set is empty for this stage");
  const bool temporal = temporal_enabled_for(stage);

  // Byte-level census baseline over every parameter.
  std::vector<uint64_t> baseline;
  baseline.reserve(all_params.size());
  for (const Parameter* p : all_params) baseline.push_back(p->byte_hash());

  // Batch pools. Spatial stages train on independent frames; video stages on
  // whole clips of the configured frame count.
  std::vector<StillRef> stills;
  std::map<int, std::vector<size_t>> stills_by_domain;
  std::vector<size_t> clip_pool;
  if (!temporal) {
    for (const auto& clip : dataset.clips)
      for (Eigen::Index f = 0; f < clip.video.dim(0); ++f) {
        stills_by_domain[clip.domain_id].push_back(stills.size());
        stills.push_back({&clip, f});
      }
  } else {
    for (size_t i = 0; i < dataset.clips.size(); ++i) {
      const auto& clip = dataset.clips[i];
      check(clip.video.dim(0) == m.config().frames,
            "train: clip " + clip.id + " frame count does not match model config");
      clip_pool.push_back(i);
    }
  }
  std::vector<int> domain_order;
  for (const auto& [d, _] : stills_by_domain) domain_order.push_back(d);

  // Round-robin across domains only in the multi-domain finetune stage.
  const bool round_robin =
      stage == TrainStage::kSpatialFinetune && domain_order.size() > 1;

  std::ofstream metrics;
  if (!tconf.metrics_path.empty()) {
    metrics.open(tconf.metrics_path, std::ios::trunc);
    check_as<IoError>(metrics.good(),
                      "train: cannot open metrics log " + tconf.metrics_path);
  }

  Rng rng(derive_seed(tconf.seed, "train", static_cast<uint64_t>(stage)));
  AdamState adam(trainable);

  TrainReport report;
  report.ema.reserve(all_params.size());
  for (const Parameter* p : all_params) report.ema.push_back(p->value);
  for (const Parameter* p : trainable) report.trainable_params.push_back(p->name);

  const Eigen::Index C = m.config().in_channels, H = m.config().height,
                     W = m.config().width;

  for (int step = 0; step < tconf.steps; ++step) {
    // assemble the batch
    Tensor x0;
    std::vector<Tensor> cond;
    int domain_id = tconf.pinned_domain;
    if (!temporal) {
      const std::vector<size_t>* pool = nullptr;
      if (round_robin) {
        const int d = domain_order[static_cast<size_t>(step) % domain_order.size()];
        pool = &stills_by_domain.at(d);
        domain_id = d;
      } else if (stills_by_domain.size() == 1) {
        domain_id = domain_order.front();
        pool = &stills_by_domain.at(domain_id);
      } else {
        pool = nullptr;
      }
      const Eigen::Index B = tconf.batch;
      x0 = Tensor({B, 1, C, H, W});
      for (Eigen::Index b = 0; b < B; ++b) {
        const StillRef& ref =
            pool ? stills[(*pool)[static_cast<size_t>(
                       rng.uniform_int(0, static_cast<int64_t>(pool->size()) - 1))]]
                 : stills[static_cast<size_t>(
                       rng.uniform_int(0, static_cast<int64_t>(stills.size()) - 1))];
        const Eigen::Index per = C * H * W;
        std::copy(ref.clip->video.data() + ref.frame * per,
                  ref.clip->video.data() + (ref.frame + 1) * per,
                  x0.data() + b * per);
        cond.push_back(encoder.embed(ref.clip->caption));
      }
    } else {
      const Eigen::Index B = tconf.batch;
      const Eigen::Index F = m.config().frames;
      x0 = Tensor({B, F, C, H, W});
      for (Eigen::Index b = 0; b < B; ++b) {
        const auto& clip = dataset.clips[clip_pool[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(clip_pool.size()) - 1))]];
        std::copy(clip.video.data(), clip.video.data() + clip.video.numel(),
                  x0.data() + b * F * C * H * W);
        cond.push_back(encoder.embed(clip.caption));
      }
    }
    x0 = data::to_model_space(x0);

    // forward/backward
    const Eigen::Index B = x0.dim(0);
    std::vector<int64_t> t(static_cast<size_t>(B));
    for (Eigen::Index b = 0; b < B; ++b)
      t[static_cast<size_t>(b)] = rng.uniform_int(1, sched.T);
    Tensor eps(x0.shape());
    rng.fill_normal(eps);
    const Tensor xt = add_noise(x0, t, eps, sched);
    const Tensor pred = m.forward(xt, t, cond, domain_id, temporal);
    const double loss = (pred.array() - eps.array()).square().mean();
    if (!std::isfinite(loss))
      throw Error("train: diverged (non-finite loss) at step " +
                  std::to_string(step) + " in stage " + to_string(stage));

    nn::zero_grads(all_params);
    Tensor gout(pred.shape());
    gout.array() =
        2.0 * (pred.array() - eps.array()) / static_cast<double>(pred.numel());
    m.backward(gout);
    adam.apply(trainable, tconf.learning_rate);

    // EMA over the full table; frozen entries never move.
    size_t ti = 0;
    for (size_t i = 0; i < all_params.size(); ++i) {
      if (ti < trainable.size() && all_params[i] == trainable[ti]) {
        report.ema[i] = tconf.ema_decay * report.ema[i] +
                        (1.0 - tconf.ema_decay) * all_params[i]->value;
        ++ti;
      }
    }

    report.losses.push_back(loss);
    if (metrics.is_open() &&
        (step % std::max(1, tconf.log_every) == 0 || step + 1 == tconf.steps)) {
      nlohmann::json rec{{"step", step},
                         {"stage", to_string(stage)},
                         {"loss", loss},
                         {"learning_rate", tconf.learning_rate}};
      metrics << rec.dump() << "\n";
    }
  }

  // Census: what actually changed, byte for byte.
  for (size_t i = 0; i < all_params.size(); ++i)
    if (all_params[i]->byte_hash() != baseline[i])
      report.changed_params.push_back(all_params[i]->name);
  for (const std::string& name : report.changed_params) {
    const bool allowed =
        std::find(report.trainable_params.begin(), report.trainable_params.end(),
                  name) != report.trainable_params.end();
    check(allowed, "train: frozen parameter mutated: " + name);
  }

  const size_t w = std::min<size_t>(static_cast<size_t>(tconf.smooth_window),
                                    report.losses.size());
  report.initial_smoothed = window_mean(report.losses, 0, w);
  report.final_smoothed = window_mean(report.losses, report.losses.size() - w, w);

  if (metrics.is_open()) {
    nlohmann::json rec{{"event", "census"},
                       {"stage", to_string(stage)},
                       {"changed", report.changed_params},
                       {"trainable", report.trainable_params},
                       {"initial_smoothed", report.initial_smoothed},
                       {"final_smoothed", report.final_smoothed}};
    metrics << rec.dump() << "\n";
  }
  return report;
}

}  // namespace cinegen::diffusion
