#include "cinegen/pipeline/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cinegen/assembly/timeline.hpp"
#include "cinegen/audio/index.hpp"
#include "cinegen/data/dataset.hpp"
#include "cinegen/diffusion/sampler.hpp"
#include "cinegen/diffusion/trainer.hpp"
#include "cinegen/eval/metrics.hpp"
#include "cinegen/model/checkpoint.hpp"
#include "cinegen/script/text_client.hpp"

namespace cinegen::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string new_run_id() {
  static uint64_t counter = 0;
  const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
  const uint64_t h = derive_seed(static_cast<uint64_t>(now), "run", ++counter);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunContext make_run_context(PipelineConfig cfg) {
  RunContext ctx;
  ctx.out_dir = cfg.io.out_dir;
  ctx.seed = cfg.io.seed;
  ctx.run_id = new_run_id();
  ctx.cfg = std::move(cfg);
  return ctx;
}

void append_run_record(const std::string& out_dir, const json& record) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "runs.jsonl", std::ios::app);
  check_as<IoError>(out.good(), "run record: cannot open runs.jsonl");
  out << record.dump() << "\n";
}

// ----------------------------------------------------------- scripts.json

void write_scripts_json(const std::string& path,
                        const script::ScriptSequence& scripts,
                        bool count_mismatch) {
  json scenes = json::array();
  for (const auto& s : scripts.scenes)
    scenes.push_back(json{{"index", s.index},
                          {"text", s.text},
                          {"duration_seconds", s.duration_seconds}});
  const json j{{"version", 1},
               {"brief",
                {{"text", scripts.brief.text},
                 {"n_scenes", scripts.brief.n_scenes},
                 {"scene_seconds", scripts.brief.scene_seconds}}},
               {"scenes", scenes},
               {"count_mismatch", count_mismatch}};
  std::ofstream out(path, std::ios::trunc);
  check_as<IoError>(out.good(), "scripts: cannot write " + path);
  out << j.dump(2) << "\n";
}

script::ScriptSequence read_scripts_json(const std::string& path) {
  std::ifstream in(path);
  check_as<IoError>(in.good(), "scripts: cannot open " + path);
  const json j = json::parse(in);
  check_as<IoError>(j.at("version").get<int>() == 1,
                    "scripts: unsupported version in " + path);
  script::ScriptSequence seq;
  seq.brief.text = j.at("brief").at("text").get<std::string>();
  seq.brief.n_scenes = j.at("brief").at("n_scenes").get<int>();
  seq.brief.scene_seconds = j.at("brief").at("scene_seconds").get<double>();
  for (const json& js : j.at("scenes"))
    seq.scenes.push_back({js.at("index").get<int>(),
                          js.at("text").get<std::string>(),
                          js.at("duration_seconds").get<double>()});
  check(!seq.scenes.empty(), "scripts: no scenes in " + path);
  return seq;
}

// ------------------------------------------------------------------ expand

CommandResult cmd_expand(const RunContext& ctx, const script::UserBrief& brief) {
  const auto client = script::make_expansion_client(
      ctx.cfg.llm.provider, ctx.cfg.llm.endpoint, ctx.cfg.llm.api_key_env);
  script::GenParams params;
  params.max_tokens = ctx.cfg.llm.max_tokens;
  params.temperature = ctx.cfg.llm.temperature;
  params.seed = derive_seed(ctx.seed, "expand");
  const auto result = script::expand(brief, *client, ctx.cfg.llm.retries, params);

  fs::create_directories(ctx.out_dir);
  const std::string path = (fs::path(ctx.out_dir) / "scripts.json").string();
  write_scripts_json(path, result.scripts, result.count_mismatch);

  CommandResult res;
  res.outputs.push_back(path);
  if (result.count_mismatch)
    res.warnings.push_back("scene count differs from requested n_scenes");
  return res;
}

// ------------------------------------------------------------------- train

namespace {

std::string lower_stage(const std::string& stage) {
  std::string s = stage;
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

CommandResult cmd_train(const RunContext& ctx, const std::string& stage_name,
                        const std::string& dataset_dir,
                        const std::string& init_checkpoint) {
  const auto stage = diffusion::parse_stage(stage_name);
  const data::Dataset dataset = data::load_dataset(dataset_dir);
  const auto sched = diffusion::make_schedule(
      ctx.cfg.schedule.T, ctx.cfg.schedule.beta_min, ctx.cfg.schedule.beta_max);

  model::VideoDenoiser m;
  std::vector<std::string> history;
  if (!init_checkpoint.empty()) {
    auto loaded = model::load_checkpoint(init_checkpoint);
    m = std::move(loaded.model);
    history = loaded.meta.stages;
  } else {
    m = model::VideoDenoiser::build_base(ctx.cfg.model,
                                         derive_seed(ctx.seed, "model"));
  }
  // make the model shape legal for the requested stage
  if (stage != diffusion::TrainStage::kBasePretrain && !m.has_adapters())
    m.insert_spatial_adapters();
  if ((stage == diffusion::TrainStage::kTemporalTrain) && !m.has_temporal())
    m.insert_temporal_layers();

  fs::create_directories(ctx.out_dir);
  diffusion::TrainConfig tconf;
  tconf.stage = stage;
  tconf.steps = ctx.cfg.train.steps;
  tconf.batch = ctx.cfg.train.batch;
  tconf.learning_rate = ctx.cfg.train.learning_rate;
  tconf.seed = derive_seed(ctx.seed, "train", static_cast<uint64_t>(stage));
  tconf.ema_decay = ctx.cfg.train.ema_decay;
  tconf.pinned_domain = ctx.cfg.train.pinned_domain;
  tconf.log_every = ctx.cfg.train.log_every;
  const std::string metrics_path =
      (fs::path(ctx.out_dir) / ("metrics_" + lower_stage(stage_name) + ".jsonl"))
          .string();
  tconf.metrics_path = metrics_path;

  const auto encoder = model::make_text_encoder(
      ctx.cfg.textenc.provider, ctx.cfg.model.text_embed_dim,
      ctx.cfg.model.text_tokens);
  const auto report = diffusion::train(m, dataset, sched, *encoder, tconf, history);

  history.push_back(stage_name);
  const std::string ckpt_path =
      (fs::path(ctx.out_dir) / ("ckpt_" + lower_stage(stage_name) + ".ckpt"))
          .string();
  model::save_checkpoint(ckpt_path, m, history, &report.ema);

  CommandResult res;
  res.outputs.push_back(ckpt_path);
  res.outputs.push_back(metrics_path);
  return res;
}

// ------------------------------------------------------------------ sample

namespace {

/// Samples one clip per scene into <clips_dir>/scene_%03d (dataset layout).
data::Dataset sample_scenes(const RunContext& ctx, model::VideoDenoiser& m,
                            const script::ScriptSequence& scripts, int limit) {
  const auto sched = diffusion::make_schedule(
      ctx.cfg.schedule.T, ctx.cfg.schedule.beta_min, ctx.cfg.schedule.beta_max);
  const auto encoder = model::make_text_encoder(
      ctx.cfg.textenc.provider, ctx.cfg.model.text_embed_dim,
      ctx.cfg.model.text_tokens);
  const Tensor uncond = encoder->embed("");

  data::Dataset clips;
  const size_t n = limit > 0
                       ? std::min<size_t>(scripts.scenes.size(),
                                          static_cast<size_t>(limit))
                       : scripts.scenes.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& scene = scripts.scenes[i];
    diffusion::SampleConfig sconf;
    sconf.steps = ctx.cfg.sample.steps;
    sconf.guidance_scale = ctx.cfg.sample.guidance_scale;
    sconf.domain_id = ctx.cfg.sample.domain_id;
    sconf.seed = derive_seed(ctx.seed, "sample.scene", static_cast<uint64_t>(i));
    const Tensor cond = encoder->embed(scene.text);
    Tensor clip5 = diffusion::sample(m, cond, uncond, sconf, sched);
    Tensor clip = clip5.reshaped({clip5.dim(1), clip5.dim(2), clip5.dim(3),
                                  clip5.dim(4)});
    data::ClipExample ex;
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%03d", static_cast<int>(i));
    ex.id = id;
    ex.caption = scene.text;
    ex.domain_id = ctx.cfg.sample.domain_id;
    ex.fps = ctx.cfg.assembly.fps;
    ex.video = data::to_pixel_space(clip);
    clips.clips.push_back(std::move(ex));
  }
  return clips;
}

model::VideoDenoiser load_for_sampling(const std::string& checkpoint) {
  auto loaded = model::load_checkpoint(checkpoint);
  check(loaded.model.has_temporal(),
        "sample: checkpoint lacks temporal layers (not in video mode)");
  if (loaded.meta.has_ema) model::apply_ema_weights(loaded.model, loaded.ema);
  return std::move(loaded.model);
}

}  // namespace

CommandResult cmd_sample(const RunContext& ctx, const std::string& checkpoint,
                         const std::string& scripts_path, int limit) {
  const auto scripts = read_scripts_json(scripts_path);
  auto m = load_for_sampling(checkpoint);
  const data::Dataset clips = sample_scenes(ctx, m, scripts, limit);
  const std::string clips_dir = (fs::path(ctx.out_dir) / "clips").string();
  data::save_dataset(clips, clips_dir);
  CommandResult res;
  res.outputs.push_back(clips_dir);
  return res;
}

// --------------------------------------------------------- retrieve-audio

namespace {

struct AudioPlan {
  std::optional<script::ToneLabel> tone;
  std::optional<std::string> music_id;
  std::vector<audio::RetrievalResult> per_scene;  // sfx candidates, may be empty
  std::vector<std::string> warnings;
};

AudioPlan plan_audio(const RunContext& ctx, const script::ScriptSequence& scripts,
                     const data::Dataset& clips) {
  AudioPlan plan;
  if (ctx.cfg.audio.catalog_dir.empty()) {
    plan.warnings.push_back("audio.catalog_dir not set; exporting without audio");
    return plan;
  }
  std::vector<audio::AudioAsset> assets;
  try {
    assets = audio::load_catalog(ctx.cfg.audio.catalog_dir);
  } catch (const std::exception& e) {
    plan.warnings.push_back(std::string("audio catalog unavailable: ") + e.what());
    return plan;
  }
  if (assets.empty()) {
    plan.warnings.push_back("audio catalog is empty; exporting without audio");
    return plan;
  }

  const audio::HashedBagTextEmbedder embedder(ctx.cfg.audio.dim);
  const audio::AudioIndex index = audio::build_index(assets, embedder);

  if (index.has_kind(audio::AssetKind::kSfx)) {
    for (size_t i = 0; i < scripts.scenes.size() && i < clips.clips.size(); ++i)
      plan.per_scene.push_back(audio::retrieve_sfx(
          scripts.scenes[i], clips.clips[i].video, index, ctx.cfg.audio.k,
          ctx.cfg.audio.lambda));
  } else {
    plan.warnings.push_back("no SFX assets in catalog");
  }

  if (index.has_kind(audio::AssetKind::kMusic)) {
    const auto client = script::make_expansion_client(
        ctx.cfg.llm.provider, ctx.cfg.llm.endpoint, ctx.cfg.llm.api_key_env);
    const script::ToneLabel tone = script::summarize_tone(scripts, *client);
    plan.tone = tone;
    plan.music_id =
        audio::select_music(tone, index, derive_seed(ctx.seed, "music")).asset_id;
  } else {
    plan.warnings.push_back("no MUSIC assets in catalog");
  }
  return plan;
}

void write_retrieval_json(const std::string& path, const AudioPlan& plan,
                          double lambda) {
  json scenes = json::array();
  for (size_t i = 0; i < plan.per_scene.size(); ++i) {
    json cands = json::array();
    for (const auto& c : plan.per_scene[i].ranked)
      cands.push_back(json{{"asset_id", c.asset_id},
                           {"score", c.score},
                           {"text_score", c.text_score},
                           {"video_score", c.video_score}});
    scenes.push_back(json{{"index", static_cast<int>(i)}, {"sfx", cands}});
  }
  json j{{"version", 1},
         {"lambda", lambda},
         {"scenes", scenes},
         {"warnings", plan.warnings}};
  if (plan.tone)
    j["tone"] = json{{"category", script::to_string(plan.tone->category)},
                     {"confidence", plan.tone->confidence}};
  j["music"] = plan.music_id ? json(*plan.music_id) : json(nullptr);
  std::ofstream out(path, std::ios::trunc);
  check_as<IoError>(out.good(), "retrieval: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

CommandResult cmd_retrieve_audio(const RunContext& ctx,
                                 const std::string& scripts_path,
                                 const std::string& clips_dir) {
  const auto scripts = read_scripts_json(scripts_path);
  const data::Dataset clips = data::load_dataset(clips_dir);
  const AudioPlan plan = plan_audio(ctx, scripts, clips);
  fs::create_directories(ctx.out_dir);
  const std::string path = (fs::path(ctx.out_dir) / "retrieval.json").string();
  write_retrieval_json(path, plan, ctx.cfg.audio.lambda);
  CommandResult res;
  res.outputs.push_back(path);
  res.warnings = plan.warnings;
  return res;
}

// ---------------------------------------------------------------- assemble

namespace {

CommandResult assemble_movie(const RunContext& ctx,
                             const script::ScriptSequence& scripts,
                             const data::Dataset& clips, const AudioPlan& plan,
                             const std::string& movie_dir,
                             const json& provenance) {
  check(!clips.clips.empty(), "assemble: no clips to assemble");
  std::vector<audio::AudioAsset> assets;
  if (!ctx.cfg.audio.catalog_dir.empty() && (plan.music_id || !plan.per_scene.empty()))
    assets = audio::load_catalog(ctx.cfg.audio.catalog_dir);
  auto find_asset = [&](const std::string& id) -> const audio::AudioAsset& {
    for (const auto& a : assets)
      if (a.asset_id == id) return a;
    throw Error("assemble: asset not in catalog: " + id);
  };

  std::vector<assembly::SceneClip> scene_clips;
  for (size_t i = 0; i < clips.clips.size(); ++i) {
    assembly::SceneClip sc;
    sc.scene = i < scripts.scenes.size()
                   ? scripts.scenes[i]
                   : script::SceneScript{static_cast<int>(i),
                                         clips.clips[i].caption, 0.0};
    sc.frames = clips.clips[i].video;
    sc.fps = clips.clips[i].fps;
    sc.scene.duration_seconds =
        static_cast<double>(sc.frames.dim(0)) / sc.fps;  // media-derived
    if (i < plan.per_scene.size() && !plan.per_scene[i].ranked.empty()) {
      assembly::SfxChoice choice;
      choice.asset = find_asset(plan.per_scene[i].ranked.front().asset_id);
      choice.gain_db = ctx.cfg.assembly.sfx_gain_db;
      sc.sfx = std::move(choice);
    }
    scene_clips.push_back(std::move(sc));
  }

  std::optional<assembly::MusicTrack> music;
  if (plan.music_id) {
    assembly::MusicTrack track;
    track.asset = find_asset(*plan.music_id);
    track.gain_db = ctx.cfg.assembly.music_gain_db;
    music = std::move(track);
  }

  auto timeline = assembly::assemble(std::move(scene_clips), std::move(music),
                                     plan.music_id
                                         ? assembly::MissingMusicPolicy::kError
                                         : assembly::MissingMusicPolicy::kAllow);
  if (plan.tone) timeline.tone = plan.tone->category;

  const assembly::IdentityUpscaler upscaler;
  timeline = assembly::apply_upscaler(std::move(timeline), upscaler);

  assembly::export_movie(timeline, movie_dir, ctx.cfg.audio.catalog_dir,
                         provenance);
  CommandResult res;
  res.outputs.push_back(movie_dir);
  res.warnings = plan.warnings;
  return res;
}

AudioPlan read_retrieval_json(const std::string& path) {
  AudioPlan plan;
  std::ifstream in(path);
  check_as<IoError>(in.good(), "retrieval: cannot open " + path);
  const json j = json::parse(in);
  check_as<IoError>(j.at("version").get<int>() == 1,
                    "retrieval: unsupported version in " + path);
  if (j.contains("tone") && !j.at("tone").is_null()) {
    script::ToneLabel tone;
    const auto cat =
        script::parse_tone(j.at("tone").at("category").get<std::string>());
    check(cat.has_value(), "retrieval: bad tone category in " + path);
    tone.category = *cat;
    tone.confidence = j.at("tone").at("confidence").get<double>();
    plan.tone = tone;
  }
  if (j.contains("music") && !j.at("music").is_null())
    plan.music_id = j.at("music").get<std::string>();
  if (j.contains("scenes"))
    for (const json& js : j.at("scenes")) {
      audio::RetrievalResult r;
      r.fusion_lambda = j.value("lambda", 0.5);
      for (const json& jc : js.at("sfx"))
        r.ranked.push_back({jc.at("asset_id").get<std::string>(),
                            jc.at("score").get<double>(),
                            jc.at("text_score").get<double>(),
                            jc.at("video_score").get<double>()});
      plan.per_scene.push_back(std::move(r));
    }
  if (j.contains("warnings"))
    plan.warnings = j.at("warnings").get<std::vector<std::string>>();
  return plan;
}

}  // namespace

CommandResult cmd_assemble(const RunContext& ctx, const std::string& scripts_path,
                           const std::string& clips_dir,
                           const std::string& retrieval_path) {
  const auto scripts = read_scripts_json(scripts_path);
  const data::Dataset clips = data::load_dataset(clips_dir);
  AudioPlan plan;
  if (!retrieval_path.empty()) plan = read_retrieval_json(retrieval_path);
  const std::string movie_dir = (fs::path(ctx.out_dir) / "movie").string();
  const json provenance{{"run_id", ctx.run_id},
                        {"root_seed", ctx.seed},
                        {"config_hash", config_hash_hex(ctx.cfg)}};
  return assemble_movie(ctx, scripts, clips, plan, movie_dir, provenance);
}

// ---------------------------------------------------------------- evaluate

CommandResult cmd_evaluate(const RunContext& ctx, const std::string& samples_dir,
                           const std::string& reference_dir) {
  const data::Dataset samples = data::load_dataset(samples_dir);
  const data::Dataset reference = data::load_dataset(reference_dir);
  check(samples.clips.size() >= 2 && reference.clips.size() >= 2,
        "evaluate: both directories need at least 2 clips");

  std::vector<Tensor> sample_clips, reference_clips;
  std::vector<std::string> sample_texts;
  for (const auto& c : samples.clips) {
    sample_clips.push_back(c.video);
    sample_texts.push_back(c.caption);
  }
  for (const auto& c : reference.clips) reference_clips.push_back(c.video);

  const Eigen::Index dim = ctx.cfg.audio.dim;
  const auto fs_samples = eval::stub_features(sample_clips, dim);
  const auto fs_reference = eval::stub_features(reference_clips, dim);
  const double fvd_style = eval::frechet_distance(eval::gaussian_stats(fs_samples),
                                                  eval::gaussian_stats(fs_reference));

  const audio::HashedBagTextEmbedder text_embedder(dim);
  const audio::FrameStatsVideoEmbedder video_embedder(dim);
  const double clipsim_style =
      eval::clipsim(sample_texts, sample_clips, text_embedder, video_embedder);

  double motion = 0.0;
  int counted = 0;
  for (const auto& c : sample_clips)
    if (c.dim(0) >= 2) {
      motion += eval::motion_energy(c);
      ++counted;
    }
  if (counted > 0) motion /= counted;

  const json report{
      {"metrics",
       json::array(
           {json{{"name", "fvd_style"},
                 {"extractor_id", fs_samples.extractor_id},
                 {"value", fvd_style},
                 {"n_samples", samples.clips.size()},
                 {"n_reference", reference.clips.size()}},
            json{{"name", "clipsim_style"},
                 {"extractor_id", "stub-hashed-bag + stub-frame-stats"},
                 {"value", clipsim_style},
                 {"n_samples", samples.clips.size()}},
            json{{"name", "motion_energy"},
                 {"extractor_id", "pixel"},
                 {"value", motion},
                 {"n_samples", counted}}})}};

  fs::create_directories(ctx.out_dir);
  const std::string path = (fs::path(ctx.out_dir) / "metrics.json").string();
  std::ofstream out(path, std::ios::trunc);
  check_as<IoError>(out.good(), "evaluate: cannot write " + path);
  out << report.dump(2) << "\n";

  std::printf("fvd_style       %.6f\n", fvd_style);
  std::printf("clipsim_style   %.6f\n", clipsim_style);
  std::printf("motion_energy   %.6f\n", motion);

  CommandResult res;
  res.outputs.push_back(path);
  return res;
}

// -------------------------------------------------------------- make-movie

CommandResult cmd_make_movie(const RunContext& ctx, const script::UserBrief& brief,
                             const std::string& checkpoint) {
  const fs::path staging = fs::path(ctx.out_dir) / (".staging-" + ctx.run_id);
  fs::create_directories(staging);
  CommandResult res;
  std::string stage = "expand";
  try {
    // 1. scripts
    const auto client = script::make_expansion_client(
        ctx.cfg.llm.provider, ctx.cfg.llm.endpoint, ctx.cfg.llm.api_key_env);
    script::GenParams params;
    params.max_tokens = ctx.cfg.llm.max_tokens;
    params.temperature = ctx.cfg.llm.temperature;
    params.seed = derive_seed(ctx.seed, "expand");
    const auto expanded = script::expand(brief, *client, ctx.cfg.llm.retries,
                                         params);
    write_scripts_json((staging / "scripts.json").string(), expanded.scripts,
                       expanded.count_mismatch);
    if (expanded.count_mismatch)
      res.warnings.push_back("scene count differs from requested n_scenes");

    // 2. per-scene clips
    stage = "sample";
    auto m = load_for_sampling(checkpoint);
    const data::Dataset clips = sample_scenes(ctx, m, expanded.scripts, 0);
    data::save_dataset(clips, (staging / "clips").string());

    // 3. audio retrieval
    stage = "retrieve-audio";
    const AudioPlan plan = plan_audio(ctx, expanded.scripts, clips);
    write_retrieval_json((staging / "retrieval.json").string(), plan,
                         ctx.cfg.audio.lambda);
    for (const auto& w : plan.warnings) res.warnings.push_back(w);

    // 4. assembly + export
    stage = "assemble";
    const json provenance{
        {"run_id", ctx.run_id},
        {"root_seed", ctx.seed},
        {"config_hash", config_hash_hex(ctx.cfg)},
        {"checkpoint", model::read_checkpoint_meta(checkpoint).weights_hash}};
    const auto assembled = assemble_movie(ctx, expanded.scripts, clips, plan,
                                          (staging / "movie").string(),
                                          provenance);
    for (const auto& w : assembled.warnings) res.warnings.push_back(w);

    // promote staging to the output directory
    stage = "finalize";
    for (const char* name : {"scripts.json", "clips", "retrieval.json", "movie"}) {
      const fs::path src = staging / name;
      if (!fs::exists(src)) continue;
      const fs::path dst = fs::path(ctx.out_dir) / name;
      fs::remove_all(dst);
      fs::rename(src, dst);
      res.outputs.push_back(dst.string());
    }
    fs::remove_all(staging);
    return res;
  } catch (const std::exception& e) {
    const fs::path failed = fs::path(ctx.out_dir) / "failed" / ctx.run_id;
    fs::create_directories(failed.parent_path());
    std::error_code ec;
    fs::rename(staging, failed, ec);
    throw Error("make-movie stage '" + stage + "' failed (partial outputs in " +
                failed.string() + "): " + e.what());
  }
}

}  // namespace cinegen::pipeline
