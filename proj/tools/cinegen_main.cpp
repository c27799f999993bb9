// cinegen: text -> multi-scene movie pipeline driver.
//
// Stage artifacts are plain files (scripts.json, checkpoints, clip
// directories, retrieval.json, movie/manifest.json), so every stage can run
// and be inspected independently.

// Eigen-dependent headers must precede CLI11/httplib system includes.
#include "cinegen/pipeline/pipeline.hpp"

#include "cinegen/audio/index.hpp"
#include "cinegen/data/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>

namespace {

using namespace cinegen;

struct GlobalArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
};

pipeline::RunContext build_context(const GlobalArgs& g) {
  pipeline::PipelineConfig cfg;
  if (!g.config_path.empty()) cfg = pipeline::load_config(g.config_path);
  if (g.seed) cfg.io.seed = *g.seed;
  if (g.out_dir) cfg.io.out_dir = *g.out_dir;
  cfg.validate();
  return pipeline::make_run_context(std::move(cfg));
}

int run_recorded(const GlobalArgs& g, const std::string& command,
                 const std::function<pipeline::CommandResult(
                     const pipeline::RunContext&)>& fn) {
  pipeline::RunContext ctx;
  try {
    ctx = build_context(g);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  nlohmann::json record{{"run_id", ctx.run_id},
                        {"command", command},
                        {"config_hash", pipeline::config_hash_hex(ctx.cfg)},
                        {"seed", ctx.seed}};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const pipeline::CommandResult res = fn(ctx);
    record["status"] = "ok";
    record["outputs"] = res.outputs;
    record["warnings"] = res.warnings;
    record["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    pipeline::append_run_record(ctx.out_dir, record);
    for (const auto& w : res.warnings)
      std::fprintf(stderr, "warning: %s\n", w.c_str());
    for (const auto& o : res.outputs) std::printf("%s\n", o.c_str());
    return 0;
  } catch (const ConfigError& e) {
    record["status"] = "error";
    record["error"] = e.what();
    pipeline::append_run_record(ctx.out_dir, record);
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    record["status"] = "error";
    record["error"] = e.what();
    record["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    pipeline::append_run_record(ctx.out_dir, record);
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cinegen: desk-scale text-to-movie pipeline"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--seed", g.seed, "root seed (overrides io.seed)");
  app.add_option("--out", g.out_dir, "output directory (overrides io.out_dir)");

  // expand
  std::string brief_text;
  int n_scenes = 10;
  double scene_seconds = 2.0;
  auto* expand = app.add_subcommand("expand", "expand a brief into scene scripts");
  expand->add_option("--text", brief_text, "user description")->required();
  expand->add_option("--scenes", n_scenes, "scene count");
  expand->add_option("--seconds", scene_seconds, "seconds per scene");

  // train
  std::string stage_name, dataset_dir, init_ckpt;
  auto* train = app.add_subcommand("train", "run one training stage");
  train->add_option("--stage", stage_name,
                    "BASE_PRETRAIN | SPATIAL_FINETUNE | TEMPORAL_TRAIN | "
                    "MOVIE_FINETUNE")
      ->required();
  train->add_option("--data", dataset_dir, "dataset directory")->required();
  train->add_option("--init", init_ckpt, "checkpoint to start from");

  // sample
  std::string ckpt_path, scripts_path;
  int sample_limit = 0;
  auto* sample = app.add_subcommand("sample", "sample clips for a script file");
  sample->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  sample->add_option("--scripts", scripts_path, "scripts.json")->required();
  sample->add_option("--count", sample_limit, "sample only the first N scenes");

  // retrieve-audio
  std::string ra_scripts, ra_clips;
  auto* retrieve =
      app.add_subcommand("retrieve-audio", "retrieve SFX and background music");
  retrieve->add_option("--scripts", ra_scripts, "scripts.json")->required();
  retrieve->add_option("--clips", ra_clips, "sampled clips directory")->required();

  // assemble
  std::string as_scripts, as_clips, as_retrieval;
  auto* assemble =
      app.add_subcommand("assemble", "compose clips and audio into a movie");
  assemble->add_option("--scripts", as_scripts, "scripts.json")->required();
  assemble->add_option("--clips", as_clips, "clips directory")->required();
  assemble->add_option("--retrieval", as_retrieval, "retrieval.json");

  // evaluate
  std::string ev_samples, ev_reference;
  auto* evaluate = app.add_subcommand("evaluate", "metric report for clip sets");
  evaluate->add_option("--samples", ev_samples, "sampled clips directory")
      ->required();
  evaluate->add_option("--reference", ev_reference, "reference clips directory")
      ->required();

  // make-movie
  std::string mm_text, mm_ckpt;
  int mm_scenes = 10;
  double mm_seconds = 2.0;
  auto* make_movie =
      app.add_subcommand("make-movie", "full pipeline: brief to exported movie");
  make_movie->add_option("--text", mm_text, "user description")->required();
  make_movie->add_option("--scenes", mm_scenes, "scene count");
  make_movie->add_option("--seconds", mm_seconds, "seconds per scene");
  make_movie->add_option("--checkpoint", mm_ckpt, "model checkpoint")->required();

  // make-dataset (toy data helper; not part of the movie pipeline proper)
  std::string md_dir = "dataset";
  int md_clips = 32, md_frames = 8;
  bool md_stills = false, md_two_domain = false;
  uint64_t md_seed = 7;
  auto* make_dataset =
      app.add_subcommand("make-dataset", "write a synthetic moving-square dataset");
  make_dataset->add_option("--dir", md_dir, "target directory")->required();
  make_dataset->add_option("--clips", md_clips, "clips per domain");
  make_dataset->add_option("--frames", md_frames, "frames per clip");
  make_dataset->add_flag("--stills", md_stills, "one-frame clips");
  make_dataset->add_flag("--two-domain", md_two_domain,
                         "bright (domain 0) plus dark (domain 1)");
  make_dataset->add_option("--dataset-seed", md_seed, "generator seed");

  // make-catalog (demo audio assets)
  std::string mc_dir = "catalog";
  auto* make_catalog =
      app.add_subcommand("make-catalog", "write a demo audio catalog");
  make_catalog->add_option("--dir", mc_dir, "target directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (expand->parsed()) {
    return run_recorded(g, "expand", [&](const pipeline::RunContext& ctx) {
      return pipeline::cmd_expand(ctx, {brief_text, n_scenes, scene_seconds});
    });
  }
  if (train->parsed()) {
    return run_recorded(g, "train", [&](const pipeline::RunContext& ctx) {
      return pipeline::cmd_train(ctx, stage_name, dataset_dir, init_ckpt);
    });
  }
  if (sample->parsed()) {
    return run_recorded(g, "sample", [&](const pipeline::RunContext& ctx) {
      return pipeline::cmd_sample(ctx, ckpt_path, scripts_path, sample_limit);
    });
  }
  if (retrieve->parsed()) {
    return run_recorded(g, "retrieve-audio", [&](const pipeline::RunContext& ctx) {
      return pipeline::cmd_retrieve_audio(ctx, ra_scripts, ra_clips);
    });
  }
  if (assemble->parsed()) {
    return run_recorded(g, "assemble", [&](const pipeline::RunContext& ctx) {
      return pipeline::cmd_assemble(ctx, as_scripts, as_clips, as_retrieval);
    });
  }
  if (evaluate->parsed()) {
    return run_recorded(g, "evaluate", [&](const pipeline::RunContext& ctx) {
      return pipeline::cmd_evaluate(ctx, ev_samples, ev_reference);
    });
  }
  if (make_movie->parsed()) {
    return run_recorded(g, "make-movie", [&](const pipeline::RunContext& ctx) {
      return pipeline::cmd_make_movie(ctx, {mm_text, mm_scenes, mm_seconds},
                                      mm_ckpt);
    });
  }
  if (make_dataset->parsed()) {
    return run_recorded(g, "make-dataset", [&](const pipeline::RunContext& ctx) {
      data::MovingSquareParams p;
      p.n_clips = md_clips;
      p.frames = md_frames;
      p.height = ctx.cfg.model.height;
      p.width = ctx.cfg.model.width;
      p.stills = md_stills;
      p.seed = md_seed;
      data::Dataset ds = data::make_moving_square_dataset(p);
      if (md_two_domain) {
        data::MovingSquareParams dark = p;
        dark.domain_id = 1;
        dark.domain_word = "dark";
        dark.background = 0.7;
        dark.foreground = 0.05;
        dark.seed = md_seed + 1;
        for (auto& c : data::make_moving_square_dataset(dark).clips)
          ds.clips.push_back(std::move(c));
      }
      data::save_dataset(ds, md_dir);
      pipeline::CommandResult res;
      res.outputs.push_back(md_dir);
      return res;
    });
  }
  if (make_catalog->parsed()) {
    return run_recorded(g, "make-catalog", [&](const pipeline::RunContext&) {
      audio::write_demo_catalog(mc_dir);
      pipeline::CommandResult res;
      res.outputs.push_back(mc_dir);
      return res;
    });
  }
  return 1;
}
