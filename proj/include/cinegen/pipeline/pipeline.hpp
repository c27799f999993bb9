#pragma once

#include <string>
#include <vector>

#include "cinegen/pipeline/config.hpp"
#include "cinegen/script/script_gen.hpp"

namespace cinegen::pipeline {

/// Resolved per-invocation state shared by every command.
struct RunContext {
  PipelineConfig cfg;
  std::string out_dir;
  uint64_t seed = 0;
  std::string run_id;
};

struct CommandResult {
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
};

std::string new_run_id();
RunContext make_run_context(PipelineConfig cfg);

/// Appends one JSON line to <out_dir>/runs.jsonl (created on demand).
void append_run_record(const std::string& out_dir, const nlohmann::json& record);

// Stage artifacts are files between commands: scripts.json, checkpoints,
// clip directories, retrieval.json, movie/manifest.json.

CommandResult cmd_expand(const RunContext& ctx, const script::UserBrief& brief);

CommandResult cmd_train(const RunContext& ctx, const std::string& stage_name,
                        const std::string& dataset_dir,
                        const std::string& init_checkpoint = "");

CommandResult cmd_sample(const RunContext& ctx, const std::string& checkpoint,
                         const std::string& scripts_path, int limit = 0);

CommandResult cmd_retrieve_audio(const RunContext& ctx,
                                 const std::string& scripts_path,
                                 const std::string& clips_dir);

CommandResult cmd_assemble(const RunContext& ctx, const std::string& scripts_path,
                           const std::string& clips_dir,
                           const std::string& retrieval_path = "");

CommandResult cmd_evaluate(const RunContext& ctx, const std::string& samples_dir,
                           const std::string& reference_dir);

/// Fig.-1 orchestration: expand -> per-scene sampling -> audio retrieval ->
/// assembly -> export. Streams stage outputs through a staging directory;
/// failures retain partial outputs under <out>/failed/<run_id>.
CommandResult cmd_make_movie(const RunContext& ctx, const script::UserBrief& brief,
                             const std::string& checkpoint);

// scripts.json serialization, shared by commands and tests
void write_scripts_json(const std::string& path,
                        const script::ScriptSequence& scripts,
                        bool count_mismatch);
script::ScriptSequence read_scripts_json(const std::string& path);

}  // namespace cinegen::pipeline
