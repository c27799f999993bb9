#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cinegen/script/text_client.hpp"

namespace cinegen::script {

struct UserBrief {
  std::string text;
  int n_scenes = 10;
  double scene_seconds = 2.0;

  void validate() const;
};

struct SceneScript {
  int index = 0;
  std::string text;
  double duration_seconds = 2.0;
};

struct ScriptSequence {
  UserBrief brief;
  std::vector<SceneScript> scenes;
};

enum class ToneCategory {
  kEpic,
  kTense,
  kJoyful,
  kMelancholic,
  kMysterious,
  kSerene,
  kTriumphant,
  kOminous
};

constexpr int kToneCategoryCount = 8;
const std::array<std::string, kToneCategoryCount>& tone_names();
std::string to_string(ToneCategory tone);
std::optional<ToneCategory> parse_tone(const std::string& name);

struct ToneLabel {
  ToneCategory category = ToneCategory::kSerene;
  double confidence = 0.0;
};

/// Renders the five-requirement expansion template with the user text, scene
/// count and scene length substituted. Pure: identical briefs give
/// byte-identical prompts.
std::string build_expansion_prompt(const UserBrief& brief);

struct ParseResult {
  ScriptSequence scripts;
  bool count_mismatch = false;  // warning, not an error
};

/// Splits numbered / bulleted / "Scene N:" lines into scenes; unmarked text
/// falls back to line and then sentence segmentation. Raises ParseError when
/// nothing segmentable remains.
ParseResult parse_scripts(const std::string& raw, const UserBrief& brief);

struct ExpandResult {
  ScriptSequence scripts;
  bool count_mismatch = false;
  int attempts = 1;
};

/// Prompt + client call + parse, retried on client or parse failure up to
/// `retries` extra attempts with the same prompt.
ExpandResult expand(const UserBrief& brief, const TextExpansionClient& client,
                    int retries = 1, const GenParams& params = {});

std::string build_tone_prompt(const ScriptSequence& scripts);

/// Maps the client's answer onto the fixed category set: exact match, then
/// case-insensitive containment, then a keyword vote over the scene texts.
ToneLabel summarize_tone(const ScriptSequence& scripts,
                         const TextExpansionClient& client,
                         const GenParams& params = {});

/// Inverse fixture for the parser round-trip property.
std::string format_as_numbered_list(const std::vector<std::string>& texts);

}  // namespace cinegen::script
