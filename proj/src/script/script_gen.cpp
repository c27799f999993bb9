#include "cinegen/script/script_gen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <regex>
#include <sstream>

namespace cinegen::script {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

/// 2.0 -> "2", 1.5 -> "1.5"
std::string format_number(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : s) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  lines.push_back(cur);
  return lines;
}

std::vector<std::string> split_sentences(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (size_t i = 0; i < s.size(); ++i) {
    cur.push_back(s[i]);
    if ((s[i] == '.' || s[i] == '!' || s[i] == '?') &&
        (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1])))) {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    }
  }
  const std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

const std::map<ToneCategory, std::vector<std::string>>& tone_keywords() {
  static const std::map<ToneCategory, std::vector<std::string>> table{
      {ToneCategory::kEpic,
       {"epic", "battle", "hero", "legend", "vast", "colossal", "saga", "mighty"}},
      {ToneCategory::kTense,
       {"tense", "chase", "danger", "storm", "escape", "perilous", "standoff",
        "frantic"}},
      {ToneCategory::kJoyful,
       {"joy", "celebrat", "laugh", "festival", "dance", "cheerful", "delight",
        "sunny"}},
      {ToneCategory::kMelancholic,
       {"melanchol", "lonely", "farewell", "fading", "sorrow", "abandoned", "dusk",
        "wistful"}},
      {ToneCategory::kMysterious,
       {"myster", "fog", "shadow", "hidden", "unknown", "enigma", "secret",
        "whisper"}},
      {ToneCategory::kSerene,
       {"serene", "calm", "gentle", "peaceful", "quiet", "meadow", "drifting",
        "tranquil"}},
      {ToneCategory::kTriumphant,
       {"triumph", "victory", "win", "winner", "checkered", "trophy", "champion",
        "finish line"}},
      {ToneCategory::kOminous,
       {"ominous", "dark", "threat", "looming", "dread", "sinister", "thunder",
        "eerie"}}};
  return table;
}

}  // namespace

void UserBrief::validate() const {
  check(!trim(text).empty(), "brief: text must be non-empty");
  check(n_scenes >= 1, "brief: n_scenes must be >= 1");
  check(scene_seconds > 0.0, "brief: scene_seconds must be > 0");
}

const std::array<std::string, kToneCategoryCount>& tone_names() {
  static const std::array<std::string, kToneCategoryCount> names{
      "epic",      "tense",  "joyful",     "melancholic",
      "mysterious", "serene", "triumphant", "ominous"};
  return names;
}

std::string to_string(ToneCategory tone) {
  return tone_names()[static_cast<size_t>(tone)];
}

std::optional<ToneCategory> parse_tone(const std::string& name) {
  const std::string n = lower(trim(name));
  const auto& names = tone_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == n) return static_cast<ToneCategory>(i);
  return std::nullopt;
}

std::string build_expansion_prompt(const UserBrief& brief) {
  brief.validate();
  std::string prompt;
  prompt += "Write a sequence of " + std::to_string(brief.n_scenes) +
            " prompts, using for movie generation for AI. Requirements:\n";
  prompt += "1) each prompt only serves for one scene lasting for about " +
            format_number(brief.scene_seconds) + " seconds;\n";
  prompt += "2) each prompt contains clear subjects and detailed descriptions;\n";
  prompt +=
      "3) each prompt contains texts like \"4K\" and \"high resolution\" for "
      "leading high-quality generation;\n";
  prompt += "4) the transition of each scene is very smooth;\n";
  prompt += "5) no other character appears in this movie. The movie is about " +
            trim(brief.text);
  return prompt;
}

ParseResult parse_scripts(const std::string& raw, const UserBrief& brief) {
  brief.validate();
  check_as<ParseError>(!trim(raw).empty(), "parse_scripts: raw text is empty");

  static const std::regex numbered(R"(^\s*(\d{1,3})[.)]\s*(.*)$)");
  static const std::regex bullet(R"(^\s*[-*]\s+(.*)$)");
  static const std::regex scene_prefix(R"(^\s*[Ss]cene\s+(\d{1,3})\s*[:\-]\s*(.*)$)");

  const std::vector<std::string> lines = split_lines(raw);
  std::vector<std::string> texts;
  bool any_marker = false;
  bool in_scene = false;
  for (const std::string& line : lines) {
    std::smatch m;
    std::string content;
    bool marked = false;
    if (std::regex_match(line, m, scene_prefix)) {
      content = m[2];
      marked = true;
    } else if (std::regex_match(line, m, numbered)) {
      content = m[2];
      marked = true;
    } else if (std::regex_match(line, m, bullet)) {
      content = m[1];
      marked = true;
    }
    if (marked) {
      any_marker = true;
      texts.push_back(trim(content));
      in_scene = true;
    } else if (in_scene && !trim(line).empty()) {
      // continuation of the previous scene
      texts.back() += texts.back().empty() ? trim(line) : " " + trim(line);
    }
  }

  if (!any_marker) {
    texts.clear();
    for (const std::string& line : lines) {
      const std::string t = trim(line);
      if (!t.empty()) texts.push_back(t);
    }
    if (texts.size() < 2) {
      // single paragraph: one scene per sentence, if there are at least two
      const std::vector<std::string> sentences = split_sentences(trim(raw));
      if (sentences.size() >= 2) {
        texts = sentences;
      } else {
        throw ParseError(
            "parse_scripts: no list markers and the text is a single unbroken "
            "paragraph shorter than 2 sentences");
      }
    }
  }

  texts.erase(std::remove_if(texts.begin(), texts.end(),
                             [](const std::string& t) { return t.empty(); }),
              texts.end());
  check_as<ParseError>(!texts.empty(), "parse_scripts: no scenes extracted");

  ParseResult result;
  result.scripts.brief = brief;
  for (size_t i = 0; i < texts.size(); ++i)
    result.scripts.scenes.push_back(
        {static_cast<int>(i), texts[i], brief.scene_seconds});
  result.count_mismatch =
      static_cast<int>(result.scripts.scenes.size()) != brief.n_scenes;
  return result;
}

ExpandResult expand(const UserBrief& brief, const TextExpansionClient& client,
                    int retries, const GenParams& params) {
  brief.validate();
  check(retries >= 0, "expand: retries must be >= 0");
  const std::string prompt = build_expansion_prompt(brief);
  for (int attempt = 0; attempt <= retries; ++attempt) {
    try {
      const std::string raw = client.complete(prompt, params);
      ParseResult pr = parse_scripts(raw, brief);
      return {std::move(pr.scripts), pr.count_mismatch, attempt + 1};
    } catch (const ClientError&) {
      if (attempt == retries) throw;
    } catch (const ParseError&) {
      if (attempt == retries) throw;
    }
  }
  throw ClientError("expand: unreachable retry state");
}

std::string build_tone_prompt(const ScriptSequence& scripts) {
  std::string prompt =
      "Summarize the plot and overall tone of this movie. Respond with exactly "
      "one word chosen from: ";
  const auto& names = tone_names();
  for (size_t i = 0; i < names.size(); ++i) {
    prompt += names[i];
    prompt += (i + 1 < names.size()) ? ", " : ".\n";
  }
  prompt += "Scripts:\n";
  for (const SceneScript& s : scripts.scenes)
    prompt += std::to_string(s.index + 1) + ". " + s.text + "\n";
  return prompt;
}

ToneLabel summarize_tone(const ScriptSequence& scripts,
                         const TextExpansionClient& client,
                         const GenParams& params) {
  check(!scripts.scenes.empty(), "summarize_tone: empty script sequence");
  const std::string response = client.complete(build_tone_prompt(scripts), params);
  const std::string r = lower(trim(response));

  if (auto exact = parse_tone(r)) return {*exact, 1.0};

  // case-insensitive containment; earliest occurrence wins
  size_t best_pos = std::string::npos;
  ToneCategory best = ToneCategory::kSerene;
  const auto& names = tone_names();
  for (size_t i = 0; i < names.size(); ++i) {
    const size_t pos = r.find(names[i]);
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      best = static_cast<ToneCategory>(i);
    }
  }
  if (best_pos != std::string::npos) return {best, 0.8};

  // keyword vote over the scene texts
  std::map<ToneCategory, int> votes;
  for (const SceneScript& s : scripts.scenes) {
    const std::string text = lower(s.text);
    for (const auto& [tone, words] : tone_keywords())
      for (const std::string& w : words)
        if (text.find(w) != std::string::npos) ++votes[tone];
  }
  ToneCategory winner = ToneCategory::kSerene;
  int best_votes = 0;
  for (int i = 0; i < kToneCategoryCount; ++i) {
    const auto tone = static_cast<ToneCategory>(i);
    const auto it = votes.find(tone);
    if (it != votes.end() && it->second > best_votes) {
      best_votes = it->second;
      winner = tone;
    }
  }
  if (best_votes > 0) return {winner, 0.5};
  return {ToneCategory::kSerene, 0.25};
}

std::string format_as_numbered_list(const std::vector<std::string>& texts) {
  std::string out;
  for (size_t i = 0; i < texts.size(); ++i)
    out += std::to_string(i + 1) + ". " + texts[i] + "\n";
  return out;
}

}  // namespace cinegen::script
