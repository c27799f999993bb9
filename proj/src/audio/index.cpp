#include "cinegen/audio/index.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cinegen/core/rng.hpp"
#include "cinegen/io/wav.hpp"

namespace cinegen::audio {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(AssetKind kind) {
  return kind == AssetKind::kSfx ? "SFX" : "MUSIC";
}

AssetKind parse_kind(const std::string& name) {
  if (name == "SFX") return AssetKind::kSfx;
  if (name == "MUSIC") return AssetKind::kMusic;
  throw ConfigError("audio asset kind must be SFX or MUSIC, got: " + name);
}

void AudioAsset::validate() const {
  check(!asset_id.empty(), "audio asset: empty asset_id");
  check(!path.empty(), "audio asset: empty path for " + asset_id);
  check(duration_seconds > 0.0, "audio asset: duration must be > 0 for " + asset_id);
  if (kind == AssetKind::kMusic)
    check(tone.has_value(), "audio asset: MUSIC assets need a tone: " + asset_id);
}

AudioIndex::AudioIndex(Eigen::Index dim) : dim_(dim) {
  check(dim > 0, "audio index: dim must be > 0");
}

void AudioIndex::add(const AudioAsset& asset, EmbeddingVector caption_vec,
                     EmbeddingVector proxy_vec) {
  asset.validate();
  check_as<ShapeError>(caption_vec.dim() == dim_ && proxy_vec.dim() == dim_,
                       "audio index: embedding dim mismatch for " + asset.asset_id);
  check(caption_vec.norm > 0.0 && proxy_vec.norm > 0.0,
        "audio index: zero-norm embedding for " + asset.asset_id);
  const auto [it, inserted] = entries_.emplace(
      asset.asset_id,
      Entry{std::move(caption_vec), std::move(proxy_vec), asset});
  (void)it;
  check(inserted, "audio index: duplicate asset_id: " + asset.asset_id);
}

bool AudioIndex::has_kind(AssetKind kind) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& kv) { return kv.second.asset.kind == kind; });
}

const AudioAsset& AudioIndex::asset(const std::string& asset_id) const {
  const auto it = entries_.find(asset_id);
  check(it != entries_.end(), "audio index: unknown asset_id: " + asset_id);
  return it->second.asset;
}

namespace {

void rank_and_truncate(std::vector<ScoredAsset>& scored, int k) {
  std::sort(scored.begin(), scored.end(), [](const ScoredAsset& a,
                                             const ScoredAsset& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.asset_id < b.asset_id;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<size_t>(k));
}

}  // namespace

RetrievalResult AudioIndex::search(const EmbeddingVector& query, int k,
                                   std::optional<AssetKind> kind) const {
  check(k >= 1, "audio index: k must be >= 1");
  check_as<ShapeError>(query.dim() == dim_, "audio index: query dim mismatch");

  RetrievalResult result;
  for (const auto& [id, entry] : entries_) {
    if (kind && entry.asset.kind != *kind) continue;
    const double score = cosine(query, entry.caption_vec);
    result.ranked.push_back({id, score, score, 0.0});
  }
  rank_and_truncate(result.ranked, k);
  return result;
}

RetrievalResult retrieve_sfx(const script::SceneScript& scene, const Tensor& clip,
                             const AudioIndex& index, int k, double lambda) {
  check(lambda >= 0.0 && lambda <= 1.0, "retrieve_sfx: lambda must be in [0,1]");
  check(index.has_kind(AssetKind::kSfx), "retrieve_sfx: no SFX assets indexed");
  const EmbeddingVector text_query = embed_text(scene.text, index.dim());
  const EmbeddingVector video_query = embed_video(clip, index.dim());

  RetrievalResult result;
  result.fusion_lambda = lambda;
  for (const auto& [id, entry] : index.entries()) {
    if (entry.asset.kind != AssetKind::kSfx) continue;
    const double ts = cosine(text_query, entry.caption_vec);
    const double vs = cosine(video_query, entry.proxy_vec);
    result.ranked.push_back({id, (1.0 - lambda) * ts + lambda * vs, ts, vs});
  }
  rank_and_truncate(result.ranked, k);
  return result;
}

AudioAsset select_music(const script::ToneLabel& tone, const AudioIndex& index,
                        uint64_t seed) {
  check(index.has_kind(AssetKind::kMusic), "select_music: no MUSIC assets indexed");

  std::vector<const AudioAsset*> matching;  // map order keeps ids ascending
  for (const auto& [id, entry] : index.entries())
    if (entry.asset.kind == AssetKind::kMusic && entry.asset.tone &&
        *entry.asset.tone == tone.category)
      matching.push_back(&entry.asset);

  if (!matching.empty()) {
    Rng rng(derive_seed(seed, "select_music"));
    return *matching[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(matching.size()) - 1))];
  }
  // fallback: caption similarity against the tone word
  const RetrievalResult r = index.search(
      embed_text(script::to_string(tone.category), index.dim()), 1,
      AssetKind::kMusic);
  check(!r.ranked.empty(), "select_music: fallback search found nothing");
  return index.asset(r.ranked.front().asset_id);
}

// ------------------------------------------------------------- persistence

void AudioIndex::save(const std::string& path) const {
  json entries = json::array();
  for (const auto& [id, e] : entries_) {
    json je{{"asset_id", id},
            {"path", e.asset.path},
            {"caption", e.asset.caption},
            {"kind", to_string(e.asset.kind)},
            {"duration_seconds", e.asset.duration_seconds},
            {"caption_vec", std::vector<double>(e.caption_vec.values.data(),
                                                e.caption_vec.values.data() +
                                                    e.caption_vec.values.size())},
            {"proxy_vec", std::vector<double>(e.proxy_vec.values.data(),
                                              e.proxy_vec.values.data() +
                                                  e.proxy_vec.values.size())}};
    if (e.asset.tone) je["tone"] = script::to_string(*e.asset.tone);
    entries.push_back(std::move(je));
  }
  const json j{{"version", 1}, {"dim", dim_}, {"entries", entries}};
  std::ofstream out(path, std::ios::trunc);
  check_as<IoError>(out.good(), "audio index: cannot write " + path);
  out << j.dump(2) << "\n";
  check_as<IoError>(out.good(), "audio index: write failed for " + path);
}

AudioIndex AudioIndex::load(const std::string& path) {
  std::ifstream in(path);
  check_as<IoError>(in.good(), "audio index: cannot open " + path);
  const json j = json::parse(in);
  check_as<IoError>(j.at("version").get<int>() == 1,
                    "audio index: unsupported version in " + path);
  AudioIndex index(j.at("dim").get<Eigen::Index>());
  for (const json& je : j.at("entries")) {
    AudioAsset asset;
    asset.asset_id = je.at("asset_id").get<std::string>();
    asset.path = je.at("path").get<std::string>();
    asset.caption = je.at("caption").get<std::string>();
    asset.kind = parse_kind(je.at("kind").get<std::string>());
    asset.duration_seconds = je.at("duration_seconds").get<double>();
    if (je.contains("tone")) {
      const auto tone = script::parse_tone(je.at("tone").get<std::string>());
      check(tone.has_value(), "audio index: bad tone for " + asset.asset_id);
      asset.tone = tone;
    }
    auto to_vec = [](const json& arr) {
      EmbeddingVector v;
      const auto values = arr.get<std::vector<double>>();
      v.values = Eigen::Map<const ArrayX>(values.data(),
                                          static_cast<Eigen::Index>(values.size()));
      v.norm = std::sqrt(v.values.square().sum());
      return v;
    };
    index.add(asset, to_vec(je.at("caption_vec")), to_vec(je.at("proxy_vec")));
  }
  return index;
}

// ----------------------------------------------------------------- catalog

std::vector<AudioAsset> load_catalog(const std::string& dir) {
  const fs::path catalog = fs::path(dir) / "catalog.json";
  check_as<IoError>(fs::exists(catalog),
                    "audio catalog: missing " + catalog.string());
  std::ifstream in(catalog);
  check_as<IoError>(in.good(), "audio catalog: cannot open " + catalog.string());
  const json j = json::parse(in);
  check_as<IoError>(j.at("version").get<int>() == 1,
                    "audio catalog: unsupported version");
  std::vector<AudioAsset> assets;
  for (const json& ja : j.at("assets")) {
    AudioAsset a;
    a.asset_id = ja.at("asset_id").get<std::string>();
    a.path = ja.at("path").get<std::string>();
    a.caption = ja.at("caption").get<std::string>();
    a.kind = parse_kind(ja.at("kind").get<std::string>());
    a.duration_seconds = ja.at("duration_seconds").get<double>();
    if (ja.contains("tone") && !ja.at("tone").is_null()) {
      const auto tone = script::parse_tone(ja.at("tone").get<std::string>());
      check(tone.has_value(), "audio catalog: bad tone for " + a.asset_id);
      a.tone = tone;
    }
    a.validate();
    check_as<IoError>(fs::exists(fs::path(dir) / a.path),
                      "audio catalog: missing waveform file " + a.path);
    assets.push_back(std::move(a));
  }
  return assets;
}

void save_catalog(const std::vector<AudioAsset>& assets, const std::string& dir) {
  fs::create_directories(dir);
  json list = json::array();
  for (const AudioAsset& a : assets) {
    a.validate();
    json ja{{"asset_id", a.asset_id},
            {"path", a.path},
            {"caption", a.caption},
            {"kind", to_string(a.kind)},
            {"duration_seconds", a.duration_seconds}};
    if (a.tone) ja["tone"] = script::to_string(*a.tone);
    list.push_back(std::move(ja));
  }
  const json j{{"version", 1}, {"assets", list}};
  std::ofstream out(fs::path(dir) / "catalog.json", std::ios::trunc);
  check_as<IoError>(out.good(), "audio catalog: cannot write catalog.json");
  out << j.dump(2) << "\n";
}

AudioIndex build_index(const std::vector<AudioAsset>& assets,
                       const TextEmbedClient& embedder) {
  AudioIndex index(embedder.dim());
  for (const AudioAsset& a : assets) {
    // audio-proxy side defaults to the caption embedding; a real audio
    // encoder can be slotted in by writing proxy vectors into the index file
    EmbeddingVector cap = embedder.embed(a.caption);
    EmbeddingVector proxy = embedder.embed(a.caption);
    index.add(a, std::move(cap), std::move(proxy));
  }
  return index;
}

// ------------------------------------------------------------ demo catalog

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

io::WavData sine_pattern(double base_hz, double seconds, int harmonics,
                         uint64_t seed) {
  io::WavData wav;
  wav.sample_rate = 22050;
  wav.channels = 1;
  const size_t n = static_cast<size_t>(seconds * wav.sample_rate);
  wav.samples.resize(n);
  Rng rng(seed);
  const double vibrato = 0.5 + rng.uniform() * 2.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / wav.sample_rate;
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h)
      v += std::sin(kTwoPi * base_hz * h * t + 0.3 * h) / h;
    v *= 0.4 * (1.0 + 0.2 * std::sin(kTwoPi * vibrato * t));
    const double env = std::min(1.0, 10.0 * std::min(t, seconds - t));
    wav.samples[i] = static_cast<int16_t>(std::lround(v * env * 20000.0));
  }
  return wav;
}

}  // namespace

std::vector<AudioAsset> write_demo_catalog(const std::string& dir) {
  fs::create_directories(dir);
  std::vector<AudioAsset> assets;

  const std::array<double, script::kToneCategoryCount> music_hz{110, 196, 262, 147,
                                                               175, 220, 330, 98};
  const auto& names = script::tone_names();
  for (int i = 0; i < script::kToneCategoryCount; ++i) {
    AudioAsset a;
    a.asset_id = "music_" + names[static_cast<size_t>(i)];
    a.path = a.asset_id + ".wav";
    a.caption = names[static_cast<size_t>(i)] + " orchestral theme";
    a.kind = AssetKind::kMusic;
    a.tone = static_cast<script::ToneCategory>(i);
    const double seconds = 4.0;
    io::write_wav((fs::path(dir) / a.path).string(),
                  sine_pattern(music_hz[static_cast<size_t>(i)], seconds, 4,
                               static_cast<uint64_t>(i) + 11));
    a.duration_seconds = seconds;
    assets.push_back(std::move(a));
  }

  const std::vector<std::pair<std::string, double>> sfx{
      {"engine roar of a speeding car", 180},
      {"airplane jet flying overhead", 320},
      {"wind whoosh over open ground", 90},
      {"crowd cheering at the finish", 240},
      {"tires screeching around a turn", 410},
      {"footsteps on gravel", 60},
      {"ocean waves on the shore", 70},
      {"thunder rumbling in the distance", 45}};
  for (size_t i = 0; i < sfx.size(); ++i) {
    AudioAsset a;
    a.asset_id = "sfx_" + std::to_string(i);
    a.path = a.asset_id + ".wav";
    a.caption = sfx[i].first;
    a.kind = AssetKind::kSfx;
    const double seconds = 1.5;
    io::write_wav((fs::path(dir) / a.path).string(),
                  sine_pattern(sfx[i].second, seconds, 2, 100 + i));
    a.duration_seconds = seconds;
    assets.push_back(std::move(a));
  }

  save_catalog(assets, dir);
  return assets;
}

}  // namespace cinegen::audio
