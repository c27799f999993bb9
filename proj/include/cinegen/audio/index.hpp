#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cinegen/audio/embeddings.hpp"
#include "cinegen/script/script_gen.hpp"

namespace cinegen::audio {

enum class AssetKind { kSfx, kMusic };

std::string to_string(AssetKind kind);
AssetKind parse_kind(const std::string& name);

struct AudioAsset {
  std::string asset_id;
  std::string path;  // waveform file, relative to the catalog directory
  std::string caption;
  AssetKind kind = AssetKind::kSfx;
  std::optional<script::ToneCategory> tone;  // MUSIC assets carry one
  double duration_seconds = 0.0;

  void validate() const;
};

struct ScoredAsset {
  std::string asset_id;
  double score = 0.0;       // cosine or fused score
  double text_score = 0.0;  // fusion provenance
  double video_score = 0.0;
};

struct RetrievalResult {
  std::vector<ScoredAsset> ranked;  // scores non-increasing, ties by asset_id
  double fusion_lambda = 0.0;
};

/// Embedding-indexed asset table searched by exhaustive cosine scan with a
/// deterministic tie-break on ascending asset_id.
class AudioIndex {
 public:
  struct Entry {
    EmbeddingVector caption_vec;
    EmbeddingVector proxy_vec;  // audio-proxy side (caption stub by default)
    AudioAsset asset;
  };

  explicit AudioIndex(Eigen::Index dim);

  void add(const AudioAsset& asset, EmbeddingVector caption_vec,
           EmbeddingVector proxy_vec);
  RetrievalResult search(const EmbeddingVector& query, int k,
                         std::optional<AssetKind> kind = std::nullopt) const;

  Eigen::Index dim() const { return dim_; }
  size_t size() const { return entries_.size(); }
  bool has_kind(AssetKind kind) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const AudioAsset& asset(const std::string& asset_id) const;

  /// JSON persistence; vectors round-trip bit-exactly.
  void save(const std::string& path) const;
  static AudioIndex load(const std::string& path);

 private:
  Eigen::Index dim_ = 0;
  std::map<std::string, Entry> entries_;
};

/// Fused sound-effect retrieval:
/// score = (1-lambda) * cos(text query, caption vec)
///       + lambda     * cos(video query, audio-proxy vec).
RetrievalResult retrieve_sfx(const script::SceneScript& scene, const Tensor& clip,
                             const AudioIndex& index, int k, double lambda);

/// One tone-matched background track for the whole movie: seeded pick among
/// matching MUSIC assets, caption-similarity fallback when the tone bucket is
/// empty.
AudioAsset select_music(const script::ToneLabel& tone, const AudioIndex& index,
                        uint64_t seed);

/// Catalog directory format: waveform files plus catalog.json.
std::vector<AudioAsset> load_catalog(const std::string& dir);
void save_catalog(const std::vector<AudioAsset>& assets, const std::string& dir);

AudioIndex build_index(const std::vector<AudioAsset>& assets,
                       const TextEmbedClient& embedder);

/// Writes a small self-contained demo catalog (sine-pattern WAVs + JSON):
/// one music track per tone category plus a handful of sound effects.
std::vector<AudioAsset> write_demo_catalog(const std::string& dir);

}  // namespace cinegen::audio
