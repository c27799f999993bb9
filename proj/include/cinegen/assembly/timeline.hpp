#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cinegen/audio/index.hpp"
#include "cinegen/io/image.hpp"
#include "cinegen/script/script_gen.hpp"

namespace cinegen::assembly {

inline constexpr double kDefaultMusicGainDb = -12.0;
inline constexpr double kDefaultSfxGainDb = -6.0;

struct SfxChoice {
  audio::AudioAsset asset;
  double gain_db = kDefaultSfxGainDb;
};

struct MusicTrack {
  audio::AudioAsset asset;
  double gain_db = kDefaultMusicGainDb;
};

/// One scene's rendered frames plus its attached sound effect. Duration is
/// tied to the media: frame_count == round(duration * fps).
struct SceneClip {
  script::SceneScript scene;
  Tensor frames;  // [F, C, H, W], pixel space [0,1]
  double fps = 8.0;
  std::optional<SfxChoice> sfx;

  double duration_seconds() const;
  void validate() const;
};

/// Missing background music is an error by default; the pipeline allows it
/// when the audio catalog is empty (degraded export with a warning).
enum class MissingMusicPolicy { kError, kAllow };

struct MovieTimeline {
  std::vector<SceneClip> scenes;  // back-to-back hard cuts
  std::optional<MusicTrack> music;
  double total_duration = 0.0;
  int upscale_factor = 1;
  std::optional<script::ToneCategory> tone;
};

/// Places scenes back-to-back, anchors each SFX at its scene start (truncated
/// to the scene), and spans the single music track across the whole movie.
MovieTimeline assemble(std::vector<SceneClip> clips,
                       std::optional<MusicTrack> music,
                       MissingMusicPolicy policy = MissingMusicPolicy::kError);

/// Image-in image-out client with a fixed integer scale; failures carry the
/// scene index upstream.
class UpscaleClient {
 public:
  virtual ~UpscaleClient() = default;
  virtual io::Image upscale(const io::Image& frame) const = 0;
  virtual int scale_factor() const = 0;
};

class IdentityUpscaler : public UpscaleClient {
 public:
  io::Image upscale(const io::Image& frame) const override { return frame; }
  int scale_factor() const override { return 1; }
};

MovieTimeline apply_upscaler(MovieTimeline timeline, const UpscaleClient& client);

struct ManifestSfx {
  std::string asset_id;
  std::string path;  // relative to the export directory
  double offset = 0.0;
  double gain_db = kDefaultSfxGainDb;
  double truncated_to = 0.0;  // play length within the scene
};

struct ManifestScene {
  int index = 0;
  std::string text;
  std::string frame_dir;  // relative, frames frame_0000.png ...
  int frame_count = 0;
  double fps = 8.0;
  double start = 0.0;
  double end = 0.0;
  std::optional<ManifestSfx> sfx;
};

struct ManifestMusic {
  std::string asset_id;
  std::string path;
  double gain_db = kDefaultMusicGainDb;
};

struct ExportManifest {
  int version = 1;
  double total_duration = 0.0;
  int upscale_factor = 1;
  std::optional<std::string> tone;
  std::vector<ManifestScene> scenes;
  std::optional<ManifestMusic> music;
  nlohmann::json provenance;  // seeds, checkpoint id, config hash, run id

  nlohmann::json to_json() const;
  static ExportManifest from_json(const nlohmann::json& j);
};

/// Writes numbered PNG frames per scene, copies referenced audio, then writes
/// manifest.json as the final step. The audio source paths resolve against
/// audio_src_dir. Returns the written manifest.
ExportManifest export_movie(const MovieTimeline& timeline,
                            const std::string& out_dir,
                            const std::string& audio_src_dir,
                            const nlohmann::json& provenance);

/// Re-validates an exported directory: parses manifest.json, checks every
/// referenced file exists and that scene spans tile [0, total] exactly.
/// Throws naming the first violated invariant.
ExportManifest validate_export(const std::string& out_dir);

}  // namespace cinegen::assembly
