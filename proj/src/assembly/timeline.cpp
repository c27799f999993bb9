#include "cinegen/assembly/timeline.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace cinegen::assembly {

namespace fs = std::filesystem;
using nlohmann::json;

double SceneClip::duration_seconds() const {
  return static_cast<double>(frames.dim(0)) / fps;
}

void SceneClip::validate() const {
  check(fps > 0.0, "scene clip: fps must be > 0");
  check_as<ShapeError>(frames.rank() == 4 && frames.dim(0) >= 1,
                       "scene clip: frames must be [F, C, H, W]");
  const double d = duration_seconds();
  check(static_cast<Eigen::Index>(std::lround(d * fps)) == frames.dim(0),
        "scene clip: frame count does not equal round(duration * fps)");
}

MovieTimeline assemble(std::vector<SceneClip> clips,
                       std::optional<MusicTrack> music, MissingMusicPolicy policy) {
  check(!clips.empty(), "assemble: at least one scene required");
  if (policy == MissingMusicPolicy::kError)
    check(music.has_value(), "assemble: missing music track");

  MovieTimeline timeline;
  double total = 0.0;
  for (SceneClip& clip : clips) {
    clip.validate();
    total += clip.duration_seconds();
    timeline.scenes.push_back(std::move(clip));
  }
  timeline.music = std::move(music);
  timeline.total_duration = total;
  return timeline;
}

MovieTimeline apply_upscaler(MovieTimeline timeline, const UpscaleClient& client) {
  const int scale = client.scale_factor();
  check(scale >= 1, "apply_upscaler: scale factor must be >= 1");
  for (size_t s = 0; s < timeline.scenes.size(); ++s) {
    SceneClip& clip = timeline.scenes[s];
    const Eigen::Index F = clip.frames.dim(0), C = clip.frames.dim(1),
                       H = clip.frames.dim(2), W = clip.frames.dim(3);
    Tensor out({F, C, H * scale, W * scale});
    for (Eigen::Index f = 0; f < F; ++f) {
      Tensor frame({C, H, W});
      std::copy(clip.frames.data() + f * C * H * W,
                clip.frames.data() + (f + 1) * C * H * W, frame.data());
      io::Image up;
      try {
        up = client.upscale(io::tensor_to_image(frame));
      } catch (const std::exception& e) {
        throw ClientError("upscaler failed on scene " + std::to_string(s) + ": " +
                          e.what());
      }
      check_as<ClientError>(up.width == W * scale && up.height == H * scale,
                            "upscaler returned wrong size on scene " +
                                std::to_string(s));
      const Tensor t = io::image_to_tensor(up);
      std::copy(t.data(), t.data() + t.numel(), out.data() + f * t.numel());
    }
    clip.frames = std::move(out);
  }
  timeline.upscale_factor *= scale;
  return timeline;
}

json ExportManifest::to_json() const {
  json scenes_j = json::array();
  for (const ManifestScene& s : scenes) {
    json js{{"index", s.index},       {"text", s.text},
            {"frame_dir", s.frame_dir}, {"frame_count", s.frame_count},
            {"fps", s.fps},           {"span", {{"start", s.start}, {"end", s.end}}}};
    if (s.sfx)
      js["sfx"] = json{{"asset_id", s.sfx->asset_id},
                       {"path", s.sfx->path},
                       {"offset", s.sfx->offset},
                       {"gain_db", s.sfx->gain_db},
                       {"truncated_to", s.sfx->truncated_to}};
    scenes_j.push_back(std::move(js));
  }
  json j{{"version", version},
         {"total_duration", total_duration},
         {"upscale_factor", upscale_factor},
         {"scenes", scenes_j},
         {"provenance", provenance}};
  if (tone) j["tone"] = *tone;
  if (music)
    j["music"] = json{{"asset_id", music->asset_id},
                      {"path", music->path},
                      {"gain_db", music->gain_db}};
  return j;
}

ExportManifest ExportManifest::from_json(const json& j) {
  ExportManifest m;
  m.version = j.at("version").get<int>();
  m.total_duration = j.at("total_duration").get<double>();
  m.upscale_factor = j.at("upscale_factor").get<int>();
  if (j.contains("tone")) m.tone = j.at("tone").get<std::string>();
  for (const json& js : j.at("scenes")) {
    ManifestScene s;
    s.index = js.at("index").get<int>();
    s.text = js.at("text").get<std::string>();
    s.frame_dir = js.at("frame_dir").get<std::string>();
    s.frame_count = js.at("frame_count").get<int>();
    s.fps = js.at("fps").get<double>();
    s.start = js.at("span").at("start").get<double>();
    s.end = js.at("span").at("end").get<double>();
    if (js.contains("sfx")) {
      ManifestSfx sfx;
      sfx.asset_id = js.at("sfx").at("asset_id").get<std::string>();
      sfx.path = js.at("sfx").at("path").get<std::string>();
      sfx.offset = js.at("sfx").at("offset").get<double>();
      sfx.gain_db = js.at("sfx").at("gain_db").get<double>();
      sfx.truncated_to = js.at("sfx").at("truncated_to").get<double>();
      s.sfx = std::move(sfx);
    }
    m.scenes.push_back(std::move(s));
  }
  if (j.contains("music")) {
    ManifestMusic mu;
    mu.asset_id = j.at("music").at("asset_id").get<std::string>();
    mu.path = j.at("music").at("path").get<std::string>();
    mu.gain_db = j.at("music").at("gain_db").get<double>();
    m.music = std::move(mu);
  }
  if (j.contains("provenance")) m.provenance = j.at("provenance");
  return m;
}

ExportManifest export_movie(const MovieTimeline& timeline,
                            const std::string& out_dir,
                            const std::string& audio_src_dir,
                            const json& provenance) {
  check(!timeline.scenes.empty(), "export: timeline has no scenes");
  fs::create_directories(out_dir);

  ExportManifest manifest;
  manifest.total_duration = timeline.total_duration;
  manifest.upscale_factor = timeline.upscale_factor;
  if (timeline.tone) manifest.tone = script::to_string(*timeline.tone);
  manifest.provenance = provenance;

  auto copy_audio = [&](const std::string& rel_src) -> std::string {
    const fs::path src = fs::path(audio_src_dir) / rel_src;
    check_as<IoError>(fs::exists(src), "export: missing audio file " + src.string());
    const fs::path rel_dst = fs::path("audio") / fs::path(rel_src).filename();
    const fs::path dst = fs::path(out_dir) / rel_dst;
    fs::create_directories(dst.parent_path());
    fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
    return rel_dst.string();
  };

  double cursor = 0.0;
  for (size_t k = 0; k < timeline.scenes.size(); ++k) {
    const SceneClip& clip = timeline.scenes[k];
    char dirname[32];
    std::snprintf(dirname, sizeof(dirname), "scene_%03d", static_cast<int>(k));
    const fs::path scene_dir = fs::path(out_dir) / dirname;
    fs::create_directories(scene_dir);

    const Eigen::Index F = clip.frames.dim(0);
    const Eigen::Index per = clip.frames.numel() / F;
    for (Eigen::Index f = 0; f < F; ++f) {
      Tensor frame({clip.frames.dim(1), clip.frames.dim(2), clip.frames.dim(3)});
      std::copy(clip.frames.data() + f * per, clip.frames.data() + (f + 1) * per,
                frame.data());
      char fname[32];
      std::snprintf(fname, sizeof(fname), "frame_%04d.png", static_cast<int>(f));
      io::write_png((scene_dir / fname).string(), io::tensor_to_image(frame));
    }

    ManifestScene ms;
    ms.index = static_cast<int>(k);
    ms.text = clip.scene.text;
    ms.frame_dir = dirname;
    ms.frame_count = static_cast<int>(F);
    ms.fps = clip.fps;
    ms.start = cursor;
    cursor += clip.duration_seconds();
    ms.end = cursor;
    if (clip.sfx) {
      ManifestSfx sfx;
      sfx.asset_id = clip.sfx->asset.asset_id;
      sfx.path = copy_audio(clip.sfx->asset.path);
      sfx.offset = ms.start;  // anchored at scene start
      sfx.gain_db = clip.sfx->gain_db;
      sfx.truncated_to =
          std::min(clip.sfx->asset.duration_seconds, clip.duration_seconds());
      ms.sfx = std::move(sfx);
    }
    manifest.scenes.push_back(std::move(ms));
  }

  if (timeline.music) {
    ManifestMusic mm;
    mm.asset_id = timeline.music->asset.asset_id;
    mm.path = copy_audio(timeline.music->asset.path);
    mm.gain_db = timeline.music->gain_db;
    manifest.music = std::move(mm);
  }

  // manifest is the single final write
  std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  check_as<IoError>(out.good(), "export: cannot write manifest.json");
  out << manifest.to_json().dump(2) << "\n";
  out.flush();
  check_as<IoError>(out.good(), "export: manifest write failed");

  validate_export(out_dir);
  return manifest;
}

ExportManifest validate_export(const std::string& out_dir) {
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  check_as<IoError>(fs::exists(manifest_path),
                    "validate: missing manifest.json in " + out_dir);
  std::ifstream in(manifest_path);
  const ExportManifest m = ExportManifest::from_json(json::parse(in));

  check(m.version == 1, "validate: unsupported manifest version");
  check(!m.scenes.empty(), "validate: manifest has no scenes");

  constexpr double kTimeEps = 1e-9;
  double cursor = 0.0;
  for (const ManifestScene& s : m.scenes) {
    check(std::abs(s.start - cursor) <= kTimeEps,
          "validate: scene " + std::to_string(s.index) +
              " span does not start where the previous ended");
    const double d = static_cast<double>(s.frame_count) / s.fps;
    check(std::abs((s.end - s.start) - d) <= kTimeEps,
          "validate: scene " + std::to_string(s.index) +
              " span does not match frame_count / fps");
    cursor = s.end;
    for (int f = 0; f < s.frame_count; ++f) {
      char fname[32];
      std::snprintf(fname, sizeof(fname), "frame_%04d.png", f);
      const fs::path p = fs::path(out_dir) / s.frame_dir / fname;
      check_as<IoError>(fs::exists(p), "validate: missing frame file " + p.string());
    }
    if (s.sfx) {
      const fs::path p = fs::path(out_dir) / s.sfx->path;
      check_as<IoError>(fs::exists(p), "validate: missing sfx file " + p.string());
      check(std::abs(s.sfx->offset - s.start) <= kTimeEps,
            "validate: sfx offset not anchored at scene start for scene " +
                std::to_string(s.index));
      check(s.sfx->truncated_to <= (s.end - s.start) + kTimeEps,
            "validate: sfx exceeds scene duration for scene " +
                std::to_string(s.index));
    }
  }
  check(std::abs(cursor - m.total_duration) <= kTimeEps,
        "validate: scene spans do not tile total_duration");
  if (m.music) {
    const fs::path p = fs::path(out_dir) / m.music->path;
    check_as<IoError>(fs::exists(p), "validate: missing music file " + p.string());
  }
  return m;
}

}  // namespace cinegen::assembly
