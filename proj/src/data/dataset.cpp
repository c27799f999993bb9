#include "cinegen/data/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "cinegen/io/image.hpp"

namespace cinegen::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> Dataset::domains() const {
  std::set<int> ds;
  for (const auto& c : clips) ds.insert(c.domain_id);
  return {ds.begin(), ds.end()};
}

Dataset load_dataset(const std::string& dir) {
  check_as<IoError>(fs::is_directory(dir), "load_dataset: not a directory: " + dir);
  std::vector<fs::path> clip_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) clip_dirs.push_back(e.path());
  std::sort(clip_dirs.begin(), clip_dirs.end());

  Dataset ds;
  for (const auto& cd : clip_dirs) {
    const fs::path sidecar = cd / "clip.json";
    if (!fs::exists(sidecar)) continue;
    std::ifstream in(sidecar);
    check_as<IoError>(in.good(), "load_dataset: cannot read " + sidecar.string());
    json j = json::parse(in);

    ClipExample clip;
    clip.id = cd.filename().string();
    clip.caption = j.at("caption").get<std::string>();
    clip.domain_id = j.at("domain").get<int>();
    clip.fps = j.at("fps").get<double>();

    std::vector<fs::path> frames;
    for (const auto& f : fs::directory_iterator(cd))
      if (f.path().extension() == ".png") frames.push_back(f.path());
    std::sort(frames.begin(), frames.end());
    check_as<IoError>(!frames.empty(), "load_dataset: clip has no frames: " +
                                           cd.string());

    const io::Image first = io::read_png(frames.front().string());
    const Eigen::Index F = static_cast<Eigen::Index>(frames.size());
    clip.video = Tensor({F, 3, first.height, first.width});
    for (Eigen::Index f = 0; f < F; ++f) {
      const io::Image img = io::read_png(frames[static_cast<size_t>(f)].string());
      check_as<IoError>(img.width == first.width && img.height == first.height,
                        "load_dataset: inconsistent frame sizes in " + cd.string());
      const Tensor t = io::image_to_tensor(img);
      std::copy(t.data(), t.data() + t.numel(),
                clip.video.data() + f * t.numel());
    }
    ds.clips.push_back(std::move(clip));
  }
  check_as<IoError>(!ds.clips.empty(), "load_dataset: no clips found in " + dir);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& clip : ds.clips) {
    const fs::path cd = fs::path(dir) / clip.id;
    fs::create_directories(cd);
    const Eigen::Index F = clip.video.dim(0);
    const Eigen::Index per = clip.video.numel() / F;
    for (Eigen::Index f = 0; f < F; ++f) {
      Tensor frame({clip.video.dim(1), clip.video.dim(2), clip.video.dim(3)});
      std::copy(clip.video.data() + f * per, clip.video.data() + (f + 1) * per,
                frame.data());
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%04d.png", static_cast<int>(f));
      io::write_png((cd / name).string(), io::tensor_to_image(frame));
    }
    json j{{"caption", clip.caption}, {"domain", clip.domain_id}, {"fps", clip.fps}};
    std::ofstream out(cd / "clip.json");
    check_as<IoError>(out.good(), "save_dataset: cannot write sidecar in " +
                                      cd.string());
    out << j.dump(2) << "\n";
  }
}

Tensor to_model_space(const Tensor& pixel) {
  Tensor t(pixel.shape());
  t.array() = pixel.array() * 2.0 - 1.0;
  return t;
}

Tensor to_pixel_space(const Tensor& model) {
  Tensor t(model.shape());
  t.array() = ((model.array().min(1.0).max(-1.0)) + 1.0) * 0.5;
  return t;
}

}  // namespace cinegen::data
