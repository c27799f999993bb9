#include "cinegen/model/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cinegen::model {

using nlohmann::json;

namespace {
constexpr char kMagic[9] = "CGCKPT01";

std::string to_hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"in_channels", cfg.in_channels},
              {"base_channels", cfg.base_channels},
              {"channel_mults", cfg.channel_mults},
              {"frames", cfg.frames},
              {"height", cfg.height},
              {"width", cfg.width},
              {"n_domains", cfg.n_domains},
              {"text_embed_dim", cfg.text_embed_dim},
              {"time_embed_dim", cfg.time_embed_dim},
              {"attn_levels", cfg.attn_levels},
              {"norm_groups", cfg.norm_groups},
              {"attn_heads", cfg.attn_heads},
              {"text_tokens", cfg.text_tokens}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.in_channels = j.value("in_channels", cfg.in_channels);
  cfg.base_channels = j.value("base_channels", cfg.base_channels);
  cfg.channel_mults = j.value("channel_mults", cfg.channel_mults);
  cfg.frames = j.value("frames", cfg.frames);
  cfg.height = j.value("height", cfg.height);
  cfg.width = j.value("width", cfg.width);
  cfg.n_domains = j.value("n_domains", cfg.n_domains);
  cfg.text_embed_dim = j.value("text_embed_dim", cfg.text_embed_dim);
  cfg.time_embed_dim = j.value("time_embed_dim", cfg.time_embed_dim);
  cfg.attn_levels = j.value("attn_levels", cfg.attn_levels);
  cfg.norm_groups = j.value("norm_groups", cfg.norm_groups);
  cfg.attn_heads = j.value("attn_heads", cfg.attn_heads);
  cfg.text_tokens = j.value("text_tokens", cfg.text_tokens);
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::string& path, VideoDenoiser& model,
                     const std::vector<std::string>& stages,
                     const std::vector<ArrayX>* ema) {
  auto params = model.parameters();
  if (ema != nullptr)
    check(ema->size() == params.size(),
          "save_checkpoint: EMA table does not align with parameters");

  uint64_t whash = 14695981039346656037ull;
  json ptable = json::array();
  for (const Parameter* p : params) {
    ptable.push_back(json{{"name", p->name},
                          {"group", nn::to_string(p->group)},
                          {"shape", p->shape}});
    whash = fnv1a64(p->value.data(),
                    static_cast<size_t>(p->value.size()) * sizeof(double), whash);
  }

  json header{{"format_version", 1},
              {"model", model_config_to_json(model.config())},
              {"seed", model.seed()},
              {"has_adapters", model.has_adapters()},
              {"has_temporal", model.has_temporal()},
              {"stages", stages},
              {"ema", ema != nullptr},
              {"weights_hash", to_hex(whash)},
              {"params", ptable}};
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check_as<IoError>(out.good(), "save_checkpoint: cannot open " + path);
  out.write(kMagic, 8);
  const uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const Parameter* p : params)
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  if (ema != nullptr)
    for (const ArrayX& a : *ema)
      out.write(reinterpret_cast<const char*>(a.data()),
                static_cast<std::streamsize>(a.size() * sizeof(double)));
  out.flush();
  check_as<IoError>(out.good(), "save_checkpoint: write failed for " + path);
}

namespace {

CheckpointMeta parse_header(const json& header) {
  CheckpointMeta meta;
  meta.format_version = header.at("format_version").get<int>();
  check_as<IoError>(meta.format_version == 1, "checkpoint: unsupported format version");
  meta.config = model_config_from_json(header.at("model"));
  meta.seed = header.at("seed").get<uint64_t>();
  meta.has_adapters = header.at("has_adapters").get<bool>();
  meta.has_temporal = header.at("has_temporal").get<bool>();
  meta.stages = header.at("stages").get<std::vector<std::string>>();
  meta.has_ema = header.at("ema").get<bool>();
  meta.weights_hash = header.at("weights_hash").get<std::string>();
  return meta;
}

json read_header_json(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  check_as<IoError>(in.good() && std::string(magic, 8) == kMagic,
                    "checkpoint: bad magic in " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  check_as<IoError>(in.good() && hlen > 0 && hlen < (1ull << 30),
                    "checkpoint: bad header length in " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  check_as<IoError>(in.good(), "checkpoint: truncated header in " + path);
  return json::parse(hs);
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_as<IoError>(in.good(), "load_checkpoint: cannot open " + path);
  const json header = read_header_json(in, path);
  LoadedCheckpoint result;
  result.meta = parse_header(header);

  result.model = VideoDenoiser::build_base(result.meta.config, result.meta.seed);
  if (result.meta.has_adapters) result.model.insert_spatial_adapters();
  if (result.meta.has_temporal) result.model.insert_temporal_layers();

  auto params = result.model.parameters();
  const json& ptable = header.at("params");
  check_as<IoError>(ptable.size() == params.size(),
                    "load_checkpoint: parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    const json& e = ptable[i];
    check_as<IoError>(e.at("name").get<std::string>() == params[i]->name,
                      "load_checkpoint: parameter name mismatch at index " +
                          std::to_string(i));
    check_as<IoError>(e.at("group").get<std::string>() ==
                          nn::to_string(params[i]->group),
                      "load_checkpoint: parameter group mismatch for " +
                          params[i]->name);
    in.read(reinterpret_cast<char*>(params[i]->value.data()),
            static_cast<std::streamsize>(params[i]->value.size() * sizeof(double)));
    check_as<IoError>(in.good(), "load_checkpoint: truncated data for " +
                                     params[i]->name);
  }
  if (result.meta.has_ema) {
    result.ema.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      result.ema[i] = ArrayX(params[i]->value.size());
      in.read(reinterpret_cast<char*>(result.ema[i].data()),
              static_cast<std::streamsize>(result.ema[i].size() * sizeof(double)));
      check_as<IoError>(in.good(), "load_checkpoint: truncated EMA data");
    }
  }
  return result;
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_as<IoError>(in.good(), "read_checkpoint_meta: cannot open " + path);
  return parse_header(read_header_json(in, path));
}

void apply_ema_weights(VideoDenoiser& model, const std::vector<ArrayX>& ema) {
  auto params = model.parameters();
  check(ema.size() == params.size(), "apply_ema_weights: table misaligned");
  for (size_t i = 0; i < params.size(); ++i) {
    check(ema[i].size() == params[i]->value.size(),
          "apply_ema_weights: size mismatch for " + params[i]->name);
    params[i]->value = ema[i];
  }
}

}  // namespace cinegen::model
