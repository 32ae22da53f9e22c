#include "pdistill/app/run_config.h"

#include <fstream>

#include "pdistill/common/error.h"
#include "pdistill/data/dataset.h"

namespace pdistill::app {

using nlohmann::json;
using train::check_keys;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

std::filesystem::path RunConfig::manifest_path() const {
  return manifest.empty() ? std::filesystem::path(dataset_dir) / "manifest.jsonl" : std::filesystem::path(manifest);
}

std::filesystem::path RunConfig::cache_path() const {
  if (cache_dir == "none") return {};
  return cache_dir.empty() ? std::filesystem::path(dataset_dir) / "cache" : std::filesystem::path(cache_dir);
}

void RunConfig::validate() const {
  synth.validate();
  frame.validate();
  pitch.validate();
  train.validate();
  if (crop_seconds < 0) throw ConfigError("data.crop_seconds must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");

}

json to_json(const RunConfig& c) {
  return {{"synth", c.synth},
          {"data",
           {{"dir", c.dataset_dir}, {"manifest", c.manifest}, {"cache_dir", c.cache_dir},
            {"crop_seconds", c.crop_seconds}}},
          {"frontend",
           {{"window_samples", c.frame.window_samples},
            {"hop_samples", c.frame.hop_samples},
            {"n_mels", c.frame.n_mels}}},
          {"pitch",
           {{"f0_min", c.pitch.f0_min},
            {"f0_max", c.pitch.f0_max},
            {"dp_penalty", c.pitch.dp_penalty},
            {"nccf_floor_eps", c.pitch.nccf_floor_eps},
            {"soft_min_f0", c.pitch.soft_min_f0}}},
          {"train", c.train},
          {"run_dir", c.run_dir},
          {"workers", c.workers}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.workers = data::default_workers();
  check_keys(j, {"synth", "data", "frontend", "pitch", "train", "run_dir", "workers"}, "");
  if (j.contains("synth")) {
    const json& s = j["synth"];
    check_keys(s,
               {"n_content_classes", "n_contour_classes", "utterance_seconds", "train_per_intent",
                "validation_per_intent", "test_per_intent", "noise_snr_db", "seed"},
               "synth");
    try {
      c.synth = s.get<data::SynthSpec>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("synth: ") + e.what());
    }
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, {"dir", "manifest", "cache_dir", "crop_seconds"}, "data");
    read_opt(d, "dir", c.dataset_dir, "data");
    read_opt(d, "manifest", c.manifest, "data");
    read_opt(d, "cache_dir", c.cache_dir, "data");
    read_opt(d, "crop_seconds", c.crop_seconds, "data");
  }
  if (j.contains("frontend")) {
    const json& f = j["frontend"];
    check_keys(f, {"window_samples", "hop_samples", "n_mels"}, "frontend");
    read_opt(f, "window_samples", c.frame.window_samples, "frontend");
    read_opt(f, "hop_samples", c.frame.hop_samples, "frontend");
    read_opt(f, "n_mels", c.frame.n_mels, "frontend");
  }
  if (j.contains("pitch")) {
    const json& p = j["pitch"];
    check_keys(p, {"f0_min", "f0_max", "dp_penalty", "nccf_floor_eps", "soft_min_f0"}, "pitch");
    read_opt(p, "f0_min", c.pitch.f0_min, "pitch");
    read_opt(p, "f0_max", c.pitch.f0_max, "pitch");
    read_opt(p, "dp_penalty", c.pitch.dp_penalty, "pitch");
    read_opt(p, "nccf_floor_eps", c.pitch.nccf_floor_eps, "pitch");
    read_opt(p, "soft_min_f0", c.pitch.soft_min_f0, "pitch");
  }
  if (j.contains("train")) from_json(j["train"], c.train);
  read_opt(j, "run_dir", c.run_dir, "");
  read_opt(j, "workers", c.workers, "");
  const bool explicit_mel = j.contains("train") && j["train"].contains("dims") &&
                            j["train"]["dims"].contains("mel_channels");
  if (explicit_mel && c.train.dims.mel_channels != c.frame.n_mels) {
    throw ConfigError("train.dims.mel_channels " + std::to_string(c.train.dims.mel_channels) +
                      " != frontend.n_mels " + std::to_string(c.frame.n_mels));
  }
  c.train.dims.mel_channels = c.frame.n_mels;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace pdistill::app
