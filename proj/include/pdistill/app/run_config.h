#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "pdistill/data/synth.h"
#include "pdistill/dsp/frontend.h"
#include "pdistill/train/config.h"

namespace pdistill::app {

// Everything one invocation needs. Serialized as
// {"synth", "data": {"dir", "manifest", "cache_dir", "crop_seconds"},
//  "frontend", "pitch", "train", "run_dir", "workers"}.
struct RunConfig {
  data::SynthSpec synth;
  std::string dataset_dir = "data/synth";
  std::string manifest;   // empty: <dataset_dir>/manifest.jsonl
  std::string cache_dir;  // empty: <dataset_dir>/cache; "none" disables caching
  double crop_seconds = 2.0;  // 0 keeps the original length
  dsp::FrameSpec frame;
  dsp::PitchConfig pitch;
  train::TrainConfig train;
  std::string run_dir;
  int workers = 1;  // run_config_from_json defaults to the core count, capped at 8

  std::filesystem::path manifest_path() const;
  std::filesystem::path cache_path() const;  // empty when disabled
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
// Starts from defaults; unknown keys raise ConfigError naming the key.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace pdistill::app
