#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdistill/model/config.h"

namespace pdistill::train {

enum class MtlScheme { Fixed, RandomPerStep };
enum class DistillParts { AttentionOnly, FeatureOnly, Both };
enum class DistillLevel { FrameLevel, Global };
enum class TeacherMode { PretrainedFrozen, JointFromScratch };

std::string to_string(MtlScheme s);
std::string to_string(DistillParts p);
std::string to_string(DistillLevel l);
std::string to_string(TeacherMode m);
MtlScheme parse_mtl_scheme(const std::string& s);
DistillParts parse_distill_parts(const std::string& s);
DistillLevel parse_distill_level(const std::string& s);
TeacherMode parse_teacher_mode(const std::string& s);

struct MtlConfig {
  MtlScheme scheme = MtlScheme::RandomPerStep;
  double a = 1.0;  // Fixed only
  double b = 1.0;
  bool operator==(const MtlConfig&) const = default;
};

struct TeacherConfig {
  TeacherMode mode = TeacherMode::PretrainedFrozen;
  std::string checkpoint;  // PretrainedFrozen only
  bool operator==(const TeacherConfig&) const = default;
};

// Names of the prosody channels in track column order.
const std::vector<std::string>& prosody_channel_names();
int parse_prosody_channel(const std::string& name);

struct TrainConfig {
  model::Arch arch = model::Arch::Teacher;
  int epochs = 20;
  int early_stop_patience = 10;
  int batch_size = 16;
  double lr_head = 1e-3;
  // Learning rate for "encoder." parameters; lr_head when unset.
  std::optional<double> lr_encoder;
  MtlConfig mtl;
  DistillParts distill_parts = DistillParts::Both;
  DistillLevel distill_level = DistillLevel::FrameLevel;
  TeacherConfig teacher;
  // Prosody channels models may see; the rest are zeroed.
  std::vector<int> feature_mask = {0, 1, 2, 3, 4, 5};
  // Acoustic archs only: SAP keys come from the aligned prosody track.
  bool prosody_attention = false;
  model::ModelDims dims;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Unknown keys are a ConfigError naming the key.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
nlohmann::json dims_to_json(const model::ModelDims& d);
void dims_from_json(const nlohmann::json& j, model::ModelDims& d);

// Rejects keys of j outside `allowed`, naming the first offender.
void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& where);

// Hash of everything that defines the experiment except the seed and the
// teacher checkpoint path, as 16 hex digits. Runs that differ only by seed
// share it.
std::string config_hash(const TrainConfig& c);

// Short human-readable summary of the settings that distinguish runs.
std::string describe(const TrainConfig& c);

}  // namespace pdistill::train
