#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "pdistill/common/error.h"
#include "pdistill/model/model.h"

namespace pdistill::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// On disk: "PDCK", u32 LE format_version, u32 LE header length, JSON header
// {"config", "metadata", "params": [{"name", "shape", "offset"}]}, then the
// parameters as contiguous little-endian float32 in header order.
struct ModelCheckpoint {
  std::uint32_t format_version = kCheckpointVersion;
  ModelConfig config;
  ParameterSet params;
  // Training metadata: epoch, best_validation_accuracy, seed, ...
  nlohmann::json metadata = nlohmann::json::object();

  Model model() const { return Model(config, params); }
};

class CheckpointError : public Error {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, ShapeMismatch, Malformed };
  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

// Parameters are rounded to float32, the precision they are stored at.
ModelCheckpoint make_checkpoint(const Model& model, nlohmann::json metadata = nlohmann::json::object());

}  // namespace pdistill::model
