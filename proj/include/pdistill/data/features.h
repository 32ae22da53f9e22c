#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "pdistill/common/matrix.h"
#include "pdistill/dsp/frontend.h"

namespace pdistill::data {

// Feature dump: one JSON header line {"rows":T,"cols":C,"kind":"mel"|"prosody"}
// then T*C row-major little-endian float32 values. Extra header keys are
// allowed and preserved by callers that need them.
std::string encode_feature_dump(const Matrix& m, const std::string& kind, const std::string& key = "");
void write_feature_dump(const Matrix& m, const std::string& kind, const std::filesystem::path& path,
                        const std::string& key = "");

struct FeatureDump {
  Matrix values;
  std::string kind;
  std::string key;  // empty when absent
};
FeatureDump parse_feature_dump(const std::string& bytes);
FeatureDump read_feature_dump(const std::filesystem::path& path);

// Rounds every value through float32 so computed features equal cached ones.
void round_to_float(Matrix& m);

// Mel + normalized prosody rounded to float32.
dsp::Features compute_features(const dsp::Waveform& w, const dsp::FrameSpec& frame,
                               const dsp::PitchConfig& pitch);

std::uint64_t frontend_config_hash(const dsp::FrameSpec& frame, const dsp::PitchConfig& pitch,
                                   double crop_seconds);

using WarnFn = std::function<void(const std::string&)>;
void warn_stderr(const std::string& msg);

// On-disk feature cache keyed by (audio bytes, frontend config). An empty
// directory disables caching. Safe for concurrent readers and writers: entries
// are written to a temporary file and renamed into place.
class FeatureCache {
 public:
  FeatureCache(std::filesystem::path dir, dsp::FrameSpec frame, dsp::PitchConfig pitch,
               double crop_seconds, WarnFn warn = warn_stderr);

  // Loads the WAV (cropped or padded when crop_seconds > 0) and returns its
  // features, from the cache when a valid entry exists.
  dsp::Features get(const std::filesystem::path& wav_path) const;

  std::string key_for(const std::string& wav_bytes) const;
  std::filesystem::path entry_path(const std::string& key, const std::string& kind) const;
  bool enabled() const { return !dir_.empty(); }

 private:
  std::filesystem::path dir_;
  dsp::FrameSpec frame_;
  dsp::PitchConfig pitch_;
  double crop_seconds_;
  WarnFn warn_;
  std::uint64_t config_hash_;
};

}  // namespace pdistill::data
