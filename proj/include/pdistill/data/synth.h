#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "pdistill/common/rng.h"
#include "pdistill/data/manifest.h"
#include "pdistill/dsp/frontend.h"

namespace pdistill::data {

// Toy intent corpus where intent = content x contour. Content classes are
// sequences of three formant patterns (what is said); contour classes are
// f0 trajectories over the voiced region (how it is said).
struct SynthSpec {
  int n_content_classes = 4;
  int n_contour_classes = 2;  // 0 rising 140->220 Hz, 1 falling 220->140 Hz
  double utterance_seconds = 2.0;
  int train_per_intent = 50;
  int validation_per_intent = 10;
  int test_per_intent = 10;
  double noise_snr_db = 20.0;
  std::uint64_t seed = 0;

  int n_intents() const { return n_content_classes * n_contour_classes; }
  int count(Split s) const;
  void validate() const;
  bool operator==(const SynthSpec&) const = default;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

struct SynthUtterance {
  dsp::Waveform wave;
  int intent_id = 0;
  // Voiced region [begin, end) in samples; outside it there is only noise.
  std::size_t voiced_begin = 0;
  std::size_t voiced_end = 0;
};

inline constexpr int kMaxContentClasses = 4;
inline constexpr int kMaxContourClasses = 2;

// f0 at the start and end of the voiced region for a contour class.
std::pair<double, double> contour_endpoints(int contour_class);

SynthUtterance synth_utterance(int content_class, int contour_class, const SynthSpec& spec, Rng& rng);

// Writes wav/<split>/<intent>_<index>.wav and manifest.jsonl under out_dir.
// Each utterance draws from its own stream keyed by (seed, split, intent,
// index); manifest rows are shuffled with the seed.
Manifest build_synth_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace pdistill::data
