#include "pdistill/data/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "pdistill/common/error.h"
#include "pdistill/data/wav.h"

namespace pdistill::data {

namespace {

struct Formant {
  double hz;
  double amp;
};
using Vowel = std::array<Formant, 3>;

const std::array<Vowel, 4> kVowels = {{
    {{{300, 1.0}, {700, 0.6}, {2400, 0.05}}},
    {{{550, 1.0}, {1100, 0.7}, {2500, 0.1}}},
    {{{700, 0.8}, {1800, 0.8}, {2700, 0.3}}},
    {{{350, 0.5}, {2300, 1.0}, {3200, 0.8}}},
}};

// Vowel sequence per content class.
const std::array<std::array<int, 3>, kMaxContentClasses> kContent = {{
    {0, 1, 2},
    {3, 2, 1},
    {0, 3, 0},
    {1, 3, 1},
}};

constexpr double kBandwidthHz = 100.0;
constexpr double kMaxHarmonicHz = 5000.0;
constexpr double kRampSeconds = 0.02;
constexpr double kCrossfadeSeconds = 0.03;
constexpr double kPeak = 0.8;

double envelope(const Vowel& v, double hz) {
  double g = 0.0;
  for (const auto& f : v) {
    const double d = (hz - f.hz) / kBandwidthHz;
    g += f.amp / (1.0 + d * d);
  }
  return g;
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

}  // namespace

int SynthSpec::count(Split s) const {
  switch (s) {
    case Split::Train: return train_per_intent;
    case Split::Validation: return validation_per_intent;
    case Split::Test: return test_per_intent;
  }
  return 0;
}

void SynthSpec::validate() const {
  if (n_content_classes < 1 || n_content_classes > kMaxContentClasses) {
    throw ConfigError("n_content_classes must be in [1, " + std::to_string(kMaxContentClasses) + "]");
  }
  if (n_contour_classes < 1 || n_contour_classes > kMaxContourClasses) {
    throw ConfigError("n_contour_classes must be in [1, " + std::to_string(kMaxContourClasses) + "]");
  }
  if (!(utterance_seconds >= 0.5)) throw ConfigError("utterance_seconds must be >= 0.5");
  if (train_per_intent < 1 || validation_per_intent < 1 || test_per_intent < 1) {
    throw ConfigError("per-intent split counts must be >= 1");
  }
  if (!std::isfinite(noise_snr_db)) throw ConfigError("noise_snr_db must be finite");
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"n_content_classes", s.n_content_classes},
       {"n_contour_classes", s.n_contour_classes},
       {"utterance_seconds", s.utterance_seconds},
       {"train_per_intent", s.train_per_intent},
       {"validation_per_intent", s.validation_per_intent},
       {"test_per_intent", s.test_per_intent},
       {"noise_snr_db", s.noise_snr_db},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  SynthSpec d;
  s.n_content_classes = j.value("n_content_classes", d.n_content_classes);
  s.n_contour_classes = j.value("n_contour_classes", d.n_contour_classes);
  s.utterance_seconds = j.value("utterance_seconds", d.utterance_seconds);
  s.train_per_intent = j.value("train_per_intent", d.train_per_intent);
  s.validation_per_intent = j.value("validation_per_intent", d.validation_per_intent);
  s.test_per_intent = j.value("test_per_intent", d.test_per_intent);
  s.noise_snr_db = j.value("noise_snr_db", d.noise_snr_db);
  s.seed = j.value("seed", d.seed);
}

std::pair<double, double> contour_endpoints(int contour_class) {
  return contour_class == 0 ? std::pair{140.0, 220.0} : std::pair{220.0, 140.0};
}

SynthUtterance synth_utterance(int content_class, int contour_class, const SynthSpec& spec, Rng& rng) {
  if (content_class < 0 || content_class >= spec.n_content_classes) {
    throw Error("content_class " + std::to_string(content_class) + " out of range");
  }
  if (contour_class < 0 || contour_class >= spec.n_contour_classes) {
    throw Error("contour_class " + std::to_string(contour_class) + " out of range");
  }
  const double sr = dsp::kSampleRate;
  const auto n = static_cast<std::size_t>(std::llround(spec.utterance_seconds * sr));

  const double begin_frac = rng.uniform(0.05, 0.15);
  const double end_frac = rng.uniform(0.85, 0.95);
  const auto vb = static_cast<std::size_t>(begin_frac * n);
  const auto ve = static_cast<std::size_t>(end_frac * n);
  const double voiced = static_cast<double>(ve - vb);

  const double cut1 = rng.uniform(1.0 / 3 - 0.05, 1.0 / 3 + 0.05);
  const double cut2 = rng.uniform(2.0 / 3 - 0.05, 2.0 / 3 + 0.05);

  std::array<Vowel, 3> segs;
  for (int s = 0; s < 3; ++s) {
    segs[s] = kVowels[kContent[content_class][s]];
    for (auto& f : segs[s]) f.hz *= rng.uniform(0.95, 1.05);
  }
  const double gain = rng.uniform(0.5, 1.0);
  const auto [f0_start, f0_end] = contour_endpoints(contour_class);

  std::vector<double> x(n, 0.0);
  const double fade = kCrossfadeSeconds * sr / voiced;
  const double ramp = kRampSeconds * sr;
  double phase = 0.0;
  for (std::size_t i = vb; i < ve; ++i) {
    const double u = (i - vb) / voiced;
    const double f0 = f0_start + (f0_end - f0_start) * u;
    phase += 2.0 * std::numbers::pi * f0 / sr;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;

    // Crossfade weights of the two neighbouring segments.
    const double w12 = smoothstep((u - cut1) / fade + 0.5);
    const double w23 = smoothstep((u - cut2) / fade + 0.5);
    const double ws[3] = {1.0 - w12, w12 - w23, w23};

    double v = 0.0;
    const int harmonics = static_cast<int>(kMaxHarmonicHz / f0);
    for (int k = 1; k <= harmonics; ++k) {
      const double hz = k * f0;
      double g = 0.0;
      for (int s = 0; s < 3; ++s) {
        if (ws[s] > 0.0) g += ws[s] * envelope(segs[s], hz);
      }
      v += g / k * std::sin(k * phase);
    }
    const double edge = std::min({1.0, (i - vb) / ramp, (ve - i) / ramp});
    x[i] = v * edge;
  }

  double peak = 0.0, power = 0.0;
  for (double v : x) {
    peak = std::max(peak, std::abs(v));
    power += v * v;
  }
  const double scale = peak > 0.0 ? kPeak * gain / peak : 0.0;
  power = power * scale * scale / static_cast<double>(n);
  const double noise_std = std::sqrt(power / std::pow(10.0, spec.noise_snr_db / 10.0));

  SynthUtterance out;
  out.wave.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i] * scale + noise_std * rng.normal();
    out.wave.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  out.intent_id = content_class * spec.n_contour_classes + contour_class;
  out.voiced_begin = vb;
  out.voiced_end = ve;
  return out;
}

Manifest build_synth_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());

  Manifest m;
  m.root = out_dir;
  for (Split split : {Split::Train, Split::Validation, Split::Test}) {
    const std::string name = to_string(split);
    fs::create_directories(out_dir / "wav" / name, ec);
    if (ec) throw Error("cannot create " + (out_dir / "wav" / name).string() + ": " + ec.message());
    for (int content = 0; content < spec.n_content_classes; ++content) {
      for (int contour = 0; contour < spec.n_contour_classes; ++contour) {
        const int intent = content * spec.n_contour_classes + contour;
        for (int idx = 0; idx < spec.count(split); ++idx) {
          std::uint64_t s = derive_seed(spec.seed, name);
          s = derive_seed(s, static_cast<std::uint64_t>(intent));
          s = derive_seed(s, static_cast<std::uint64_t>(idx));
          Rng rng(s);
          const SynthUtterance u = synth_utterance(content, contour, spec, rng);
          const std::string rel =
              "wav/" + name + "/" + std::to_string(intent) + "_" + std::to_string(idx) + ".wav";
          write_wav(u.wave, out_dir / rel);
          m.entries.push_back({rel, intent, split});
        }
      }
    }
  }
  Rng shuffle(derive_seed(spec.seed, "manifest"));
  for (std::size_t i = m.entries.size(); i > 1; --i) {
    std::swap(m.entries[i - 1], m.entries[shuffle.below(i)]);
  }
  write_manifest(m.entries, out_dir / "manifest.jsonl");
  return m;
}

}  // namespace pdistill::data
