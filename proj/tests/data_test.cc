#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "pdistill/common/error.h"
#include "pdistill/common/rng.h"
#include "pdistill/data/dataset.h"
#include "pdistill/data/features.h"
#include "pdistill/data/manifest.h"
#include "pdistill/data/synth.h"
#include "pdistill/data/wav.h"

using namespace pdistill;
using namespace pdistill::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    Rng rng(std::random_device{}());
    path = fs::temp_directory_path() / ("pd_data_test_" + std::to_string(rng.next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

dsp::Waveform ramp_wave(std::size_t n) {
  dsp::Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = static_cast<float>(std::sin(0.01 * i) * 0.7);
  return w;
}

// Least-squares slope of y over x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

SynthSpec small_spec() {
  SynthSpec s;
  s.train_per_intent = 2;
  s.validation_per_intent = 1;
  s.test_per_intent = 1;
  s.utterance_seconds = 1.0;
  return s;
}

}  // namespace

TEST_CASE("wav: length, scaling edge, and round trip") {
  dsp::Waveform w = ramp_wave(1234);
  w.samples[0] = -1.0f;
  const dsp::Waveform back = parse_wav(encode_wav(w));
  REQUIRE(back.samples.size() == 1234);
  CHECK(back.samples[0] == -1.0f);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0 / 32768);
  }
  TempDir dir;
  write_wav(w, dir.path / "a.wav");
  CHECK(load_wav(dir.path / "a.wav").samples == back.samples);
}

TEST_CASE("wav: format errors name the property") {
  std::string bytes = encode_wav(ramp_wave(100));
  auto patch32 = [](std::string b, std::size_t off, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[off + i] = static_cast<char>((v >> (8 * i)) & 0xff);
    return b;
  };
  auto patch16 = [](std::string b, std::size_t off, std::uint16_t v) {
    b[off] = static_cast<char>(v & 0xff);
    b[off + 1] = static_cast<char>(v >> 8);
    return b;
  };
  CHECK_THROWS_WITH(parse_wav(patch32(bytes, 24, 44100)), "sample_rate 44100 != 16000");
  CHECK_THROWS_WITH(parse_wav(patch16(bytes, 22, 2)), "channels 2 != 1");
  CHECK_THROWS_WITH(parse_wav(patch16(bytes, 34, 8)), "bits_per_sample 8 != 16");
  CHECK_THROWS_WITH(parse_wav(patch16(bytes, 20, 3)), "audio_format 3 != 1 (PCM)");
  CHECK_THROWS_WITH(parse_wav(bytes.substr(0, 60)),
                    doctest::Contains("malformed RIFF at byte offset 36"));
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH(parse_wav(bad), doctest::Contains("byte offset 0"));
}

TEST_CASE("crop_or_pad") {
  const dsp::Waveform six = ramp_wave(96000);
  const dsp::Waveform a = crop_or_pad(six, 5.0);
  REQUIRE(a.samples.size() == 80000);
  CHECK(std::equal(a.samples.begin(), a.samples.end(), six.samples.begin()));

  const dsp::Waveform three = ramp_wave(48000);
  const dsp::Waveform b = crop_or_pad(three, 5.0);
  REQUIRE(b.samples.size() == 80000);
  CHECK(std::equal(three.samples.begin(), three.samples.end(), b.samples.begin()));
  CHECK(std::all_of(b.samples.begin() + 48000, b.samples.end(), [](float v) { return v == 0.0f; }));

  const dsp::Waveform five = ramp_wave(80000);
  CHECK(crop_or_pad(five, 5.0).samples == five.samples);
}

TEST_CASE("manifest round trip and validation") {
  TempDir dir;
  write_wav(ramp_wave(800), dir.path / "x.wav");
  std::vector<ManifestEntry> rows = {{"x.wav", 3, Split::Train}, {"x.wav", 0, Split::Test}};
  write_manifest(rows, dir.path / "m.jsonl");
  const Manifest m = read_manifest(dir.path / "m.jsonl", 4);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].intent == 3);
  CHECK(m.entries[1].split == Split::Test);
  CHECK(m.n_intents() == 4);
  CHECK(read_bytes(dir.path / "m.jsonl") ==
        "{\"audio\":\"x.wav\",\"intent\":3,\"split\":\"train\"}\n"
        "{\"audio\":\"x.wav\",\"intent\":0,\"split\":\"test\"}\n");
  CHECK_THROWS_WITH(read_manifest(dir.path / "m.jsonl", 3), doctest::Contains("intent 3 outside"));

  write_manifest({{"missing.wav", 0, Split::Train}}, dir.path / "bad.jsonl");
  CHECK_THROWS_WITH(read_manifest(dir.path / "bad.jsonl"), doctest::Contains("missing audio"));
}

TEST_CASE("synth_utterance: deterministic, labelled, voiced region inside") {
  const SynthSpec spec;
  Rng r1(42), r2(42);
  const SynthUtterance a = synth_utterance(2, 1, spec, r1);
  const SynthUtterance b = synth_utterance(2, 1, spec, r2);
  CHECK(a.wave.samples == b.wave.samples);
  CHECK(a.intent_id == 5);
  CHECK(a.wave.samples.size() == 32000);
  CHECK(a.voiced_begin >= 0.05 * 32000);
  CHECK(a.voiced_end <= 0.95 * 32000);
  for (float v : a.wave.samples) CHECK(std::abs(v) <= 1.0f);
  Rng r3(0);
  CHECK_THROWS(synth_utterance(4, 0, spec, r3));
  CHECK_THROWS(synth_utterance(0, 2, spec, r3));
}

TEST_CASE("synth_utterance: contour shows in tracked log pitch") {
  const SynthSpec spec;
  for (int contour = 0; contour < 2; ++contour) {
    for (int content = 0; content < 4; ++content) {
      Rng rng(derive_seed(7, static_cast<std::uint64_t>(content * 2 + contour)));
      const SynthUtterance u = synth_utterance(content, contour, spec, rng);
      const Matrix p = dsp::prosody_track_raw(u.wave, dsp::FrameSpec{}, dsp::PitchConfig{});
      const int t0 = p.rows() / 10, t1 = p.rows() - p.rows() / 10;
      std::vector<double> x, y;
      for (int t = t0; t < t1; ++t) {
        x.push_back(t);
        y.push_back(p(t, dsp::kLogPitch));
      }
      const double s = slope(x, y);
      CAPTURE(content);
      CAPTURE(contour);
      if (contour == 0) CHECK(s > 0);
      else CHECK(s < 0);
    }
  }
}

TEST_CASE("synth_utterance: content classes differ in spectral envelope") {
  const SynthSpec spec;
  // Mean log-mel per segment third over the voiced frames.
  auto pattern = [&](int content) {
    Rng rng(derive_seed(11, static_cast<std::uint64_t>(content)));
    const SynthUtterance u = synth_utterance(content, 0, spec, rng);
    const Matrix mel = dsp::mel_spectrogram(u.wave, dsp::FrameSpec{});
    const int fb = static_cast<int>(u.voiced_begin / 160) + 3;
    const int fe = static_cast<int>(u.voiced_end / 160) - 5;
    std::vector<std::vector<double>> out(3, std::vector<double>(mel.cols(), 0.0));
    std::vector<int> n(3, 0);
    for (int t = fb; t < fe; ++t) {
      const int seg = std::min(2, 3 * (t - fb) / (fe - fb));
      for (int c = 0; c < mel.cols(); ++c) out[seg][c] += mel(t, c);
      ++n[seg];
    }
    for (int s = 0; s < 3; ++s) {
      for (double& v : out[s]) v /= n[s];
    }
    return out;
  };
  std::vector<std::vector<std::vector<double>>> pats;
  for (int c = 0; c < 4; ++c) pats.push_back(pattern(c));
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      // Largest per-segment RMS difference across mel bands.
      double d = 0;
      for (int s = 0; s < 3; ++s) {
        double sq = 0;
        for (std::size_t c = 0; c < pats[i][s].size(); ++c) sq += std::pow(pats[i][s][c] - pats[j][s][c], 2);
        d = std::max(d, std::sqrt(sq / pats[i][s].size()));
      }
      CAPTURE(i);
      CAPTURE(j);
      CHECK(d > 1.0);
    }
  }
}

TEST_CASE("build_synth_dataset: balanced, shuffled, reproducible") {
  const SynthSpec defaults;
  CHECK(defaults.n_intents() == 8);
  CHECK(defaults.n_intents() * defaults.train_per_intent == 400);
  CHECK(defaults.n_intents() * defaults.validation_per_intent == 80);
  CHECK(defaults.n_intents() * defaults.test_per_intent == 80);

  TempDir a, b;
  const SynthSpec spec = small_spec();
  const Manifest ma = build_synth_dataset(spec, a.path);
  build_synth_dataset(spec, b.path);
  CHECK(read_bytes(a.path / "manifest.jsonl") == read_bytes(b.path / "manifest.jsonl"));
  CHECK(read_bytes(a.path / "wav/train/3_1.wav") == read_bytes(b.path / "wav/train/3_1.wav"));

  for (Split s : {Split::Train, Split::Validation, Split::Test}) {
    std::vector<int> counts(8, 0);
    for (const auto& e : ma.split(s)) ++counts[e.intent];
    for (int c : counts) CHECK(c == spec.count(s));
  }
  // Shuffled: not grouped by split.
  bool grouped = true;
  for (std::size_t i = 0; i < 16; ++i) grouped = grouped && ma.entries[i].split == Split::Train;
  CHECK_FALSE(grouped);

  const Manifest re = read_manifest(a.path / "manifest.jsonl", 8);
  CHECK(re.entries.size() == 32);
}

TEST_CASE("feature dump round trip") {
  Matrix m(3, 2, {1.5, -2.25, 3.0, 0.1, 1e-10, -7.0});
  round_to_float(m);
  const std::string bytes = encode_feature_dump(m, "prosody");
  CHECK(bytes.substr(0, bytes.find('\n')) == "{\"cols\":2,\"kind\":\"prosody\",\"rows\":3}");
  CHECK(bytes.size() == bytes.find('\n') + 1 + 24);
  const FeatureDump d = parse_feature_dump(bytes);
  CHECK(d.kind == "prosody");
  CHECK(d.values == m);
  CHECK_THROWS(parse_feature_dump(bytes.substr(0, bytes.size() - 1)));
}

TEST_CASE("feature cache: hit equals recompute, corruption recomputes with a warning") {
  TempDir dir;
  write_wav(ramp_wave(16000), dir.path / "a.wav");
  std::vector<std::string> warnings;
  FeatureCache cache(dir.path / "cache", {}, {}, 1.0,
                     [&](const std::string& m) { warnings.push_back(m); });
  const dsp::Features first = cache.get(dir.path / "a.wav");
  const dsp::Features second = cache.get(dir.path / "a.wav");
  CHECK(first.mel == second.mel);
  CHECK(first.prosody == second.prosody);
  CHECK(warnings.empty());

  FeatureCache nocache({}, {}, {}, 1.0);
  CHECK(nocache.get(dir.path / "a.wav").mel == first.mel);

  const std::string key = cache.key_for(read_bytes(dir.path / "a.wav"));
  write_feature_dump(Matrix(2, 2), "mel", cache.entry_path(key, "mel"), "0000");
  const dsp::Features third = cache.get(dir.path / "a.wav");
  CHECK(third.mel == first.mel);
  CHECK(warnings.size() == 1);

  dsp::PitchConfig other;
  other.dp_penalty = 1.0;
  FeatureCache cache2(dir.path / "cache", {}, other, 1.0);
  CHECK(cache2.key_for("x") != cache.key_for("x"));
}

TEST_CASE("batch_iter: sizes, order, masks") {
  std::vector<Utterance> utts(400);
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const int t = 5 + static_cast<int>(i % 7);
    utts[i].label = static_cast<int>(i % 8);
    utts[i].mel = Matrix(t, 4, static_cast<double>(i));
    utts[i].prosody = Matrix(t, 6, 1.0);
  }
  const auto batches = batch_iter(utts, 64, 3, 0);
  REQUIRE(batches.size() == 7);
  CHECK(batches.back().size() == 16);
  CHECK(epoch_order(400, 3, 0) == epoch_order(400, 3, 0));
  CHECK(epoch_order(400, 3, 0) != epoch_order(400, 3, 1));

  std::set<std::size_t> seen;
  for (const Batch& b : batches) {
    for (int i = 0; i < b.size(); ++i) {
      const Utterance& u = utts[b.indices[i]];
      seen.insert(b.indices[i]);
      CHECK(b.lengths[i] == u.frames());
      CHECK(b.labels[i] == u.label);
      CHECK(b.mel[i].rows() == b.max_frames());
      for (int t = 0; t < b.max_frames(); ++t) {
        CHECK(b.frame_mask(i, t) == (t < u.frames() ? 1.0 : 0.0));
        if (t >= u.frames()) CHECK(b.prosody[i](t, 0) == 0.0);
      }
      CHECK(b.mel[i](0, 0) == static_cast<double>(b.indices[i]));
    }
  }
  CHECK(seen.size() == 400);
  CHECK_THROWS(batch_iter({}, 4, 0, 0));
}

TEST_CASE("load_split is independent of worker count") {
  TempDir dir;
  const Manifest m = build_synth_dataset(small_spec(), dir.path);
  FeatureCache cache({}, {}, {}, 0.0);
  const auto one = load_split(m, Split::Train, cache, 1);
  const auto four = load_split(m, Split::Train, cache, 4);
  REQUIRE(one.size() == 16);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].audio == four[i].audio);
    CHECK(one[i].mel == four[i].mel);
    CHECK(one[i].prosody == four[i].prosody);
  }
}
