#include "pdistill/data/features.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "pdistill/common/error.h"
#include "pdistill/common/rng.h"
#include "pdistill/data/wav.h"

namespace pdistill::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  std::ostringstream tmp_name;
  tmp_name << path.string() << ".tmp" << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const fs::path tmp = tmp_name.str();
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot rename into " + path.string());
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string encode_feature_dump(const Matrix& m, const std::string& kind, const std::string& key) {
  json header = {{"rows", m.rows()}, {"cols", m.cols()}, {"kind", kind}};
  if (!key.empty()) header["key"] = key;
  std::string out = header.dump();
  out += '\n';
  const std::size_t off = out.size();
  out.resize(off + m.data().size() * 4);
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i]));
    for (int b = 0; b < 4; ++b) out[off + 4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

void write_feature_dump(const Matrix& m, const std::string& kind, const fs::path& path,
                        const std::string& key) {
  write_atomic(path, encode_feature_dump(m, kind, key));
}

FeatureDump parse_feature_dump(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw Error("feature dump: missing header line");
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const std::exception& e) {
    throw Error(std::string("feature dump: bad header: ") + e.what());
  }
  FeatureDump d;
  int rows = 0, cols = 0;
  try {
    rows = header.at("rows").get<int>();
    cols = header.at("cols").get<int>();
    d.kind = header.at("kind").get<std::string>();
    d.key = header.value("key", std::string());
  } catch (const std::exception& e) {
    throw Error(std::string("feature dump: bad header: ") + e.what());
  }
  if (rows < 0 || cols < 0) throw Error("feature dump: negative shape");
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  if (bytes.size() - nl - 1 != n * 4) {
    throw Error("feature dump: expected " + std::to_string(n * 4) + " data bytes, found " +
                std::to_string(bytes.size() - nl - 1));
  }
  std::vector<double> data(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
    data[i] = std::bit_cast<float>(bits);
  }
  d.values = Matrix(rows, cols, std::move(data));
  return d;
}

FeatureDump read_feature_dump(const fs::path& path) { return parse_feature_dump(read_file(path)); }

void round_to_float(Matrix& m) {
  for (double& v : m.data()) v = static_cast<float>(v);
}

dsp::Features compute_features(const dsp::Waveform& w, const dsp::FrameSpec& frame,
                               const dsp::PitchConfig& pitch) {
  dsp::Features f = dsp::extract_features(w, frame, pitch);
  round_to_float(f.mel);
  round_to_float(f.prosody);
  return f;
}

std::uint64_t frontend_config_hash(const dsp::FrameSpec& frame, const dsp::PitchConfig& pitch,
                                   double crop_seconds) {
  const json j = {{"window_samples", frame.window_samples},
                  {"hop_samples", frame.hop_samples},
                  {"n_mels", frame.n_mels},
                  {"f0_min", pitch.f0_min},
                  {"f0_max", pitch.f0_max},
                  {"dp_penalty", pitch.dp_penalty},
                  {"nccf_floor_eps", pitch.nccf_floor_eps},
                  {"soft_min_f0", pitch.soft_min_f0},
                  {"crop_seconds", crop_seconds}};
  return fnv1a64(j.dump());
}

void warn_stderr(const std::string& msg) {
  std::cerr << json{{"event", "warning"}, {"message", msg}}.dump() << '\n';
}

FeatureCache::FeatureCache(fs::path dir, dsp::FrameSpec frame, dsp::PitchConfig pitch,
                           double crop_seconds, WarnFn warn)
    : dir_(std::move(dir)), frame_(frame), pitch_(pitch), crop_seconds_(crop_seconds),
      warn_(std::move(warn)), config_hash_(frontend_config_hash(frame, pitch, crop_seconds)) {
  if (!dir_.empty()) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create cache dir " + dir_.string() + ": " + ec.message());
  }
}

std::string FeatureCache::key_for(const std::string& wav_bytes) const {
  return hex64(fnv1a64(wav_bytes)) + hex64(config_hash_);
}

fs::path FeatureCache::entry_path(const std::string& key, const std::string& kind) const {
  return dir_ / (key + "." + kind);
}

dsp::Features FeatureCache::get(const fs::path& wav_path) const {
  const std::string bytes = read_file(wav_path);
  auto compute = [&] {
    dsp::Waveform w = parse_wav(bytes);
    if (crop_seconds_ > 0) w = crop_or_pad(w, crop_seconds_);
    return compute_features(w, frame_, pitch_);
  };
  if (!enabled()) return compute();

  const std::string key = key_for(bytes);
  const fs::path mel_path = entry_path(key, "mel");
  const fs::path pro_path = entry_path(key, "prosody");
  if (fs::exists(mel_path) && fs::exists(pro_path)) {
    try {
      FeatureDump mel = read_feature_dump(mel_path);
      FeatureDump pro = read_feature_dump(pro_path);
      if (mel.key != key || pro.key != key || mel.kind != "mel" || pro.kind != "prosody" ||
          mel.values.rows() != pro.values.rows()) {
        throw Error("cache hash mismatch");
      }
      return {std::move(mel.values), std::move(pro.values)};
    } catch (const std::exception& e) {
      warn_("feature cache entry " + key + " for " + wav_path.string() + " invalid (" + e.what() +
            "); recomputing");
    }
  }
  dsp::Features f = compute();
  write_feature_dump(f.mel, "mel", mel_path, key);
  write_feature_dump(f.prosody, "prosody", pro_path, key);
  return f;
}

}  // namespace pdistill::data
