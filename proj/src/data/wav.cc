#include "pdistill/data/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pdistill/common/error.h"

namespace pdistill::data {

namespace {

std::uint32_t u32(const std::string& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  return v;
}

std::uint16_t u16(const std::string& b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                    (static_cast<unsigned char>(b[off + 1]) << 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

[[noreturn]] void malformed(const std::string& what, std::size_t offset) {
  throw Error("malformed RIFF at byte offset " + std::to_string(offset) + ": " + what);
}

}  // namespace

dsp::Waveform parse_wav(const std::string& b) {
  if (b.size() < 12) malformed("file shorter than RIFF header", b.size());
  if (b.compare(0, 4, "RIFF") != 0) malformed("missing 'RIFF' tag", 0);
  if (b.compare(8, 4, "WAVE") != 0) malformed("missing 'WAVE' tag", 8);

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const std::size_t size = u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) malformed("chunk '" + id + "' runs past end of file", pos);
    if (id == "fmt ") {
      if (size < 16) malformed("fmt chunk too small", pos);
      const int format = u16(b, body);
      const int channels = u16(b, body + 2);
      const int rate = static_cast<int>(u32(b, body + 4));
      const int bits = u16(b, body + 14);
      if (format != 1) throw Error("audio_format " + std::to_string(format) + " != 1 (PCM)");
      if (channels != 1) throw Error("channels " + std::to_string(channels) + " != 1");
      if (rate != dsp::kSampleRate) {
        throw Error("sample_rate " + std::to_string(rate) + " != " + std::to_string(dsp::kSampleRate));
      }
      if (bits != 16) throw Error("bits_per_sample " + std::to_string(bits) + " != 16");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) malformed("data chunk before fmt chunk", pos);
      if (size % 2 != 0) malformed("odd data chunk size", pos + 4);
      dsp::Waveform w;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto s = static_cast<std::int16_t>(u16(b, body + 2 * i));
        w.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  malformed("no data chunk", pos);
}

dsp::Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return parse_wav(ss.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string encode_wav(const dsp::Waveform& w) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(w.sample_rate));
  put32(out, static_cast<std::uint32_t>(w.sample_rate * 2));
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (float s : w.samples) {
    const long q = std::clamp(std::lround(static_cast<double>(s) * 32768.0), -32768L, 32767L);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

void write_wav(const dsp::Waveform& w, const std::filesystem::path& path) {
  const std::string bytes = encode_wav(w);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing " + path.string());
}

dsp::Waveform crop_or_pad(const dsp::Waveform& w, double seconds) {
  if (!(seconds > 0.0)) throw Error("crop_or_pad: seconds must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(seconds * w.sample_rate));
  dsp::Waveform out = w;
  out.samples.resize(n, 0.0f);
  return out;
}

}  // namespace pdistill::data
