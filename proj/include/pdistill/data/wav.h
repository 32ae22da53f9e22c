#pragma once

#include <filesystem>
#include <string>

#include "pdistill/dsp/frontend.h"

namespace pdistill::data {

// Reads RIFF PCM16 mono 16 kHz. Any other format is an error naming the
// offending property; structural damage reports the byte offset.
dsp::Waveform load_wav(const std::filesystem::path& path);
dsp::Waveform parse_wav(const std::string& bytes);

// Writes PCM16 mono; samples are clamped to [-1, 1) and rounded.
void write_wav(const dsp::Waveform& w, const std::filesystem::path& path);
std::string encode_wav(const dsp::Waveform& w);

// Truncates or zero-pads the tail to exactly round(seconds * rate) samples.
dsp::Waveform crop_or_pad(const dsp::Waveform& w, double seconds);

}  // namespace pdistill::data
