#include <algorithm>
#include <cmath>
#include <string>

#include "pdistill/common/error.h"
#include "pdistill/dsp/frontend.h"

namespace pdistill::dsp {

Matrix prosody_track_raw(const Waveform& w, const Matrix& log_mel,
                         const FrameSpec& spec, const PitchConfig& cfg) {
  const PitchTrack pitch = track_pitch(nccf(w, spec, cfg), cfg, w.sample_rate);
  const BandEnergies energy = band_energies(log_mel);
  const int T = log_mel.rows();
  if (static_cast<int>(pitch.f0_hz.size()) != T) {
    throw Error("pitch track has " + std::to_string(pitch.f0_hz.size()) +
                " frames, mel has " + std::to_string(T));
  }

  Matrix out(T, kProsodyChannels);
  for (int t = 0; t < T; ++t) {
    out(t, kLogPitch) = std::log(pitch.f0_hz[t]);
    out(t, kNccf) = pitch.nccf[t];
    out(t, kTotalEnergy) = energy.total[t];
    out(t, kUpperEnergy) = energy.upper[t];
    out(t, kLowerEnergy) = energy.lower[t];
  }
  for (int t = 0; t < T; ++t) {
    const int prev = std::max(t - 1, 0);
    const int next = std::min(t + 1, T - 1);
    out(t, kPitchDelta) = (out(next, kLogPitch) - out(prev, kLogPitch)) / 2.0;
  }
  return out;
}

Matrix prosody_track_raw(const Waveform& w, const FrameSpec& spec,
                         const PitchConfig& cfg) {
  return prosody_track_raw(w, mel_spectrogram(w, spec), spec, cfg);
}

void z_normalize_columns(Matrix& m) {
  const int T = m.rows();
  if (T == 0) return;
  for (int c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (int t = 0; t < T; ++t) mean += m(t, c);
    mean /= T;
    double var = 0.0;
    for (int t = 0; t < T; ++t) var += (m(t, c) - mean) * (m(t, c) - mean);
    const double sd = std::sqrt(var / T);
    for (int t = 0; t < T; ++t) {
      m(t, c) = sd < 1e-8 ? 0.0 : (m(t, c) - mean) / sd;
    }
  }
}

Matrix prosody_track(const Waveform& w, const FrameSpec& spec,
                     const PitchConfig& cfg) {
  Matrix p = prosody_track_raw(w, spec, cfg);
  z_normalize_columns(p);
  return p;
}

Features extract_features(const Waveform& w, const FrameSpec& spec,
                          const PitchConfig& cfg) {
  Features f;
  f.mel = mel_spectrogram(w, spec);
  f.prosody = prosody_track_raw(w, f.mel, spec, cfg);
  z_normalize_columns(f.prosody);
  return f;
}

}  // namespace pdistill::dsp
