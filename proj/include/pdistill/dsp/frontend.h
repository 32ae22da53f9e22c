#pragma once

#include <cstddef>
#include <vector>

#include "pdistill/common/matrix.h"

namespace pdistill::dsp {

inline constexpr int kSampleRate = 16000;
inline constexpr int kProsodyChannels = 6;
inline constexpr double kLogFloor = 1e-10;

// Column order of a prosody track.
enum ProsodyChannel : int {
  kLogPitch = 0,
  kNccf = 1,
  kPitchDelta = 2,
  kTotalEnergy = 3,
  kUpperEnergy = 4,
  kLowerEnergy = 5,
};

struct Waveform {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  // Throws if the sample rate is not 16 kHz or a sample is not finite.
  void validate() const;
};

struct FrameSpec {
  int window_samples = 400;  // 25 ms
  int hop_samples = 160;     // 10 ms
  int n_mels = 80;

  void validate() const;
  bool operator==(const FrameSpec&) const = default;
};

struct PitchConfig {
  double f0_min = 60.0;
  double f0_max = 400.0;
  // Transition cost per squared octave of lag change between frames.
  double dp_penalty = 0.5;
  double nccf_floor_eps = 1e-8;
  // Kaldi-style bias toward short lags: the tracker scores a lag by
  // nccf * (1 - soft_min_f0 * lag_seconds). Suppresses period-multiple picks.
  double soft_min_f0 = 10.0;

  void validate(int sample_rate = kSampleRate) const;
  int min_lag(int sample_rate = kSampleRate) const;
  int max_lag(int sample_rate = kSampleRate) const;
  bool operator==(const PitchConfig&) const = default;
};

// 1 + floor((num_samples - window) / hop). Requires num_samples >= window.
int num_frames(std::size_t num_samples, const FrameSpec& spec);

// Triangular mel filterbank on the HTK mel scale spanning 0 Hz to Nyquist.
// Rows are filters, columns are FFT bins [0, n_fft/2].
struct MelFilterbank {
  int n_fft = 0;
  Matrix weights;
  std::vector<double> center_hz;
};
MelFilterbank make_mel_filterbank(int n_mels, int n_fft, int sample_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// T x n_mels matrix of ln(max(mel_energy, 1e-10)) over Hann-windowed frames.
// First frame starts at sample 0; no centering.
Matrix mel_spectrogram(const Waveform& w, const FrameSpec& spec);

struct BandEnergies {
  std::vector<double> total;  // e1
  std::vector<double> upper;  // e2, bands [n/2, n)
  std::vector<double> lower;  // e3, bands [0, n/2)
};

BandEnergies band_energies(const Matrix& log_mel);

// T x L normalized cross-correlation; column j is lag min_lag + j.
Matrix nccf(const Waveform& w, const FrameSpec& spec, const PitchConfig& cfg);

struct PitchTrack {
  std::vector<int> lag;
  std::vector<double> f0_hz;
  std::vector<double> nccf;
};

// Viterbi search over lags. nccf_matrix must come from nccf() with the same
// cfg and sample rate.
PitchTrack track_pitch(const Matrix& nccf_matrix, const PitchConfig& cfg,
                       int sample_rate = kSampleRate);

// Unnormalized six-channel track (log pitch, nccf, pitch delta, e1, e2, e3).
Matrix prosody_track_raw(const Waveform& w, const FrameSpec& spec,
                         const PitchConfig& cfg);
Matrix prosody_track_raw(const Waveform& w, const Matrix& log_mel,
                         const FrameSpec& spec, const PitchConfig& cfg);

// Per-column z-normalization. Columns with stdev < 1e-8 become all zero.
void z_normalize_columns(Matrix& m);

// Normalized prosody track, the input of every prosody-consuming model.
Matrix prosody_track(const Waveform& w, const FrameSpec& spec,
                     const PitchConfig& cfg);

struct Features {
  Matrix mel;
  Matrix prosody;
};

// Mel spectrogram and normalized prosody track sharing one mel computation.
Features extract_features(const Waveform& w, const FrameSpec& spec,
                          const PitchConfig& cfg);

}  // namespace pdistill::dsp
