#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pdistill/common/error.h"
#include "pdistill/dsp/fft.h"
#include "pdistill/dsp/frontend.h"

namespace pdistill::dsp {

void Waveform::validate() const {
  if (sample_rate != kSampleRate) {
    throw Error("sample_rate " + std::to_string(sample_rate) + " != " +
                std::to_string(kSampleRate));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw Error("non-finite sample at index " + std::to_string(i));
    }
  }
}

void FrameSpec::validate() const {
  if (!(window_samples > hop_samples && hop_samples > 0)) {
    throw ConfigError("frame spec requires window_samples > hop_samples > 0");
  }
  if (n_mels <= 0 || n_mels % 2 != 0) {
    throw ConfigError("n_mels must be positive and even, got " +
                      std::to_string(n_mels));
  }
}

int num_frames(std::size_t num_samples, const FrameSpec& spec) {
  const auto window = static_cast<std::size_t>(spec.window_samples);
  if (num_samples < window) throw Error("utterance too short");
  return 1 + static_cast<int>((num_samples - window) /
                              static_cast<std::size_t>(spec.hop_samples));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank make_mel_filterbank(int n_mels, int n_fft, int sample_rate) {
  MelFilterbank fb;
  fb.n_fft = n_fft;
  const int n_bins = n_fft / 2 + 1;
  fb.weights = Matrix(n_mels, n_bins);
  fb.center_hz.resize(n_mels);

  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_max * i / (n_mels + 1));
  }
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    fb.center_hz[m] = center;
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      fb.weights(m, k) = w;
    }
  }
  return fb;
}

Matrix mel_spectrogram(const Waveform& w, const FrameSpec& spec) {
  spec.validate();
  w.validate();
  const int n_frames = num_frames(w.samples.size(), spec);
  const int win = spec.window_samples;
  const int n_fft = next_pow2(win);
  const MelFilterbank fb = make_mel_filterbank(spec.n_mels, n_fft, w.sample_rate);

  std::vector<double> hann(win);
  for (int i = 0; i < win; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (win - 1));
  }

  Matrix out(n_frames, spec.n_mels);
  std::vector<double> frame(win);
  const int n_bins = n_fft / 2 + 1;
  for (int t = 0; t < n_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * spec.hop_samples;
    for (int i = 0; i < win; ++i) frame[i] = w.samples[start + i] * hann[i];
    const std::vector<double> power = power_spectrum(frame, n_fft);
    for (int m = 0; m < spec.n_mels; ++m) {
      const auto weights = fb.weights.row(m);
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k) e += weights[k] * power[k];
      out(t, m) = std::log(std::max(e, kLogFloor));
    }
  }
  return out;
}

BandEnergies band_energies(const Matrix& log_mel) {
  const int n = log_mel.cols();
  if (n <= 0 || n % 2 != 0) {
    throw Error("band_energies needs an even number of mel bands, got " +
                std::to_string(n));
  }
  BandEnergies out;
  const int T = log_mel.rows();
  out.total.resize(T);
  out.upper.resize(T);
  out.lower.resize(T);
  for (int t = 0; t < T; ++t) {
    double lower = 0.0, upper = 0.0;
    for (int m = 0; m < n; ++m) {
      const double e = std::max(std::exp(log_mel(t, m)), kLogFloor);
      (m < n / 2 ? lower : upper) += e;
    }
    out.total[t] = std::log(lower + upper);
    out.upper[t] = std::log(upper);
    out.lower[t] = std::log(lower);
  }
  return out;
}

}  // namespace pdistill::dsp
