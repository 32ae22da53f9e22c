#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pdistill/common/error.h"
#include "pdistill/dsp/frontend.h"

namespace pdistill::dsp {

void PitchConfig::validate(int sample_rate) const {
  if (!(0.0 < f0_min && f0_min < f0_max && f0_max < sample_rate / 2.0)) {
    throw ConfigError("pitch config requires 0 < f0_min < f0_max < sample_rate/2");
  }
  if (dp_penalty < 0.0 || nccf_floor_eps <= 0.0 || soft_min_f0 < 0.0) {
    throw ConfigError("pitch config: dp_penalty, soft_min_f0 must be >= 0 and "
                      "nccf_floor_eps > 0");
  }
}

int PitchConfig::min_lag(int sample_rate) const {
  return static_cast<int>(std::floor(sample_rate / f0_max));
}

int PitchConfig::max_lag(int sample_rate) const {
  return static_cast<int>(std::ceil(sample_rate / f0_min));
}

Matrix nccf(const Waveform& w, const FrameSpec& spec, const PitchConfig& cfg) {
  spec.validate();
  cfg.validate(w.sample_rate);
  const int n_frames = num_frames(w.samples.size(), spec);
  const int lo = cfg.min_lag(w.sample_rate);
  const int hi = cfg.max_lag(w.sample_rate);
  const int win = spec.window_samples;

  // Zero-padded at the end by max-lag samples.
  std::vector<double> x(w.samples.size() + hi, 0.0);
  std::copy(w.samples.begin(), w.samples.end(), x.begin());

  Matrix out(n_frames, hi - lo + 1);
  for (int t = 0; t < n_frames; ++t) {
    const double* a = x.data() + static_cast<std::size_t>(t) * spec.hop_samples;
    double e_a = 0.0;
    for (int i = 0; i < win; ++i) e_a += a[i] * a[i];
    for (int lag = lo; lag <= hi; ++lag) {
      const double* b = a + lag;
      double dot = 0.0, e_b = 0.0;
      for (int i = 0; i < win; ++i) {
        dot += a[i] * b[i];
        e_b += b[i] * b[i];
      }
      const double denom = std::sqrt((e_a + cfg.nccf_floor_eps) *
                                     (e_b + cfg.nccf_floor_eps));
      out(t, lag - lo) = std::clamp(dot / denom, -1.0, 1.0);
    }
  }
  return out;
}

PitchTrack track_pitch(const Matrix& nccf_matrix, const PitchConfig& cfg,
                       int sample_rate) {
  cfg.validate(sample_rate);
  const int lo = cfg.min_lag(sample_rate);
  const int n_lags = cfg.max_lag(sample_rate) - lo + 1;
  if (nccf_matrix.cols() != n_lags) {
    throw Error("nccf matrix has " + std::to_string(nccf_matrix.cols()) +
                " lag columns, pitch config implies " + std::to_string(n_lags));
  }
  const int T = nccf_matrix.rows();
  PitchTrack track;
  if (T == 0) return track;

  std::vector<double> lag_weight(n_lags);
  std::vector<double> log2_lag(n_lags);
  for (int j = 0; j < n_lags; ++j) {
    const double lag = lo + j;
    lag_weight[j] = 1.0 - cfg.soft_min_f0 * lag / sample_rate;
    log2_lag[j] = std::log2(lag);
  }
  auto local_cost = [&](int t, int j) { return -nccf_matrix(t, j) * lag_weight[j]; };

  std::vector<double> cost(n_lags), next(n_lags);
  std::vector<int> back(static_cast<std::size_t>(T) * n_lags, 0);
  for (int j = 0; j < n_lags; ++j) cost[j] = local_cost(0, j);

  for (int t = 1; t < T; ++t) {
    int* bp = back.data() + static_cast<std::size_t>(t) * n_lags;
    for (int j = 0; j < n_lags; ++j) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int i = 0; i < n_lags; ++i) {
        const double d = log2_lag[j] - log2_lag[i];
        const double c = cost[i] + cfg.dp_penalty * d * d;
        if (c < best) {
          best = c;
          arg = i;
        }
      }
      next[j] = best + local_cost(t, j);
      bp[j] = arg;
    }
    cost.swap(next);
  }

  int j = static_cast<int>(std::min_element(cost.begin(), cost.end()) - cost.begin());
  track.lag.resize(T);
  track.f0_hz.resize(T);
  track.nccf.resize(T);
  for (int t = T - 1; t >= 0; --t) {
    track.lag[t] = lo + j;
    track.f0_hz[t] = static_cast<double>(sample_rate) / (lo + j);
    track.nccf[t] = nccf_matrix(t, j);
    j = back[static_cast<std::size_t>(t) * n_lags + j];
  }
  return track;
}

}  // namespace pdistill::dsp
