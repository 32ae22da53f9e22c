#pragma once

#include <complex>
#include <vector>

namespace pdistill::dsp {

// In-place iterative radix-2 FFT. data.size() must be a power of two.
void fft(std::vector<std::complex<double>>& data);

// Power spectrum |X[k]|^2 for k in [0, n/2] of a real frame zero-padded to n.
std::vector<double> power_spectrum(const std::vector<double>& frame, int n);

int next_pow2(int n);

}  // namespace pdistill::dsp
