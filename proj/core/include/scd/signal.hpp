#pragma once

#include <complex>
#include <vector>

#include "scd/image.hpp"

namespace scd::signal {

// Radix-2 iterative FFT (bit reversal + precomputed twiddles). Length must be
// a power of two >= 2.
std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x);
std::vector<std::complex<double>> fft(const std::vector<double>& x);

// Mean intensity of each row: the 1-D density profile along the gradient axis.
std::vector<double> column_profile(const PercollImage& img);

// Magnitudes of the first f_fft non-DC bins of the FFT of the mean-subtracted,
// zero-padded column profile, each divided by the profile length. The pad
// length is the next power of two large enough to hold the profile and f_fft
// distinct bins below Nyquist.
std::vector<float> spectral_features(const PercollImage& img, int f_fft);

}  // namespace scd::signal
