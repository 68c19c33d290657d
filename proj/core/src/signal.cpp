#include "scd/signal.hpp"

#include <cmath>
#include <numbers>

namespace scd::signal {

namespace {

bool is_pow2(size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x) {
  size_t n = x.size();
  if (!is_pow2(n)) throw ShapeError("fft length must be a power of two >= 2");
  std::vector<std::complex<double>> a = x;
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j |= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<std::complex<double>> tw(n / 2);
  for (size_t k = 0; k < n / 2; ++k) {
    double ang = -2.0 * std::numbers::pi * double(k) / double(n);
    tw[k] = {std::cos(ang), std::sin(ang)};
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    size_t stride = n / len;
    for (size_t i = 0; i < n; i += len) {
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * tw[k * stride];
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
  return a;
}

std::vector<std::complex<double>> fft(const std::vector<double>& x) {
  std::vector<std::complex<double>> cx(x.size());
  for (size_t i = 0; i < x.size(); ++i) cx[i] = {x[i], 0.0};
  return fft(cx);
}

std::vector<double> column_profile(const PercollImage& img) {
  std::vector<double> profile(size_t(img.height()));
  for (int r = 0; r < img.height(); ++r) {
    double acc = 0.0;
    for (int c = 0; c < img.width(); ++c) acc += img.at(r, c);
    profile[size_t(r)] = acc / img.width();
  }
  return profile;
}

std::vector<float> spectral_features(const PercollImage& img, int f_fft) {
  if (f_fft < 1) throw ShapeError("f_fft must be positive");
  std::vector<double> profile = column_profile(img);
  size_t h = profile.size();
  size_t pad = next_pow2(std::max(std::max(h, size_t(2) * size_t(f_fft)), size_t(2)));
  constexpr size_t kMaxPad = size_t(1) << 15;
  if (pad > kMaxPad) throw ShapeError("f_fft too large: padded length would exceed 32768");
  double mean = 0.0;
  for (double v : profile) mean += v;
  mean /= double(h);
  std::vector<double> padded(pad, 0.0);
  for (size_t i = 0; i < h; ++i) padded[i] = profile[i] - mean;
  auto spectrum = fft(padded);
  std::vector<float> feats(static_cast<size_t>(f_fft));
  for (int k = 0; k < f_fft; ++k)
    feats[size_t(k)] = float(std::abs(spectrum[size_t(k) + 1]) / double(h));
  return feats;
}

}  // namespace scd::signal
