#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scd/common.hpp"

namespace scd {

// Grayscale Percoll photograph. Rows run along the density gradient (top =
// low density), columns across the tube. Intensities live in [0,1]; files
// store them as 8-bit, so generated images are pre-quantized to the k/255
// grid and round trips are exact.
class PercollImage {
 public:
  PercollImage() = default;
  PercollImage(int height, int width, std::vector<float> pixels)
      : h_(height), w_(width), px_(std::move(pixels)) {
    if (h_ < 1 || w_ < 1) throw ShapeError("image dims must be positive");
    if (int64_t(px_.size()) != int64_t(h_) * w_)
      throw ShapeError("pixel buffer does not match " + std::to_string(h_) + "x" +
                       std::to_string(w_));
    for (float v : px_)
      if (!(v >= 0.0f && v <= 1.0f)) throw DataError("intensity outside [0,1]");
  }
  PercollImage(int height, int width) : PercollImage(height, width, std::vector<float>(size_t(height) * size_t(width), 0.0f)) {}

  int height() const { return h_; }
  int width() const { return w_; }
  float at(int r, int c) const { return px_[size_t(r) * w_ + c]; }
  const std::vector<float>& pixels() const { return px_; }

  // Bypasses the [0,1] re-scan; caller guarantees the invariant.
  static PercollImage from_quantized(int height, int width, std::vector<float> pixels) {
    PercollImage img;
    img.h_ = height;
    img.w_ = width;
    img.px_ = std::move(pixels);
    return img;
  }

 private:
  int h_ = 0, w_ = 0;
  std::vector<float> px_;
};

// 8-bit single-channel codecs; format picked by extension (.png or .pgm).
// PNG is the minimal grayscale subset: 8-bit depth, no interlace.
PercollImage load_image(const std::filesystem::path& path);
void save_image(const PercollImage& img, const std::filesystem::path& path);

// Quantize an intensity to the storable 8-bit grid.
inline float quantize8(float v) {
  int q = int(v * 255.0f + 0.5f);
  if (q < 0) q = 0;
  if (q > 255) q = 255;
  return float(q) / 255.0f;
}

}  // namespace scd
