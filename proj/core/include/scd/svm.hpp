#pragma once

#include <vector>

#include "scd/tensor.hpp"

namespace scd {

// One-vs-rest linear SVM trained by full-batch subgradient descent on the
// L2-regularized hinge loss (Pegasos step sizes). Deterministic: weights
// start at zero, so the seed only matters if stochastic variants are added.
struct SvmConfig {
  double c = 1.0;
  int steps = 10000;
};

struct SvmModel {
  int num_classes = 0, dim = 0;
  std::vector<double> weights;  // K×D row-major
  std::vector<double> bias;     // K

  std::vector<double> scores(const float* x) const;
  int predict(const float* x) const;
};

SvmModel linear_svm_fit(const Tensor<float>& x, const std::vector<int>& y, int num_classes,
                        const SvmConfig& cfg = {}, uint64_t seed = 0);

}  // namespace scd
