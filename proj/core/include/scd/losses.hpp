#pragma once

#include <cmath>

#include "scd/tensor.hpp"

namespace scd::nn {

template <typename T>
struct LossResult {
  T value;
  Tensor<T> grad;
};

// Mean squared error over every element; grad has the input's shape.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target))
    throw ShapeError("mse: prediction " + pred.shape_str() + " vs target " + target.shape_str());
  int64_t n = pred.numel();
  if (n == 0) throw ShapeError("mse on empty tensors");
  LossResult<T> r{T(0), Tensor<T>(pred.shape())};
  for (int64_t i = 0; i < n; ++i) {
    T d = pred[i] - target[i];
    r.value += d * d;
    r.grad[i] = T(2) * d / T(n);
  }
  r.value /= T(n);
  return r;
}

// Softmax cross-entropy on logit rows [N,K], averaged over rows selected by
// `mask`; gradient rows of unmasked nodes are exactly zero. Fusing the softmax
// into the loss keeps it numerically stable (log-sum-exp) and its gradient
// simple: (softmax - onehot) / #masked.
template <typename T>
LossResult<T> masked_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels,
                                   const std::vector<uint8_t>& mask) {
  if (logits.rank() != 2)
    throw ShapeError("cross-entropy expects [N,K] logits, got " + logits.shape_str());
  int64_t n = logits.dim(0), k = logits.dim(1);
  if (int64_t(labels.size()) != n || int64_t(mask.size()) != n)
    throw ShapeError("cross-entropy: labels/mask length mismatch");
  int64_t active = 0;
  for (uint8_t m : mask) active += m ? 1 : 0;
  if (active == 0) throw UsageError("cross-entropy: mask selects no rows");
  LossResult<T> r{T(0), Tensor<T>({n, k})};
  for (int64_t i = 0; i < n; ++i) {
    if (!mask[size_t(i)]) continue;
    int y = labels[size_t(i)];
    if (y < 0 || y >= k) throw DataError("cross-entropy: label out of range");
    const T* z = logits.data() + i * k;
    T mx = z[0];
    for (int64_t c = 1; c < k; ++c) mx = std::max(mx, z[c]);
    T sum = T(0);
    for (int64_t c = 0; c < k; ++c) sum += std::exp(z[c] - mx);
    T lse = mx + std::log(sum);
    r.value += lse - z[y];
    for (int64_t c = 0; c < k; ++c)
      r.grad[i * k + c] = std::exp(z[c] - lse) / T(active);
    r.grad[i * k + y] -= T(1) / T(active);
  }
  r.value /= T(active);
  return r;
}

}  // namespace scd::nn
