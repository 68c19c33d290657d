#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "scd/common.hpp"

namespace scd {

namespace detail {

// 64-byte aligned storage so Eigen views over tensor buffers always see the
// same alignment; vectorized reductions then group terms identically on every
// run, keeping training bit-reproducible.
template <typename T>
struct AlignedAlloc {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAlloc() = default;
  template <typename U>
  AlignedAlloc(const AlignedAlloc<U>&) {}
  T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAlloc<U>&) const {
    return true;
  }
};

}  // namespace detail

// Dense row-major tensor. float in training mode, double in gradient-check
// mode; the nn/ stack is templated on the scalar so both coexist.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(size_t(numel_of(shape_)), T(0));
  }

  Tensor(std::vector<int64_t> shape, const std::vector<T>& data) : shape_(std::move(shape)) {
    if (int64_t(data.size()) != numel_of(shape_))
      throw ShapeError("tensor data length does not match shape");
    data_.assign(data.begin(), data.end());
  }

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int64_t> shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  int64_t numel() const { return int64_t(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[size_t(i)]; }
  const T& operator[](int64_t i) const { return data_[size_t(i)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(std::vector<int64_t> shape) const {
    if (numel_of(shape) != numel()) throw ShapeError("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    for (int64_t i = 0; i < numel(); ++i) t[i] = U(data_[size_t(i)]);
    return t;
  }

  static int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + "]";
  }

 private:
  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// 2-D Eigen views over flat buffers; all heavy linear algebra goes through
// these so Eigen's kernels do the work.
template <typename T>
Eigen::Map<MatrixRM<T>> as_matrix(Tensor<T>& t, int64_t rows, int64_t cols) {
  return Eigen::Map<MatrixRM<T>>(t.data(), rows, cols);
}

template <typename T>
Eigen::Map<const MatrixRM<T>> as_matrix(const Tensor<T>& t, int64_t rows, int64_t cols) {
  return Eigen::Map<const MatrixRM<T>>(t.data(), rows, cols);
}

template <typename T>
Eigen::Map<MatrixRM<T>> as_matrix2d(Tensor<T>& t) {
  if (t.rank() != 2) throw ShapeError("expected rank-2 tensor, got " + t.shape_str());
  return as_matrix(t, t.dim(0), t.dim(1));
}

template <typename T>
Eigen::Map<const MatrixRM<T>> as_matrix2d(const Tensor<T>& t) {
  if (t.rank() != 2) throw ShapeError("expected rank-2 tensor, got " + t.shape_str());
  return as_matrix(t, t.dim(0), t.dim(1));
}

}  // namespace scd
