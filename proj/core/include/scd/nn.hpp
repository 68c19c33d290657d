#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "scd/rng.hpp"
#include "scd/tensor.hpp"

// Fixed-sequence trainable network: forward caches what backward needs, no
// general autodiff graph. Templated on the scalar so the same layer code runs
// in float for training and in double for finite-difference checks.

namespace scd::nn {

enum class LayerKind { Conv2D, ReLU, MaxPool, GlobalAvgPool, Dense, Dropout, Softmax };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::GlobalAvgPool: return "gap";
    case LayerKind::Dense: return "dense";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int out_channels = 0;  // Conv2D
  int kernel = 3;        // Conv2D
  int stride = 1;        // Conv2D
  int window = 2;        // MaxPool (stride == window)
  int out_dim = 0;       // Dense
  double rate = 0.0;     // Dropout

  static LayerSpec conv2d(int out_channels, int kernel = 3, int stride = 1) {
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{LayerKind::ReLU}; }
  static LayerSpec maxpool(int window = 2) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool;
    s.window = window;
    return s;
  }
  static LayerSpec global_avg_pool() { return LayerSpec{LayerKind::GlobalAvgPool}; }
  static LayerSpec dense(int out_dim) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.out_dim = out_dim;
    return s;
  }
  static LayerSpec dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
  }
  static LayerSpec softmax() { return LayerSpec{LayerKind::Softmax}; }
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  // Caching forward used by training; backward consumes the cache.
  virtual Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  // Cache-free inference path; dropout is identity here.
  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  virtual void collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out) {
    (void)prefix;
    (void)out;
  }
};

namespace detail {

inline void conv_out_geometry(int64_t in, int kernel, int stride, int64_t* out, int* pad_lo) {
  // "same" padding: output covers ceil(in / stride) positions.
  *out = (in + stride - 1) / stride;
  int64_t pad_total = std::max<int64_t>((*out - 1) * stride + kernel - in, 0);
  *pad_lo = int(pad_total / 2);
}

// Gathers k*k patches of one [C,H,W] sample into its column block of a
// [C*k*k, row_stride] matrix starting at column col_offset.
template <typename T>
void im2col(const T* x, int64_t c, int64_t h, int64_t w, int kernel, int stride, int pad_top,
            int pad_left, int64_t out_h, int64_t out_w, T* cols, int64_t row_stride,
            int64_t col_offset) {
  for (int64_t ch = 0; ch < c; ++ch) {
    const T* plane = x + ch * h * w;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* row = cols + ((ch * kernel + ky) * kernel + kx) * row_stride + col_offset;
        for (int64_t oy = 0; oy < out_h; ++oy) {
          int64_t iy = oy * stride - pad_top + ky;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * out_w, row + (oy + 1) * out_w, T(0));
            continue;
          }
          const T* src = plane + iy * w;
          for (int64_t ox = 0; ox < out_w; ++ox) {
            int64_t ix = ox * stride - pad_left + kx;
            row[oy * out_w + ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int64_t c, int64_t h, int64_t w, int kernel, int stride,
                int pad_top, int pad_left, int64_t out_h, int64_t out_w, T* dx,
                int64_t row_stride, int64_t col_offset) {
  for (int64_t ch = 0; ch < c; ++ch) {
    T* plane = dx + ch * h * w;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const T* row = cols + ((ch * kernel + ky) * kernel + kx) * row_stride + col_offset;
        for (int64_t oy = 0; oy < out_h; ++oy) {
          int64_t iy = oy * stride - pad_top + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = plane + iy * w;
          for (int64_t ox = 0; ox < out_w; ++ox) {
            int64_t ix = ox * stride - pad_left + kx;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
class Conv2D final : public Layer<T> {
 public:
  Conv2D(int in_channels, int out_channels, int kernel, int stride, Rng& init)
      : in_c_(in_channels), out_c_(out_channels), kernel_(kernel), stride_(stride) {
    if (kernel < 1 || stride < 1) throw ConfigError("conv kernel/stride must be >= 1");
    int64_t fan_in = int64_t(in_c_) * kernel_ * kernel_;
    weight_ = Tensor<T>({out_c_, fan_in});
    T std = T(std::sqrt(2.0 / double(fan_in)));
    for (int64_t i = 0; i < weight_.numel(); ++i) weight_[i] = T(init.normal()) * std;
    bias_ = Tensor<T>({out_c_});
    dweight_ = Tensor<T>({out_c_, fan_in});
    dbias_ = Tensor<T>({out_c_});
  }

  LayerKind kind() const override { return LayerKind::Conv2D; }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    input_ = x;
    return run(x);
  }

  Tensor<T> infer(const Tensor<T>& x) const override { return run(x); }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const auto& xs = input_.shape();
    int64_t n = xs[0], h = xs[2], w = xs[3];
    int64_t out_h = grad_out.dim(2), out_w = grad_out.dim(3);
    int64_t hw = out_h * out_w, patch = int64_t(in_c_) * kernel_ * kernel_;
    // Rebuild the batch-wide column matrix (cheaper than caching it) and
    // gather dY into [outC, N*hw] so both parameter gradients are single GEMMs.
    Tensor<T> cols({patch, n * hw});
    Tensor<T> dyg({out_c_, n * hw});
    for (int64_t s = 0; s < n; ++s) {
      detail::im2col(input_.data() + s * in_c_ * h * w, in_c_, h, w, kernel_, stride_, pad_top_,
                     pad_left_, out_h, out_w, cols.data(), n * hw, s * hw);
      for (int64_t oc = 0; oc < out_c_; ++oc)
        std::copy(grad_out.data() + (s * out_c_ + oc) * hw,
                  grad_out.data() + (s * out_c_ + oc + 1) * hw, dyg.data() + oc * n * hw + s * hw);
    }
    auto cmat = as_matrix2d(cols);
    auto gmat = as_matrix2d(dyg);
    as_matrix2d(dweight_).noalias() += gmat * cmat.transpose();
    for (int64_t oc = 0; oc < out_c_; ++oc) dbias_[oc] += gmat.row(oc).sum();
    Tensor<T> dcols({patch, n * hw});
    as_matrix2d(dcols).noalias() = as_matrix2d(weight_).transpose() * gmat;
    Tensor<T> dx(xs);
    for (int64_t s = 0; s < n; ++s)
      detail::col2im_add(dcols.data(), in_c_, h, w, kernel_, stride_, pad_top_, pad_left_, out_h,
                         out_w, dx.data() + s * in_c_ * h * w, n * hw, s * hw);
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out) override {
    out.push_back({prefix + ".w", &weight_, &dweight_});
    out.push_back({prefix + ".b", &bias_, &dbias_});
  }

 private:
  Tensor<T> run(const Tensor<T>& x) const {
    if (x.rank() != 4) throw ShapeError("conv expects [N,C,H,W], got " + x.shape_str());
    if (x.dim(1) != in_c_)
      throw ShapeError("conv expects " + std::to_string(in_c_) + " input channels, got " +
                       std::to_string(x.dim(1)));
    int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    int64_t out_h, out_w;
    detail::conv_out_geometry(h, kernel_, stride_, &out_h, &pad_top_);
    detail::conv_out_geometry(w, kernel_, stride_, &out_w, &pad_left_);
    int64_t hw = out_h * out_w, patch = int64_t(in_c_) * kernel_ * kernel_;
    // One batch-wide GEMM, then scatter [outC, N*hw] rows into NCHW order.
    Tensor<T> cols({patch, n * hw});
    for (int64_t s = 0; s < n; ++s)
      detail::im2col(x.data() + s * in_c_ * h * w, in_c_, h, w, kernel_, stride_, pad_top_,
                     pad_left_, out_h, out_w, cols.data(), n * hw, s * hw);
    Tensor<T> yg({out_c_, n * hw});
    as_matrix2d(yg).noalias() = as_matrix2d(weight_) * as_matrix2d(cols);
    Tensor<T> y({n, out_c_, out_h, out_w});
    for (int64_t s = 0; s < n; ++s)
      for (int64_t oc = 0; oc < out_c_; ++oc) {
        const T* src = yg.data() + oc * n * hw + s * hw;
        T* dst = y.data() + (s * out_c_ + oc) * hw;
        T b = bias_[oc];
        for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] + b;
      }
    return y;
  }

  int64_t in_c_, out_c_;
  int kernel_, stride_;
  mutable int pad_top_ = 0, pad_left_ = 0;
  Tensor<T> weight_, bias_, dweight_, dbias_;
  Tensor<T> input_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    input_ = x;
    return infer(x);
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> y = x;
    for (int64_t i = 0; i < y.numel(); ++i)
      if (y[i] < T(0)) y[i] = T(0);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> dx = grad_out;
    for (int64_t i = 0; i < dx.numel(); ++i)
      if (input_[i] <= T(0)) dx[i] = T(0);
    return dx;
  }

 private:
  Tensor<T> input_;
};

template <typename T>
class MaxPool final : public Layer<T> {
 public:
  explicit MaxPool(int window) : window_(window) {
    if (window < 2) throw ConfigError("maxpool window must be >= 2");
  }

  LayerKind kind() const override { return LayerKind::MaxPool; }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    Tensor<T> y = run(x, &argmax_);
    in_shape_ = x.shape();
    return y;
  }

  Tensor<T> infer(const Tensor<T>& x) const override { return run(x, nullptr); }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> dx(in_shape_);
    for (int64_t i = 0; i < grad_out.numel(); ++i) dx[argmax_[size_t(i)]] += grad_out[i];
    return dx;
  }

 private:
  Tensor<T> run(const Tensor<T>& x, std::vector<int64_t>* argmax) const {
    if (x.rank() != 4) throw ShapeError("maxpool expects [N,C,H,W], got " + x.shape_str());
    int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    int64_t oh = h / window_, ow = w / window_;  // floor; ragged edge dropped
    if (oh < 1 || ow < 1)
      throw ShapeError("maxpool window " + std::to_string(window_) + " too large for " +
                       x.shape_str());
    Tensor<T> y({n, c, oh, ow});
    if (argmax) argmax->resize(size_t(y.numel()));
    int64_t o = 0;
    for (int64_t s = 0; s < n; ++s)
      for (int64_t ch = 0; ch < c; ++ch) {
        const T* plane = x.data() + (s * c + ch) * h * w;
        int64_t base = (s * c + ch) * h * w;
        for (int64_t oy = 0; oy < oh; ++oy)
          for (int64_t ox = 0; ox < ow; ++ox, ++o) {
            int64_t best = oy * window_ * w + ox * window_;
            T bv = plane[best];
            for (int dy = 0; dy < window_; ++dy)
              for (int dx = 0; dx < window_; ++dx) {
                int64_t idx = (oy * window_ + dy) * w + ox * window_ + dx;
                if (plane[idx] > bv) {  // first max wins ties
                  bv = plane[idx];
                  best = idx;
                }
              }
            y[o] = bv;
            if (argmax) (*argmax)[size_t(o)] = base + best;
          }
      }
    return y;
  }

  int window_;
  std::vector<int64_t> argmax_;
  std::vector<int64_t> in_shape_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::GlobalAvgPool; }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    in_shape_ = x.shape();
    return infer(x);
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    if (x.rank() != 4) throw ShapeError("gap expects [N,C,H,W], got " + x.shape_str());
    int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor<T> y({n, c});
    for (int64_t i = 0; i < n * c; ++i) {
      T acc = T(0);
      const T* p = x.data() + i * hw;
      for (int64_t j = 0; j < hw; ++j) acc += p[j];
      y[i] = acc / T(hw);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    int64_t hw = in_shape_[2] * in_shape_[3];
    Tensor<T> dx(in_shape_);
    for (int64_t i = 0; i < grad_out.numel(); ++i) {
      T g = grad_out[i] / T(hw);
      T* p = dx.data() + i * hw;
      for (int64_t j = 0; j < hw; ++j) p[j] = g;
    }
    return dx;
  }

 private:
  std::vector<int64_t> in_shape_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_dim, int out_dim, Rng& init) : in_(in_dim), out_(out_dim) {
    weight_ = Tensor<T>({out_, in_});
    T std = T(std::sqrt(2.0 / double(in_dim)));
    for (int64_t i = 0; i < weight_.numel(); ++i) weight_[i] = T(init.normal()) * std;
    bias_ = Tensor<T>({out_});
    dweight_ = Tensor<T>({out_, in_});
    dbias_ = Tensor<T>({out_});
  }

  LayerKind kind() const override { return LayerKind::Dense; }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    input_ = x;
    return infer(x);
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    if (x.rank() != 2) throw ShapeError("dense expects [N,D], got " + x.shape_str());
    if (x.dim(1) != in_)
      throw ShapeError("dense expects input dim " + std::to_string(in_) + ", got " +
                       std::to_string(x.dim(1)));
    Tensor<T> y({x.dim(0), out_});
    as_matrix2d(y).noalias() = as_matrix2d(x) * as_matrix2d(weight_).transpose();
    auto ym = as_matrix2d(y);
    for (int64_t r = 0; r < y.dim(0); ++r)
      for (int64_t c = 0; c < out_; ++c) ym(r, c) += bias_[c];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    as_matrix2d(dweight_).noalias() += as_matrix2d(grad_out).transpose() * as_matrix2d(input_);
    auto gm = as_matrix2d(grad_out);
    for (int64_t c = 0; c < out_; ++c) dbias_[c] += gm.col(c).sum();
    Tensor<T> dx(input_.shape());
    as_matrix2d(dx).noalias() = gm * as_matrix2d(weight_);
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out) override {
    out.push_back({prefix + ".w", &weight_, &dweight_});
    out.push_back({prefix + ".b", &bias_, &dbias_});
  }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  int64_t in_, out_;
  Tensor<T> weight_, bias_, dweight_, dbias_;
  Tensor<T> input_;
};

// Inverted dropout: survivors are scaled by 1/(1-rate) at training time so
// inference is a pure parameter function.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
  }

  LayerKind kind() const override { return LayerKind::Dropout; }

  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) override {
    Tensor<T> y = x;
    mask_.assign(size_t(x.numel()), T(1));
    if (training && rate_ > 0.0) {
      T keep_scale = T(1.0 / (1.0 - rate_));
      for (int64_t i = 0; i < y.numel(); ++i) {
        if (rng.uniform() < rate_) {
          mask_[size_t(i)] = T(0);
          y[i] = T(0);
        } else {
          mask_[size_t(i)] = keep_scale;
          y[i] *= keep_scale;
        }
      }
    }
    return y;
  }

  Tensor<T> infer(const Tensor<T>& x) const override { return x; }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> dx = grad_out;
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] *= mask_[size_t(i)];
    return dx;
  }

 private:
  double rate_;
  std::vector<T> mask_;
};

template <typename T>
class Softmax final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Softmax; }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    output_ = infer(x);
    return output_;
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    if (x.rank() != 2) throw ShapeError("softmax expects [N,K], got " + x.shape_str());
    Tensor<T> y = x;
    int64_t n = x.dim(0), k = x.dim(1);
    for (int64_t r = 0; r < n; ++r) {
      T* row = y.data() + r * k;
      T mx = *std::max_element(row, row + k);
      T sum = T(0);
      for (int64_t c = 0; c < k; ++c) {
        row[c] = std::exp(row[c] - mx);
        sum += row[c];
      }
      for (int64_t c = 0; c < k; ++c) row[c] /= sum;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    // dx = y * (dy - sum(dy * y)) rowwise
    int64_t n = output_.dim(0), k = output_.dim(1);
    Tensor<T> dx({n, k});
    for (int64_t r = 0; r < n; ++r) {
      const T* y = output_.data() + r * k;
      const T* dy = grad_out.data() + r * k;
      T dot = T(0);
      for (int64_t c = 0; c < k; ++c) dot += dy[c] * y[c];
      for (int64_t c = 0; c < k; ++c) dx[r * k + c] = y[c] * (dy[c] - dot);
    }
    return dx;
  }

 private:
  Tensor<T> output_;
};

template <typename T>
class Model {
 public:
  Model() = default;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  size_t num_layers() const { return layers_.size(); }
  Layer<T>& layer(size_t i) { return *layers_[i]; }

  // Deterministic for fixed (parameters, input, training, rng_seed); dropout
  // masks are drawn from the per-call stream only when training.
  Tensor<T> forward(const Tensor<T>& input, bool training, uint64_t rng_seed) {
    Rng rng(derive_seed(rng_seed, 0x6d6f64656cULL));
    Tensor<T> x = input;
    for (size_t i = 0; i < layers_.size(); ++i) {
      try {
        x = layers_[i]->forward(x, training, rng);
      } catch (const ShapeError& e) {
        throw ShapeError("layer " + std::to_string(i) + " (" +
                         to_string(layers_[i]->kind()) + "): " + e.what());
      }
    }
    has_cache_ = true;
    return x;
  }

  Tensor<T> infer(const Tensor<T>& input) const {
    Tensor<T> x = input;
    for (size_t i = 0; i < layers_.size(); ++i) {
      try {
        x = layers_[i]->infer(x);
      } catch (const ShapeError& e) {
        throw ShapeError("layer " + std::to_string(i) + " (" +
                         to_string(layers_[i]->kind()) + "): " + e.what());
      }
    }
    return x;
  }

  // Runs infer() but stops after `upto` layers; used to harvest penultimate
  // activations as features.
  Tensor<T> infer_prefix(const Tensor<T>& input, size_t upto) const {
    Tensor<T> x = input;
    for (size_t i = 0; i < upto && i < layers_.size(); ++i) x = layers_[i]->infer(x);
    return x;
  }

  // Zeroes gradients, then walks layers in reverse. Requires a prior forward.
  Tensor<T> backward(const Tensor<T>& grad_out) {
    if (!has_cache_) throw UsageError("backward called without a matching forward");
    has_cache_ = false;
    for (auto& p : params()) p.grad->fill(T(0));
    Tensor<T> g = grad_out;
    for (size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
    return g;
  }

  std::vector<NamedParam<T>> params() {
    std::vector<NamedParam<T>> out;
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_params(std::string(to_string(layers_[i]->kind())) + std::to_string(i),
                                 out);
    return out;
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  bool has_cache_ = false;
};

// Assembles a Model from specs. `input_shape` is [C,H,W] for image models or
// [D] for vector models; shapes are threaded through so Dense knows its fan-in
// and errors surface at build time.
template <typename T>
Model<T> build_model(const std::vector<LayerSpec>& specs, std::vector<int64_t> input_shape,
                     uint64_t init_seed) {
  Rng init(derive_seed(init_seed, 0x696e6974ULL));
  Model<T> model;
  std::vector<int64_t> shape = std::move(input_shape);  // without batch dim
  for (size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    auto need_chw = [&] {
      if (shape.size() != 3)
        throw ShapeError("layer " + std::to_string(i) + " (" + to_string(s.kind) +
                         ") needs [C,H,W] input");
    };
    switch (s.kind) {
      case LayerKind::Conv2D: {
        need_chw();
        model.add(std::make_unique<Conv2D<T>>(int(shape[0]), s.out_channels, s.kernel, s.stride,
                                              init));
        int64_t oh, ow;
        int pad;
        detail::conv_out_geometry(shape[1], s.kernel, s.stride, &oh, &pad);
        detail::conv_out_geometry(shape[2], s.kernel, s.stride, &ow, &pad);
        shape = {s.out_channels, oh, ow};
        break;
      }
      case LayerKind::ReLU:
        model.add(std::make_unique<ReLU<T>>());
        break;
      case LayerKind::MaxPool: {
        need_chw();
        model.add(std::make_unique<MaxPool<T>>(s.window));
        shape = {shape[0], shape[1] / s.window, shape[2] / s.window};
        if (shape[1] < 1 || shape[2] < 1)
          throw ShapeError("layer " + std::to_string(i) + ": maxpool exhausts spatial dims");
        break;
      }
      case LayerKind::GlobalAvgPool:
        need_chw();
        model.add(std::make_unique<GlobalAvgPool<T>>());
        shape = {shape[0]};
        break;
      case LayerKind::Dense: {
        if (shape.size() != 1)
          throw ShapeError("layer " + std::to_string(i) + " (dense) needs flat input");
        model.add(std::make_unique<Dense<T>>(int(shape[0]), s.out_dim, init));
        shape = {s.out_dim};
        break;
      }
      case LayerKind::Dropout:
        model.add(std::make_unique<Dropout<T>>(s.rate));
        break;
      case LayerKind::Softmax:
        model.add(std::make_unique<Softmax<T>>());
        break;
    }
  }
  return model;
}

}  // namespace scd::nn
