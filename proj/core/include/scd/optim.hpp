#pragma once

#include <cmath>
#include <vector>

#include "scd/nn.hpp"

namespace scd::nn {

// Adam with explicit bias correction, optionally the AMSGrad variant (keeps
// the running max of the corrected second moment). State is keyed by position
// in the param list, which must stay stable across steps.
template <typename T>
class Adam {
 public:
  explicit Adam(double lr, bool amsgrad = false, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), amsgrad_(amsgrad) {}

  void step(std::vector<NamedParam<T>> params) {
    if (slots_.empty()) {
      slots_.reserve(params.size());
      for (auto& p : params)
        slots_.push_back({Tensor<T>(p.value->shape()), Tensor<T>(p.value->shape()),
                          amsgrad_ ? Tensor<T>(p.value->shape()) : Tensor<T>()});
    }
    if (slots_.size() != params.size()) throw UsageError("optimizer bound to a different model");
    ++t_;
    T c1 = T(1) - T(std::pow(beta1_, double(t_)));
    T c2 = T(1) - T(std::pow(beta2_, double(t_)));
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& w = *params[i].value;
      const Tensor<T>& g = *params[i].grad;
      Slot& s = slots_[i];
      for (int64_t j = 0; j < w.numel(); ++j) {
        s.m[j] = T(beta1_) * s.m[j] + (T(1) - T(beta1_)) * g[j];
        s.v[j] = T(beta2_) * s.v[j] + (T(1) - T(beta2_)) * g[j] * g[j];
        T mhat = s.m[j] / c1;
        T vhat = s.v[j] / c2;
        if (amsgrad_) {
          if (vhat > s.vmax[j]) s.vmax[j] = vhat;
          vhat = s.vmax[j];
        }
        w[j] -= T(lr_) * mhat / (std::sqrt(vhat) + T(eps_));
      }
    }
  }

  int64_t steps() const { return t_; }

  // optimizer-state introspection, primarily for invariant tests
  const Tensor<T>& first_moment(size_t i) const { return slots_.at(i).m; }
  const Tensor<T>& second_moment(size_t i) const { return slots_.at(i).v; }
  const Tensor<T>& second_moment_max(size_t i) const { return slots_.at(i).vmax; }

 private:
  struct Slot {
    Tensor<T> m, v, vmax;
  };
  double lr_, beta1_, beta2_, eps_;
  bool amsgrad_;
  int64_t t_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace scd::nn
