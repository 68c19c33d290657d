#include "scd/svm.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace scd {

std::vector<double> SvmModel::scores(const float* x) const {
  std::vector<double> s(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    double acc = bias[size_t(c)];
    const double* w = weights.data() + size_t(c) * size_t(dim);
    for (int j = 0; j < dim; ++j) acc += w[j] * double(x[j]);
    s[size_t(c)] = acc;
  }
  return s;
}

int SvmModel::predict(const float* x) const {
  std::vector<double> s = scores(x);
  return int(std::max_element(s.begin(), s.end()) - s.begin());
}

SvmModel linear_svm_fit(const Tensor<float>& x, const std::vector<int>& y, int num_classes,
                        const SvmConfig& cfg, uint64_t seed) {
  (void)seed;  // full-batch from zero init is already deterministic
  if (x.rank() != 2) throw ShapeError("svm expects [N,D] features");
  int64_t n = x.dim(0), d = x.dim(1);
  if (int64_t(y.size()) != n) throw ShapeError("svm labels do not align with rows");
  if (cfg.c <= 0.0 || cfg.steps < 1) throw ConfigError("svm needs C > 0 and steps >= 1");
  int present = 0;
  {
    std::vector<uint8_t> seen(size_t(num_classes), 0);
    for (int v : y) {
      if (v < 0 || v >= num_classes) throw DataError("svm label out of range");
      if (!seen[size_t(v)]) {
        seen[size_t(v)] = 1;
        ++present;
      }
    }
  }
  if (present < 2) throw DataError("svm needs at least 2 classes present, got 1");

  SvmModel m;
  m.num_classes = num_classes;
  m.dim = int(d);
  m.weights.assign(size_t(num_classes) * size_t(d), 0.0);
  m.bias.assign(size_t(num_classes), 0.0);

  double lambda = 1.0 / (cfg.c * double(n));
  Eigen::MatrixXd xd(n, d);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) xd(i, j) = double(x[i * d + j]);
  for (int c = 0; c < num_classes; ++c) {
    Eigen::VectorXd t(n);
    for (int64_t i = 0; i < n; ++i) t(i) = y[size_t(i)] == c ? 1.0 : -1.0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    for (int step = 1; step <= cfg.steps; ++step) {
      double eta = 1.0 / (lambda * double(step));
      // subgradient of λ/2‖w‖² + 1/n Σ max(0, 1 − t_i(w·x_i + b))
      Eigen::VectorXd margin = xd * w;
      margin.array() += b;
      Eigen::VectorXd viol =
          ((t.array() * margin.array()) < 1.0).select(t, Eigen::VectorXd::Zero(n));
      Eigen::VectorXd gw = -(xd.transpose() * viol);
      double gb = -viol.sum();
      w = (1.0 - eta * lambda) * w - (eta / double(n)) * gw;
      b -= eta / double(n) * gb;
    }
    for (int64_t j = 0; j < d; ++j) m.weights[size_t(c) * size_t(d) + size_t(j)] = w(j);
    m.bias[size_t(c)] = b;
  }
  return m;
}

}  // namespace scd
