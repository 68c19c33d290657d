#include "scd/features.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "scd/losses.hpp"
#include "scd/optim.hpp"
#include "scd/signal.hpp"

namespace scd {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::VectorXd;

constexpr int kFeatureConvWidths[4] = {8, 16, 32, 64};

Tensor<float> image_batch(const Dataset& ds, const std::vector<size_t>& idx, int h, int w) {
  Tensor<float> x({int64_t(idx.size()), 1, h, w});
  for (size_t b = 0; b < idx.size(); ++b) {
    const auto& img = ds.samples[idx[b]].image;
    if (img.height() != h || img.width() != w)
      throw ShapeError("sample '" + ds.samples[idx[b]].sample_id + "' image size mismatch");
    std::copy(img.pixels().begin(), img.pixels().end(), x.data() + int64_t(b) * h * w);
  }
  return x;
}

// Builds the (centered) Gram pieces once; RFE rounds then solve on gathered
// submatrices instead of refitting from raw data.
struct GramCache {
  Mat gram;   // XᵀX (centered when requested)
  Mat xty;    // XᵀY
  Vec xmean;  // column means
  Vec ymean;  // target column means
  int64_t n = 0;
};

GramCache build_gram(const Tensor<float>& x, const std::vector<int>& y, int k, bool center) {
  int64_t n = x.dim(0), d = x.dim(1);
  Mat xd(n, d);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) xd(i, j) = double(x[i * d + j]);
  Mat t = Mat::Constant(n, k, -1.0);
  for (int64_t i = 0; i < n; ++i) t(i, y[size_t(i)]) = 1.0;
  GramCache g;
  g.n = n;
  g.xmean = center ? Vec(xd.colwise().mean()) : Vec(Vec::Zero(d));
  g.ymean = center ? Vec(t.colwise().mean()) : Vec(Vec::Zero(k));
  if (center) {
    xd.rowwise() -= g.xmean.transpose();
    t.rowwise() -= g.ymean.transpose();
  }
  g.gram.noalias() = xd.transpose() * xd;
  g.xty.noalias() = xd.transpose() * t;
  return g;
}

// Solve (G[S,S] + αI) W = XtY[S]; returns D_s×K weights for the subset.
Mat solve_subset(const GramCache& g, const std::vector<int>& subset, double alpha) {
  int64_t ds = int64_t(subset.size());
  int64_t k = g.xty.cols();
  Mat a(ds, ds);
  Mat b(ds, k);
  for (int64_t r = 0; r < ds; ++r) {
    for (int64_t c = 0; c < ds; ++c) a(r, c) = g.gram(subset[size_t(r)], subset[size_t(c)]);
    a(r, r) += alpha;
    b.row(r) = g.xty.row(subset[size_t(r)]);
  }
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) throw DataError("ridge system is not positive definite");
  return llt.solve(b);
}

void check_labels(const std::vector<int>& y, int num_classes, int64_t n) {
  if (int64_t(y.size()) != n) throw ShapeError("ridge: labels do not align with rows");
  for (int v : y)
    if (v < 0 || v >= num_classes) throw DataError("ridge: label out of range");
}

}  // namespace

std::vector<nn::LayerSpec> feature_cnn_specs(int penultimate, int num_classes) {
  using nn::LayerSpec;
  std::vector<LayerSpec> specs;
  for (int width : kFeatureConvWidths) {
    specs.push_back(LayerSpec::conv2d(width, 3, 1));
    specs.push_back(LayerSpec::relu());
    specs.push_back(LayerSpec::maxpool(2));
  }
  specs.push_back(LayerSpec::global_avg_pool());
  specs.push_back(LayerSpec::dense(penultimate));
  specs.push_back(LayerSpec::relu());
  specs.push_back(LayerSpec::dense(num_classes));
  return specs;
}

FeatureCNN train_feature_cnn(const Dataset& ds, const FeatureCnnConfig& cfg, uint64_t seed) {
  if (ds.samples.size() < 2) throw DataError("feature CNN needs at least 2 samples");
  for (const auto& s : ds.samples)
    if (!s.severity) throw DataError("sample '" + s.sample_id + "' lacks a severity label");
  int h = ds.samples[0].image.height(), w = ds.samples[0].image.width();
  if (h < 64 || w < 16) throw ConfigError("feature CNN needs images of at least 64x16");

  FeatureCNN cnn;
  cnn.model = nn::build_model<float>(feature_cnn_specs(cfg.penultimate, ds.num_classes),
                                     {1, h, w}, derive_seed(seed, 0x66656174ULL));
  cnn.height = h;
  cnn.width = w;
  cnn.num_classes = ds.num_classes;
  cnn.penultimate = cfg.penultimate;

  size_t n = ds.samples.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  nn::Adam<float> opt(cfg.lr, false);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, 0x66657063ULL, uint64_t(epoch)));
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < n; start += size_t(cfg.batch_size)) {
      size_t stop = std::min(n, start + size_t(cfg.batch_size));
      std::vector<size_t> batch(order.begin() + std::ptrdiff_t(start),
                                order.begin() + std::ptrdiff_t(stop));
      Tensor<float> x = image_batch(ds, batch, h, w);
      std::vector<int> labels(batch.size());
      for (size_t b = 0; b < batch.size(); ++b) labels[b] = *ds.samples[batch[b]].severity;
      std::vector<uint8_t> mask(batch.size(), 1);
      Tensor<float> logits =
          cnn.model.forward(x, true, derive_seed(seed, 0x66737470ULL, uint64_t(epoch), start));
      auto loss = nn::masked_cross_entropy(logits, labels, mask);
      cnn.model.backward(loss.grad);
      opt.step(cnn.model.params());
    }
  }
  cnn.trained = true;
  return cnn;
}

FeatureVector extract_raw(const PercollImage& img, const FeatureCNN& cnn, int f_fft) {
  if (!cnn.trained) throw UsageError("extract_raw needs a trained feature CNN");
  if (img.height() != cnn.height || img.width() != cnn.width)
    throw ShapeError("image size does not match the feature CNN's training size");
  Tensor<float> x({1, 1, cnn.height, cnn.width});
  std::copy(img.pixels().begin(), img.pixels().end(), x.data());
  // penultimate activations: everything up to the final classification layer
  Tensor<float> acts = cnn.model.infer_prefix(x, cnn.model.num_layers() - 1);
  FeatureVector fv;
  fv.stage = FeatureVector::Stage::Raw;
  fv.values.assign(acts.data(), acts.data() + acts.numel());
  std::vector<float> spec = signal::spectral_features(img, f_fft);
  fv.values.insert(fv.values.end(), spec.begin(), spec.end());
  return fv;
}

std::vector<double> RidgeModel::scores(const float* x) const {
  std::vector<double> s(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    double acc = bias[size_t(c)];
    const double* w = weights.data() + size_t(c) * size_t(dim);
    for (int j = 0; j < dim; ++j) acc += w[j] * double(x[j]);
    s[size_t(c)] = acc;
  }
  return s;
}

int RidgeModel::predict(const float* x) const {
  std::vector<double> s = scores(x);
  return int(std::max_element(s.begin(), s.end()) - s.begin());
}

RidgeModel fit_ridge(const Tensor<float>& x, const std::vector<int>& y, int num_classes,
                     const RidgeOptions& opt) {
  if (x.rank() != 2) throw ShapeError("ridge expects [N,D] features");
  if (opt.alpha <= 0.0) throw ConfigError("ridge alpha must be positive");
  int64_t n = x.dim(0), d = x.dim(1);
  if (n < num_classes) throw DataError("ridge needs at least one row per class");
  check_labels(y, num_classes, n);

  GramCache g = build_gram(x, y, num_classes, opt.center);
  std::vector<int> all(static_cast<size_t>(d));
  std::iota(all.begin(), all.end(), 0);
  Mat w = solve_subset(g, all, opt.alpha);  // D×K

  RidgeModel m;
  m.num_classes = num_classes;
  m.dim = int(d);
  m.alpha = opt.alpha;
  m.weights.assign(size_t(num_classes) * size_t(d), 0.0);
  m.bias.assign(size_t(num_classes), 0.0);
  for (int c = 0; c < num_classes; ++c) {
    for (int64_t j = 0; j < d; ++j) m.weights[size_t(c) * size_t(d) + size_t(j)] = w(j, c);
    m.bias[size_t(c)] = g.ymean(c) - g.xmean.dot(w.col(c));
  }
  m.single_class = std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end();
  return m;
}

double normal_equation_residual(const Tensor<float>& x, const std::vector<int>& y,
                                const RidgeModel& model, const RidgeOptions& opt) {
  GramCache g = build_gram(x, y, model.num_classes, opt.center);
  int64_t d = x.dim(1);
  Mat w(d, model.num_classes);
  for (int c = 0; c < model.num_classes; ++c)
    for (int64_t j = 0; j < d; ++j) w(j, c) = model.weights[size_t(c) * size_t(d) + size_t(j)];
  Mat lhs = g.gram * w + model.alpha * w - g.xty;
  return lhs.cwiseAbs().maxCoeff();
}

RFESelection rfe_select(const Tensor<float>& x, const std::vector<int>& y, int num_classes,
                        int target_count, double step_fraction, double alpha) {
  if (x.rank() != 2) throw ShapeError("rfe expects [N,D] features");
  int64_t d = x.dim(1);
  if (target_count < 1 || target_count >= d)
    throw ConfigError("rfe target_count must be in [1, D)");
  if (step_fraction <= 0.0 || step_fraction > 0.5)
    throw ConfigError("rfe step_fraction must be in (0, 0.5]");
  check_labels(y, num_classes, x.dim(0));

  GramCache g = build_gram(x, y, num_classes, true);
  std::vector<int> alive(static_cast<size_t>(d));
  std::iota(alive.begin(), alive.end(), 0);
  RFESelection sel;
  int round = 0;
  while (int64_t(alive.size()) > target_count) {
    Mat w = solve_subset(g, alive, alpha);
    int64_t cur = int64_t(alive.size());
    int64_t drop = std::min<int64_t>(int64_t(std::ceil(step_fraction * double(cur))),
                                     cur - target_count);
    // weakest first; ties resolved toward the higher feature index
    std::vector<int64_t> rank(static_cast<size_t>(cur));
    std::iota(rank.begin(), rank.end(), int64_t(0));
    std::vector<double> norm(static_cast<size_t>(cur));
    for (int64_t i = 0; i < cur; ++i) norm[size_t(i)] = w.row(i).squaredNorm();
    std::sort(rank.begin(), rank.end(), [&](int64_t a, int64_t b) {
      if (norm[size_t(a)] != norm[size_t(b)]) return norm[size_t(a)] < norm[size_t(b)];
      return alive[size_t(a)] > alive[size_t(b)];
    });
    std::vector<int> dropped;
    std::vector<uint8_t> dead(size_t(cur), 0);
    for (int64_t i = 0; i < drop; ++i) {
      dead[size_t(rank[size_t(i)])] = 1;
      dropped.push_back(alive[size_t(rank[size_t(i)])]);
    }
    std::sort(dropped.begin(), dropped.end());
    sel.eliminated.emplace_back(round, std::move(dropped));
    std::vector<int> next;
    next.reserve(size_t(cur - drop));
    for (int64_t i = 0; i < cur; ++i)
      if (!dead[size_t(i)]) next.push_back(alive[size_t(i)]);
    alive = std::move(next);
    ++round;
  }
  sel.surviving_indices = std::move(alive);
  return sel;
}

FeatureScaler fit_scaler(const Tensor<float>& x_reduced) {
  int64_t n = x_reduced.dim(0), d = x_reduced.dim(1);
  if (n < 1) throw DataError("scaler needs at least one row");
  FeatureScaler sc;
  sc.mean.assign(size_t(d), 0.0f);
  sc.stddev.assign(size_t(d), 0.0f);
  for (int64_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (int64_t i = 0; i < n; ++i) m += double(x_reduced[i * d + j]);
    m /= double(n);
    double v = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double dv = double(x_reduced[i * d + j]) - m;
      v += dv * dv;
    }
    sc.mean[size_t(j)] = float(m);
    sc.stddev[size_t(j)] = float(std::max(std::sqrt(v / double(n)), 1e-8));
  }
  return sc;
}

FeatureVector apply_selection(const FeatureVector& raw, const RFESelection& sel,
                              const FeatureScaler& scaler) {
  if (raw.stage != FeatureVector::Stage::Raw)
    throw UsageError("apply_selection expects a raw feature vector");
  if (sel.surviving_indices.size() != scaler.mean.size())
    throw ShapeError("selection and scaler disagree on dimensionality");
  FeatureVector out;
  out.stage = FeatureVector::Stage::Reduced;
  out.selected_indices = sel.surviving_indices;
  out.values.reserve(sel.surviving_indices.size());
  for (size_t j = 0; j < sel.surviving_indices.size(); ++j) {
    int idx = sel.surviving_indices[j];
    if (idx < 0 || size_t(idx) >= raw.values.size())
      throw ShapeError("selected index " + std::to_string(idx) + " out of range");
    out.values.push_back((raw.values[size_t(idx)] - scaler.mean[j]) / scaler.stddev[j]);
  }
  return out;
}

}  // namespace scd
