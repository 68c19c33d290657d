#pragma once

#include <utility>
#include <vector>

#include "scd/dataset.hpp"
#include "scd/nn.hpp"
#include "scd/tensor.hpp"

namespace scd {

// CNN-FFT feature stage: a compact severity classifier whose penultimate
// activations (512) are concatenated with 512 spectral features, then cut to
// 50 by recursive feature elimination under a ridge classifier.

struct FeatureVector {
  enum class Stage { Raw, Reduced };
  Stage stage = Stage::Raw;
  std::vector<float> values;
  std::vector<int> selected_indices;  // Reduced only, strictly increasing
};

struct FeatureCnnConfig {
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 16;
  int penultimate = 512;
};

struct FeatureCNN {
  nn::Model<float> model;
  int height = 0, width = 0;
  int num_classes = 0;
  int penultimate = 0;
  bool trained = false;
};

std::vector<nn::LayerSpec> feature_cnn_specs(int penultimate, int num_classes);
FeatureCNN train_feature_cnn(const Dataset& ds, const FeatureCnnConfig& cfg, uint64_t seed);

// [cnn penultimate (512) ‖ spectral magnitudes (f_fft)] for one image.
FeatureVector extract_raw(const PercollImage& img, const FeatureCNN& cnn, int f_fft);

struct RidgeOptions {
  double alpha = 1.0;
  bool center = true;  // center features and ±1 targets; bias absorbs the means
};

struct RidgeModel {
  int num_classes = 0, dim = 0;
  std::vector<double> weights;  // K×D row-major
  std::vector<double> bias;     // K
  double alpha = 1.0;
  bool single_class = false;  // degenerate fit diagnostic

  std::vector<double> scores(const float* x) const;
  int predict(const float* x) const;
};

// Regularized least squares on one-hot ±1 targets; argmax of class scores is
// the prediction.
RidgeModel fit_ridge(const Tensor<float>& x, const std::vector<int>& y, int num_classes,
                     const RidgeOptions& opt = {});

// Max-abs residual of the normal equations the model claims to solve (on the
// centered system when opt.center).
double normal_equation_residual(const Tensor<float>& x, const std::vector<int>& y,
                                const RidgeModel& model, const RidgeOptions& opt = {});

struct RFESelection {
  std::vector<int> surviving_indices;                        // sorted ascending
  std::vector<std::pair<int, std::vector<int>>> eliminated;  // (round, dropped)
};

// Repeatedly fit ridge on the survivors, rank by L2 norm of each feature's
// weight column across classes, drop the weakest ceil(step_fraction·current)
// (never below target_count); ties drop the higher index first.
RFESelection rfe_select(const Tensor<float>& x, const std::vector<int>& y, int num_classes,
                        int target_count, double step_fraction = 0.1, double alpha = 1.0);

struct FeatureScaler {
  std::vector<float> mean, stddev;  // per kept coordinate; stddev floored at 1e-8
};

// Mean/std over rows of the already-reduced training matrix.
FeatureScaler fit_scaler(const Tensor<float>& x_reduced);

// Gather surviving coordinates, then standardize with training-fold stats.
FeatureVector apply_selection(const FeatureVector& raw, const RFESelection& sel,
                              const FeatureScaler& scaler);

}  // namespace scd
