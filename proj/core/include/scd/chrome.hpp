#pragma once

#include <vector>

#include "scd/dataset.hpp"
#include "scd/nn.hpp"

namespace scd {

// f_chrome: regression CNN estimating (hypo_pct, hyper_pct) from a Percoll
// image. Seven 3x3 conv+ReLU blocks (widths 8..64, max-pool while the spatial
// size permits, at most five pools), global average pooling, then
// dropout/dense/relu/dropout/dense with a final ReLU clamping both outputs to
// >= 0.
struct ChromeConfig {
  int epochs = 100;
  double lr = 5e-4;
  bool amsgrad = true;
  int batch_size = 16;
  double dropout = 0.5;
};

struct ChromeNet {
  nn::Model<float> model;
  int height = 0, width = 0;  // training image geometry
  double dropout = 0.5;
  bool trained = false;
};

struct ChromeEstimate {
  float hypo_pct = 0.0f;
  float hyper_pct = 0.0f;
};

std::vector<nn::LayerSpec> chrome_layer_specs(double dropout);
ChromeNet make_chrome_net(int height, int width, double dropout, uint64_t seed);

// Minimizes mean squared error on (hypo, hyper) in raw percentage units.
// Deterministic per (dataset, config, seed). loss_trace, when given, receives
// the dropout-free full-set MSE after every epoch.
ChromeNet train_chrome(const Dataset& ds, const ChromeConfig& cfg, uint64_t seed,
                       std::vector<double>* loss_trace = nullptr);

ChromeEstimate predict_chrome(const ChromeNet& net, const PercollImage& img);

struct ChromeEval {
  double rmse_hypo = 0.0;
  double rmse_hyper = 0.0;
};

ChromeEval evaluate_chrome(const ChromeNet& net, const Dataset& ds);

}  // namespace scd
