#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "scd/features.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "scd/signal.hpp"

using scd::ConfigError;
using scd::DataError;
using scd::Dataset;
using scd::FeatureScaler;
using scd::FeatureVector;
using scd::GeneratorConfig;
using scd::RFESelection;
using scd::RidgeModel;
using scd::RidgeOptions;
using scd::ShapeError;
using scd::Tensor;
using scd::UsageError;

namespace {

Dataset tiny_dataset(uint64_t seed) {
  GeneratorConfig cfg;
  cfg.num_patients = 4;
  cfg.total_samples = 12;
  cfg.height = 64;
  cfg.width = 16;
  return scd::generate_synthetic(cfg, seed);
}

// Gaussian design with a single informative coordinate at `signal_col`.
Tensor<float> planted_design(int n, int d, int signal_col, std::vector<int>& y, uint32_t seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  Tensor<float> x({n, d});
  y.resize(size_t(n));
  for (int i = 0; i < n; ++i) {
    y[size_t(i)] = i % 2;
    for (int j = 0; j < d; ++j) x[int64_t(i) * d + j] = noise(gen);
    x[int64_t(i) * d + signal_col] = (y[size_t(i)] == 1 ? 2.0f : -2.0f) + 0.1f * noise(gen);
  }
  return x;
}

}  // namespace

TEST_CASE("ridge closed form on a two-point line, no centering") {
  // X = [1; 2], y = [0, 1], alpha = 1, +-1 targets:
  //   (X'X + 1) w_c = X' t_c  ->  6 w_0 = -1, 6 w_1 = +1
  Tensor<float> x({2, 1}, {1.0f, 2.0f});
  std::vector<int> y = {0, 1};
  RidgeOptions opt;
  opt.center = false;
  RidgeModel m = scd::fit_ridge(x, y, 2, opt);
  CHECK(m.weights[0] == doctest::Approx(-1.0 / 6.0).epsilon(1e-12));
  CHECK(m.weights[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(m.bias[0] == doctest::Approx(0.0));
  CHECK(m.bias[1] == doctest::Approx(0.0));
  float q = 0.5f;
  auto s = m.scores(&q);
  CHECK(s[0] == doctest::Approx(-1.0 / 12.0));
  CHECK(s[1] == doctest::Approx(1.0 / 12.0));
  CHECK(m.predict(&q) == 1);
  CHECK(scd::normal_equation_residual(x, y, m, opt) < 1e-12);
  CHECK(!m.single_class);
}

TEST_CASE("ridge satisfies its normal equations on random data") {
  std::vector<int> y;
  Tensor<float> x = planted_design(40, 6, 2, y, 77);
  RidgeModel m = scd::fit_ridge(x, y, 3, {});
  CHECK(scd::normal_equation_residual(x, y, m) < 1e-9);
  // a perturbed model must violate them, or the residual oracle is vacuous
  RidgeModel bad = m;
  bad.weights[0] += 0.1;
  CHECK(scd::normal_equation_residual(x, y, bad) > 1e-4);
}

TEST_CASE("centered ridge is invariant to a constant feature shift") {
  std::vector<int> y;
  Tensor<float> x = planted_design(30, 4, 1, y, 5);
  Tensor<float> xs = x;
  for (int64_t i = 0; i < xs.numel(); ++i) xs[i] += 10.0f;
  RidgeModel a = scd::fit_ridge(x, y, 2, {});
  RidgeModel b = scd::fit_ridge(xs, y, 2, {});
  std::vector<float> q = {0.3f, -0.7f, 1.1f, 0.0f};
  std::vector<float> qs = q;
  for (auto& v : qs) v += 10.0f;
  auto sa = a.scores(q.data());
  auto sb = b.scores(qs.data());
  for (size_t c = 0; c < sa.size(); ++c) CHECK(std::abs(sa[c] - sb[c]) < 1e-3);
}

TEST_CASE("ridge input validation") {
  Tensor<float> x({4, 2});
  std::vector<int> y = {0, 1, 0, 1};
  RidgeOptions bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(scd::fit_ridge(x, y, 2, bad), ConfigError);
  CHECK_THROWS_AS(scd::fit_ridge(Tensor<float>({4}), y, 2, {}), ShapeError);
  CHECK_THROWS_AS(scd::fit_ridge(x, {0, 1, 0}, 2, {}), ShapeError);
  CHECK_THROWS_AS(scd::fit_ridge(x, {0, 1, 0, 5}, 2, {}), DataError);
  CHECK_THROWS_AS(scd::fit_ridge(x, y, 5, {}), DataError);  // fewer rows than classes
  RidgeModel m = scd::fit_ridge(x, {1, 1, 1, 1}, 2, {});
  CHECK(m.single_class);
}

TEST_CASE("rfe recovers a planted signal feature") {
  std::vector<int> y;
  Tensor<float> x = planted_design(80, 50, 7, y, 11);
  RFESelection sel = scd::rfe_select(x, y, 2, 1, 0.1, 1.0);
  REQUIRE(sel.surviving_indices.size() == 1);
  CHECK(sel.surviving_indices[0] == 7);
}

TEST_CASE("rfe drops the higher index on ties") {
  // two byte-identical columns: equal weight norms, so the tie rule decides
  Tensor<float> x({6, 2});
  std::vector<int> y(6);
  for (int i = 0; i < 6; ++i) {
    float v = (i % 2 == 0) ? 1.0f : -1.0f;
    x[int64_t(i) * 2] = v;
    x[int64_t(i) * 2 + 1] = v;
    y[size_t(i)] = i % 2;
  }
  RFESelection sel = scd::rfe_select(x, y, 2, 1, 0.5, 1.0);
  CHECK(sel.surviving_indices == std::vector<int>{0});
  REQUIRE(sel.eliminated.size() == 1);
  CHECK(sel.eliminated[0].first == 0);
  CHECK(sel.eliminated[0].second == std::vector<int>{1});
}

TEST_CASE("rfe round structure: ceil(step*current), never past the target") {
  std::vector<int> y;
  Tensor<float> x = planted_design(40, 10, 0, y, 13);
  RFESelection sel = scd::rfe_select(x, y, 2, 5, 0.1, 1.0);
  CHECK(sel.surviving_indices.size() == 5);
  CHECK(sel.eliminated.size() == 5);  // ceil(0.1 * cur) == 1 per round
  for (const auto& [round, dropped] : sel.eliminated) CHECK(dropped.size() == 1);
  bool sorted = std::is_sorted(sel.surviving_indices.begin(), sel.surviving_indices.end());
  CHECK(sorted);

  RFESelection one = scd::rfe_select(x, y, 2, 9, 0.5, 1.0);
  CHECK(one.surviving_indices.size() == 9);  // drop clamped to cur - target
  CHECK(one.eliminated.size() == 1);
}

TEST_CASE("rfe rejects bad settings") {
  std::vector<int> y;
  Tensor<float> x = planted_design(20, 8, 0, y, 17);
  CHECK_THROWS_AS(scd::rfe_select(x, y, 2, 0, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(scd::rfe_select(x, y, 2, 8, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(scd::rfe_select(x, y, 2, 3, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(scd::rfe_select(x, y, 2, 3, 0.6, 1.0), ConfigError);
}

TEST_CASE("scaler computes population stats and floors tiny deviations") {
  Tensor<float> x({2, 3}, {1.0f, 2.0f, 5.0f, 3.0f, 4.0f, 5.0f});
  FeatureScaler sc = scd::fit_scaler(x);
  CHECK(sc.mean[0] == doctest::Approx(2.0f));
  CHECK(sc.mean[1] == doctest::Approx(3.0f));
  CHECK(sc.stddev[0] == doctest::Approx(1.0f));
  CHECK(sc.stddev[1] == doctest::Approx(1.0f));
  CHECK(sc.mean[2] == doctest::Approx(5.0f));
  CHECK(sc.stddev[2] == doctest::Approx(1e-8f));  // constant column
  CHECK_THROWS_AS(scd::fit_scaler(Tensor<float>({0, 3})), DataError);
}

TEST_CASE("apply_selection gathers, standardizes, and validates") {
  FeatureVector raw;
  raw.stage = FeatureVector::Stage::Raw;
  raw.values = {10.0f, 20.0f, 30.0f, 40.0f};
  RFESelection sel;
  sel.surviving_indices = {1, 3};
  FeatureScaler sc;
  sc.mean = {18.0f, 38.0f};
  sc.stddev = {2.0f, 4.0f};
  FeatureVector out = scd::apply_selection(raw, sel, sc);
  CHECK(out.stage == FeatureVector::Stage::Reduced);
  CHECK(out.selected_indices == sel.surviving_indices);
  REQUIRE(out.values.size() == 2);
  CHECK(out.values[0] == doctest::Approx(1.0f));
  CHECK(out.values[1] == doctest::Approx(0.5f));

  CHECK_THROWS_AS(scd::apply_selection(out, sel, sc), UsageError);  // already reduced
  FeatureScaler short_sc;
  short_sc.mean = {0.0f};
  short_sc.stddev = {1.0f};
  CHECK_THROWS_AS(scd::apply_selection(raw, sel, short_sc), ShapeError);
  RFESelection oob;
  oob.surviving_indices = {1, 9};
  CHECK_THROWS_AS(scd::apply_selection(raw, oob, sc), ShapeError);
}

TEST_CASE("feature cnn trains and exposes penultimate + spectral features") {
  Dataset ds = tiny_dataset(21);
  scd::FeatureCnnConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 6;
  cfg.penultimate = 32;
  scd::FeatureCNN cnn = scd::train_feature_cnn(ds, cfg, 9);
  CHECK(cnn.trained);
  CHECK(cnn.penultimate == 32);

  FeatureVector fv = scd::extract_raw(ds.samples[0].image, cnn, 16);
  CHECK(fv.stage == FeatureVector::Stage::Raw);
  CHECK(fv.values.size() == 32 + 16);

  // the spectral tail is exactly the image's FFT feature block
  std::vector<float> spec = scd::signal::spectral_features(ds.samples[0].image, 16);
  for (size_t i = 0; i < spec.size(); ++i) CHECK(fv.values[32 + i] == spec[i]);

  // determinism across identical runs
  scd::FeatureCNN cnn2 = scd::train_feature_cnn(ds, cfg, 9);
  FeatureVector fv2 = scd::extract_raw(ds.samples[0].image, cnn2, 16);
  CHECK(fv.values == fv2.values);

  scd::FeatureCNN fresh;
  CHECK_THROWS_AS(scd::extract_raw(ds.samples[0].image, fresh, 16), UsageError);
  scd::PercollImage wrong(128, 32);
  CHECK_THROWS_AS(scd::extract_raw(wrong, cnn, 16), ShapeError);

  Dataset nolabel = tiny_dataset(22);
  nolabel.samples[0].severity.reset();
  CHECK_THROWS_AS(scd::train_feature_cnn(nolabel, cfg, 0), DataError);
}
