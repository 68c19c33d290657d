// Microbenchmarks for the hot paths: FFT, spectral feature extraction, the
// similarity kernel, propagation normalization, conv forward, GCN inference.
#include <benchmark/benchmark.h>

#include <complex>
#include <random>
#include <vector>

#include "scd/dataset.hpp"
#include "scd/graph.hpp"
#include "scd/nn.hpp"
#include "scd/signal.hpp"

namespace {

std::vector<std::complex<double>> random_signal(size_t n, uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> v(-1.0, 1.0);
  std::vector<std::complex<double>> x(n);
  for (auto& c : x) c = {v(gen), v(gen)};
  return x;
}

void BM_Fft(benchmark::State& state) {
  auto x = random_signal(size_t(state.range(0)), 11);
  for (auto _ : state) benchmark::DoNotOptimize(scd::signal::fft(x));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Fft)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oNLogN);

void BM_SpectralFeatures(benchmark::State& state) {
  scd::Rng rng(11);
  scd::PercollImage img = scd::render_percoll(128, 32, 18.0f, 4.0f, 0.02f, rng);
  for (auto _ : state) benchmark::DoNotOptimize(scd::signal::spectral_features(img, 512));
}
BENCHMARK(BM_SpectralFeatures);

void BM_Similarity(benchmark::State& state) {
  scd::SimilarityInputs a, b;
  a.h_hat = {12.0f, 3.0f};
  a.spleen = scd::SpleenDescriptor::measured(5);
  b.h_hat = {14.5f, 2.0f};
  b.spleen = scd::SpleenDescriptor::removed();
  for (auto _ : state)
    benchmark::DoNotOptimize(scd::similarity(a, b, 10.0, scd::SimilarityMode::Corrected));
}
BENCHMARK(BM_Similarity);

void BM_NormalizePropagation(benchmark::State& state) {
  int64_t n = state.range(0);
  std::mt19937 gen(13);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  scd::Tensor<double> adj({n, n});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j) {
      double v = w(gen);
      adj[i * n + j] = v;
      adj[j * n + i] = v;
    }
  for (auto _ : state) benchmark::DoNotOptimize(scd::normalize_propagation(adj));
}
BENCHMARK(BM_NormalizePropagation)->Arg(64)->Arg(216);

void BM_ConvForward(benchmark::State& state) {
  auto model = scd::nn::build_model<float>(
      {scd::nn::LayerSpec::conv2d(8, 3), scd::nn::LayerSpec::relu(),
       scd::nn::LayerSpec::maxpool(2)},
      {1, 128, 32}, 7);
  int64_t batch = state.range(0);
  scd::Tensor<float> x({batch, 1, 128, 32});
  std::mt19937 gen(7);
  std::normal_distribution<float> v(0.0f, 1.0f);
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = v(gen);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(x));
}
BENCHMARK(BM_ConvForward)->Arg(1)->Arg(16);

scd::PopulationGraph cluster_graph(int per_cluster, uint64_t seed) {
  int64_t n = 2 * per_cluster;
  scd::PopulationGraph g;
  g.n = n;
  g.adjacency = scd::Tensor<double>({n, n});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j) {
      double w = ((i < per_cluster) == (j < per_cluster)) ? 0.9 : 0.02;
      g.adjacency[i * n + j] = w;
      g.adjacency[j * n + i] = w;
    }
  std::mt19937 gen(static_cast<unsigned>(seed));
  std::normal_distribution<float> noise(0.0f, 0.3f);
  g.features = scd::Tensor<float>({n, 4});
  std::vector<uint8_t> train(static_cast<size_t>(n)), test(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    float c = i < per_cluster ? 1.0f : -1.0f;
    for (int64_t j = 0; j < 4; ++j) g.features[i * 4 + j] = c + noise(gen);
    g.labels.push_back(i < per_cluster ? 0 : 1);
    g.sample_ids.push_back("n" + std::to_string(i));
    train[size_t(i)] = i % 2 == 0;
    test[size_t(i)] = i % 2 == 1;
  }
  g.set_masks(train, test);
  return g;
}

void BM_GcnPredict(benchmark::State& state) {
  scd::PopulationGraph g = cluster_graph(int(state.range(0)) / 2, 5);
  scd::GcnConfig cfg;
  cfg.epochs = 50;
  cfg.hidden = 16;
  cfg.dropout = 0.1;
  scd::GCNModel model = scd::train_gcn(g, cfg, 5);
  for (auto _ : state) benchmark::DoNotOptimize(scd::predict_gcn(model, g));
}
BENCHMARK(BM_GcnPredict)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
