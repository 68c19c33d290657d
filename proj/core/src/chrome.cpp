#include "scd/chrome.hpp"

#include <cmath>

#include "scd/losses.hpp"
#include "scd/optim.hpp"

namespace scd {

namespace {

constexpr int kConvWidths[7] = {8, 16, 32, 64, 64, 64, 64};
constexpr int kHiddenDense = 64;

Tensor<float> image_batch(const Dataset& ds, const std::vector<size_t>& idx, int h, int w) {
  Tensor<float> x({int64_t(idx.size()), 1, h, w});
  for (size_t b = 0; b < idx.size(); ++b) {
    const auto& img = ds.samples[idx[b]].image;
    if (img.height() != h || img.width() != w)
      throw ShapeError("sample '" + ds.samples[idx[b]].sample_id + "' is " +
                       std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                       ", expected " + std::to_string(h) + "x" + std::to_string(w));
    std::copy(img.pixels().begin(), img.pixels().end(), x.data() + int64_t(b) * h * w);
  }
  return x;
}

}  // namespace

std::vector<nn::LayerSpec> chrome_layer_specs(double dropout) {
  using nn::LayerSpec;
  std::vector<LayerSpec> specs;
  for (int i = 0; i < 7; ++i) {
    specs.push_back(LayerSpec::conv2d(kConvWidths[i], 3, 1));
    specs.push_back(LayerSpec::relu());
  }
  specs.push_back(LayerSpec::global_avg_pool());
  specs.push_back(LayerSpec::dropout(dropout));
  specs.push_back(LayerSpec::dense(kHiddenDense));
  specs.push_back(LayerSpec::relu());
  specs.push_back(LayerSpec::dropout(dropout));
  specs.push_back(LayerSpec::dense(2));
  specs.push_back(LayerSpec::relu());
  return specs;
}

ChromeNet make_chrome_net(int height, int width, double dropout, uint64_t seed) {
  if (height < 64 || width < 16) throw ConfigError("chrome net needs images of at least 64x16");
  // Interleave max-pools after the first conv blocks while both spatial dims
  // still permit halving, capped at five pools.
  std::vector<nn::LayerSpec> specs;
  auto base = chrome_layer_specs(dropout);
  int h = height, w = width, pools = 0;
  size_t i = 0;
  for (int conv = 0; conv < 7; ++conv) {
    specs.push_back(base[i++]);  // conv
    specs.push_back(base[i++]);  // relu
    if (pools < 5 && h >= 2 && w >= 2) {
      specs.push_back(nn::LayerSpec::maxpool(2));
      h /= 2;
      w /= 2;
      ++pools;
    }
  }
  for (; i < base.size(); ++i) specs.push_back(base[i]);
  ChromeNet net;
  net.model = nn::build_model<float>(specs, {1, height, width}, derive_seed(seed, 0x6368726fULL));
  net.height = height;
  net.width = width;
  net.dropout = dropout;
  return net;
}

ChromeNet train_chrome(const Dataset& ds, const ChromeConfig& cfg, uint64_t seed,
                       std::vector<double>* loss_trace) {
  if (ds.samples.size() < 2) throw DataError("chrome training needs at least 2 samples");
  for (const auto& s : ds.samples)
    if (!s.lab) throw DataError("sample '" + s.sample_id + "' lacks lab values");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.lr <= 0.0)
    throw ConfigError("chrome config: epochs/batch_size/lr must be positive");

  int h = ds.samples[0].image.height(), w = ds.samples[0].image.width();
  ChromeNet net = make_chrome_net(h, w, cfg.dropout, seed);

  size_t n = ds.samples.size();
  Tensor<float> targets({int64_t(n), 2});
  double mean_hypo = 0.0, mean_hyper = 0.0;
  for (size_t i = 0; i < n; ++i) {
    targets[int64_t(i) * 2] = ds.samples[i].lab->hypo_pct;
    targets[int64_t(i) * 2 + 1] = ds.samples[i].lab->hyper_pct;
    mean_hypo += ds.samples[i].lab->hypo_pct;
    mean_hyper += ds.samples[i].lab->hyper_pct;
  }
  // Start the head at the label means: with random features the initial
  // prediction is then the mean predictor, and 100 epochs at lr 5e-4 are
  // enough to move into the tens-of-percent target range.
  for (auto& p : net.model.params()) {
    if (p.name.find("dense") == 0 && p.name.ends_with(".b") && p.value->numel() == 2) {
      (*p.value)[0] = float(mean_hypo / double(n));
      (*p.value)[1] = float(mean_hyper / double(n));
    }
  }

  nn::Adam<float> opt(cfg.lr, cfg.amsgrad);
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  Tensor<float> all = image_batch(ds, order, h, w);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, 0x65706f63ULL, uint64_t(epoch)));
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < n; start += size_t(cfg.batch_size)) {
      size_t stop = std::min(n, start + size_t(cfg.batch_size));
      std::vector<size_t> batch(order.begin() + std::ptrdiff_t(start),
                                order.begin() + std::ptrdiff_t(stop));
      Tensor<float> x = image_batch(ds, batch, h, w);
      Tensor<float> y({int64_t(batch.size()), 2});
      for (size_t b = 0; b < batch.size(); ++b) {
        y[int64_t(b) * 2] = targets[int64_t(batch[b]) * 2];
        y[int64_t(b) * 2 + 1] = targets[int64_t(batch[b]) * 2 + 1];
      }
      Tensor<float> out =
          net.model.forward(x, true, derive_seed(seed, 0x73746570ULL, uint64_t(epoch), start));
      auto loss = nn::mse_loss(out, y);
      net.model.backward(loss.grad);
      opt.step(net.model.params());
    }
    if (loss_trace) {
      Tensor<float> out = net.model.infer(all);
      double acc = 0.0;
      for (int64_t i = 0; i < out.numel(); ++i) {
        double d = double(out[i]) - double(targets[i]);
        acc += d * d;
      }
      loss_trace->push_back(acc / double(out.numel()));
    }
  }
  net.trained = true;
  return net;
}

ChromeEstimate predict_chrome(const ChromeNet& net, const PercollImage& img) {
  if (!net.trained) throw UsageError("predict_chrome on an untrained net");
  if (img.height() != net.height || img.width() != net.width)
    throw ShapeError("image is " + std::to_string(img.height()) + "x" +
                     std::to_string(img.width()) + ", net expects " + std::to_string(net.height) +
                     "x" + std::to_string(net.width));
  Tensor<float> x({1, 1, net.height, net.width});
  std::copy(img.pixels().begin(), img.pixels().end(), x.data());
  Tensor<float> out = net.model.infer(x);
  return {out[0], out[1]};
}

ChromeEval evaluate_chrome(const ChromeNet& net, const Dataset& ds) {
  if (ds.samples.empty()) throw DataError("evaluate_chrome on an empty dataset");
  double se_hypo = 0.0, se_hyper = 0.0;
  for (const auto& s : ds.samples) {
    if (!s.lab) throw DataError("sample '" + s.sample_id + "' lacks lab values");
    ChromeEstimate est = predict_chrome(net, s.image);
    se_hypo += (double(est.hypo_pct) - double(s.lab->hypo_pct)) *
               (double(est.hypo_pct) - double(s.lab->hypo_pct));
    se_hyper += (double(est.hyper_pct) - double(s.lab->hyper_pct)) *
                (double(est.hyper_pct) - double(s.lab->hyper_pct));
  }
  double n = double(ds.samples.size());
  return {std::sqrt(se_hypo / n), std::sqrt(se_hyper / n)};
}

}  // namespace scd
