#include "scd/pipeline.hpp"

#include <algorithm>

#include "json.hpp"
#include "scd/checkpoint.hpp"

namespace scd {

using nlohmann::ordered_json;

void PipelineConfig::validate() const {
  gen.validate();
  terms.validate();
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (f_fft < 1) throw ConfigError("f_fft must be positive");
  if (target_features < 1) throw ConfigError("target_features must be positive");
  if (rfe_step <= 0.0 || rfe_step > 0.5) throw ConfigError("rfe_step must be in (0, 0.5]");
  if (ridge_alpha <= 0.0) throw ConfigError("ridge_alpha must be positive");
  if (num_folds < 2) throw ConfigError("num_folds must be at least 2");
  if (gcn.epochs < 1 || gcn.lr <= 0.0 || gcn.hidden < 1)
    throw ConfigError("gcn config: epochs/lr/hidden must be positive");
  if (gcn.dropout < 0.0 || gcn.dropout >= 1.0) throw ConfigError("gcn dropout must be in [0,1)");
}

namespace {

Tensor<float> raw_feature_matrix(const Dataset& ds, const FeatureCNN& cnn, int f_fft) {
  FeatureVector first = extract_raw(ds.samples[0].image, cnn, f_fft);
  int64_t d = int64_t(first.values.size());
  Tensor<float> x({int64_t(ds.samples.size()), d});
  std::copy(first.values.begin(), first.values.end(), x.data());
  for (size_t i = 1; i < ds.samples.size(); ++i) {
    FeatureVector fv = extract_raw(ds.samples[i].image, cnn, f_fft);
    std::copy(fv.values.begin(), fv.values.end(), x.data() + int64_t(i) * d);
  }
  return x;
}

Tensor<float> gather_columns(const Tensor<float>& x, const std::vector<int>& cols) {
  Tensor<float> out({x.dim(0), int64_t(cols.size())});
  for (int64_t i = 0; i < x.dim(0); ++i)
    for (size_t j = 0; j < cols.size(); ++j)
      out[i * int64_t(cols.size()) + int64_t(j)] = x[i * x.dim(1) + cols[j]];
  return out;
}

Tensor<float> standardize(const Tensor<float>& x, const FeatureScaler& sc) {
  Tensor<float> out = x;
  int64_t d = x.dim(1);
  for (int64_t i = 0; i < x.dim(0); ++i)
    for (int64_t j = 0; j < d; ++j)
      out[i * d + j] = (x[i * d + j] - sc.mean[size_t(j)]) / sc.stddev[size_t(j)];
  return out;
}

}  // namespace

TrainedPipeline train_pipeline(const Dataset& ds, const PipelineConfig& cfg, uint64_t seed) {
  cfg.validate();
  ds.validate();
  if (ds.samples.empty()) throw DataError("cannot train a pipeline on an empty dataset");
  for (const auto& s : ds.samples) {
    if (!s.lab) throw DataError("sample '" + s.sample_id + "' lacks lab values");
    if (!s.severity) throw DataError("sample '" + s.sample_id + "' lacks a severity label");
  }

  TrainedPipeline p;
  p.config = cfg;
  p.num_classes = ds.num_classes;
  p.chrome = train_chrome(ds, cfg.chrome, derive_seed(seed, 0x636872ULL));
  p.featcnn = train_feature_cnn(ds, cfg.feat, derive_seed(seed, 0x666574ULL));

  Tensor<float> raw = raw_feature_matrix(ds, p.featcnn, cfg.f_fft);
  std::vector<int> labels(ds.samples.size());
  for (size_t i = 0; i < ds.samples.size(); ++i) labels[i] = *ds.samples[i].severity;
  p.selection = rfe_select(raw, labels, ds.num_classes, cfg.target_features, cfg.rfe_step,
                           cfg.ridge_alpha);
  Tensor<float> reduced = gather_columns(raw, p.selection.surviving_indices);
  p.scaler = fit_scaler(reduced);
  Tensor<float> feats = standardize(reduced, p.scaler);

  p.graph = build_graph(ds.samples, feats, HSource::estimated(p.chrome), cfg.lambda, cfg.mode,
                        cfg.terms);
  p.gcn = train_gcn(p.graph, cfg.gcn, derive_seed(seed, 0x67636eULL));

  auto h = resolve_h(ds.samples, HSource::estimated(p.chrome));
  p.h_hat = h;
  for (const auto& s : ds.samples) p.spleens.push_back(s.spleen);
  return p;
}

PredictionRecord predict_sample(const TrainedPipeline& p, const PercollImage& img,
                                const SpleenDescriptor& spleen, const std::string& sample_id) {
  ChromeEstimate est = predict_chrome(p.chrome, img);
  FeatureVector raw = extract_raw(img, p.featcnn, p.config.f_fft);
  FeatureVector reduced = apply_selection(raw, p.selection, p.scaler);

  int64_t n = p.graph.n;
  int64_t d = p.graph.features.dim(1);
  PopulationGraph g;
  g.n = n + 1;
  g.features = Tensor<float>({n + 1, d});
  std::copy(p.graph.features.data(), p.graph.features.data() + n * d, g.features.data());
  std::copy(reduced.values.begin(), reduced.values.end(), g.features.data() + n * d);
  g.adjacency = Tensor<double>({n + 1, n + 1});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) g.adjacency[i * (n + 1) + j] = p.graph.adjacency[i * n + j];
  SimilarityInputs q{{est.hypo_pct, est.hyper_pct}, spleen};
  for (int64_t i = 0; i < n; ++i) {
    SimilarityInputs node{p.h_hat[size_t(i)], p.spleens[size_t(i)]};
    double w = similarity(node, q, p.config.lambda, p.config.mode, p.config.terms);
    g.adjacency[i * (n + 1) + n] = w;
    g.adjacency[n * (n + 1) + i] = w;
  }
  g.labels = p.graph.labels;
  g.labels.push_back(-1);
  g.sample_ids = p.graph.sample_ids;
  g.sample_ids.push_back(sample_id);

  GcnPrediction pred = predict_gcn(p.gcn, g);
  PredictionRecord rec;
  rec.sample_id = sample_id;
  rec.hypo_pct = est.hypo_pct;
  rec.hyper_pct = est.hyper_pct;
  rec.severity = pred.labels[size_t(n)];
  rec.probabilities.resize(size_t(p.num_classes));
  for (int c = 0; c < p.num_classes; ++c)
    rec.probabilities[size_t(c)] = pred.probabilities[n * p.num_classes + c];
  return rec;
}

namespace {

ordered_json config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["gen"] = {{"num_patients", c.gen.num_patients},
              {"samples_per_patient", c.gen.samples_per_patient},
              {"total_samples", c.gen.total_samples},
              {"num_classes", c.gen.num_classes},
              {"height", c.gen.height},
              {"width", c.gen.width},
              {"noise", c.gen.noise},
              {"w_hyper", c.gen.w_hyper},
              {"w_hypo", c.gen.w_hypo},
              {"w_spleen", c.gen.w_spleen}};
  j["chrome"] = {{"epochs", c.chrome.epochs},
                 {"lr", c.chrome.lr},
                 {"amsgrad", c.chrome.amsgrad},
                 {"batch_size", c.chrome.batch_size},
                 {"dropout", c.chrome.dropout}};
  j["feat"] = {{"epochs", c.feat.epochs},
               {"lr", c.feat.lr},
               {"batch_size", c.feat.batch_size},
               {"penultimate", c.feat.penultimate}};
  j["gcn"] = {{"epochs", c.gcn.epochs},
              {"lr", c.gcn.lr},
              {"hidden", c.gcn.hidden},
              {"dropout", c.gcn.dropout},
              {"cheb_order", c.gcn.cheb_order}};
  j["lambda"] = c.lambda;
  j["mode"] = to_string(c.mode);
  j["terms"] = {{"spleen", c.terms.spleen}, {"hypo", c.terms.hypo}, {"hyper", c.terms.hyper}};
  j["f_fft"] = c.f_fft;
  j["target_features"] = c.target_features;
  j["rfe_step"] = c.rfe_step;
  j["ridge_alpha"] = c.ridge_alpha;
  j["num_folds"] = c.num_folds;
  j["svm"] = {{"c", c.svm.c}, {"steps", c.svm.steps}};
  return j;
}

PipelineConfig config_from_json(const ordered_json& j) {
  PipelineConfig c;
  const auto& g = j.at("gen");
  c.gen.num_patients = g.at("num_patients");
  c.gen.samples_per_patient = g.at("samples_per_patient");
  c.gen.total_samples = g.at("total_samples");
  c.gen.num_classes = g.at("num_classes");
  c.gen.height = g.at("height");
  c.gen.width = g.at("width");
  c.gen.noise = g.at("noise");
  c.gen.w_hyper = g.at("w_hyper");
  c.gen.w_hypo = g.at("w_hypo");
  c.gen.w_spleen = g.at("w_spleen");
  const auto& ch = j.at("chrome");
  c.chrome.epochs = ch.at("epochs");
  c.chrome.lr = ch.at("lr");
  c.chrome.amsgrad = ch.at("amsgrad");
  c.chrome.batch_size = ch.at("batch_size");
  c.chrome.dropout = ch.at("dropout");
  const auto& fe = j.at("feat");
  c.feat.epochs = fe.at("epochs");
  c.feat.lr = fe.at("lr");
  c.feat.batch_size = fe.at("batch_size");
  c.feat.penultimate = fe.at("penultimate");
  const auto& gc = j.at("gcn");
  c.gcn.epochs = gc.at("epochs");
  c.gcn.lr = gc.at("lr");
  c.gcn.hidden = gc.at("hidden");
  c.gcn.dropout = gc.at("dropout");
  c.gcn.cheb_order = gc.at("cheb_order");
  c.lambda = j.at("lambda");
  c.mode = similarity_mode_from_string(j.at("mode").get<std::string>());
  c.terms.spleen = j.at("terms").at("spleen");
  c.terms.hypo = j.at("terms").at("hypo");
  c.terms.hyper = j.at("terms").at("hyper");
  c.f_fft = j.at("f_fft");
  c.target_features = j.at("target_features");
  c.rfe_step = j.at("rfe_step");
  c.ridge_alpha = j.at("ridge_alpha");
  c.num_folds = j.at("num_folds");
  c.svm.c = j.at("svm").at("c");
  c.svm.steps = j.at("svm").at("steps");
  return c;
}

Tensor<float> to_f32(const Tensor<double>& t) { return t.cast<float>(); }

}  // namespace

std::string config_json(const PipelineConfig& cfg) { return config_to_json(cfg).dump(2); }

void save_pipeline(const TrainedPipeline& p, const std::filesystem::path& path) {
  TensorStore store;
  ordered_json meta;
  meta["config"] = config_to_json(p.config);
  meta["num_classes"] = p.num_classes;
  meta["chrome"] = {{"height", p.chrome.height}, {"width", p.chrome.width},
                    {"dropout", p.chrome.dropout}};
  meta["featcnn"] = {{"height", p.featcnn.height},
                     {"width", p.featcnn.width},
                     {"penultimate", p.featcnn.penultimate},
                     {"num_classes", p.featcnn.num_classes}};
  meta["rfe_indices"] = p.selection.surviving_indices;
  meta["gcn"] = {{"in_dim", p.gcn.in_dim},
                 {"num_classes", p.gcn.num_classes},
                 {"num_basis", p.gcn.weights.empty() ? 0 : int(p.gcn.weights[0].size())}};
  meta["graph"] = {{"sample_ids", p.graph.sample_ids},
                   {"labels", p.graph.labels},
                   {"train_mask", p.graph.train_mask},
                   {"test_mask", p.graph.test_mask}};
  std::vector<std::string> spleen_strs;
  for (const auto& s : p.spleens) spleen_strs.push_back(s.str());
  meta["spleens"] = spleen_strs;
  store.meta = meta.dump();

  // mutable copies: store_params walks a non-const model
  TrainedPipeline& mp = const_cast<TrainedPipeline&>(p);
  store_params(store, "chrome.", mp.chrome.model);
  store_params(store, "featcnn.", mp.featcnn.model);
  store.put("scaler.mean", Tensor<float>({int64_t(p.scaler.mean.size())},
                                         std::vector<float>(p.scaler.mean)));
  store.put("scaler.std", Tensor<float>({int64_t(p.scaler.stddev.size())},
                                        std::vector<float>(p.scaler.stddev)));
  for (size_t l = 0; l < p.gcn.weights.size(); ++l) {
    for (size_t b = 0; b < p.gcn.weights[l].size(); ++b)
      store.put("gcn.gc" + std::to_string(l) + ".w" + std::to_string(b),
                to_f32(p.gcn.weights[l][b]));
    store.put("gcn.gc" + std::to_string(l) + ".b", to_f32(p.gcn.bias[l]));
  }
  store.put("graph.features", p.graph.features);
  Tensor<float> h({int64_t(p.h_hat.size()), 2});
  for (size_t i = 0; i < p.h_hat.size(); ++i) {
    h[int64_t(i) * 2] = p.h_hat[i][0];
    h[int64_t(i) * 2 + 1] = p.h_hat[i][1];
  }
  store.put("graph.h_hat", std::move(h));
  store.save(path);
}

TrainedPipeline load_pipeline(const std::filesystem::path& path) {
  TensorStore store = TensorStore::load(path);
  ordered_json meta;
  try {
    meta = ordered_json::parse(store.meta.empty() ? "{}" : store.meta);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint meta: " + e.what());
  }
  auto need = [&](const char* key) -> const ordered_json& {
    if (!meta.contains(key))
      throw DataError(path.string() + ": checkpoint is missing section '" + key + "'");
    return meta.at(key);
  };

  TrainedPipeline p;
  p.config = config_from_json(need("config"));
  p.num_classes = need("num_classes");

  const auto& cm = need("chrome");
  p.chrome = make_chrome_net(cm.at("height"), cm.at("width"), cm.at("dropout"), 0);
  load_params(store, "chrome.", p.chrome.model);
  p.chrome.trained = true;

  const auto& fm = need("featcnn");
  p.featcnn.height = fm.at("height");
  p.featcnn.width = fm.at("width");
  p.featcnn.penultimate = fm.at("penultimate");
  p.featcnn.num_classes = fm.at("num_classes");
  p.featcnn.model = nn::build_model<float>(
      feature_cnn_specs(p.featcnn.penultimate, p.featcnn.num_classes),
      {1, p.featcnn.height, p.featcnn.width}, 0);
  load_params(store, "featcnn.", p.featcnn.model);
  p.featcnn.trained = true;

  p.selection.surviving_indices = need("rfe_indices").get<std::vector<int>>();
  {
    const Tensor<float>& mean = store.get("scaler.mean");
    const Tensor<float>& sd = store.get("scaler.std");
    p.scaler.mean.assign(mean.data(), mean.data() + mean.numel());
    p.scaler.stddev.assign(sd.data(), sd.data() + sd.numel());
  }

  const auto& gm = need("gcn");
  p.gcn.config = p.config.gcn;
  p.gcn.in_dim = gm.at("in_dim");
  p.gcn.num_classes = gm.at("num_classes");
  int num_basis = gm.at("num_basis");
  int dims[4] = {p.gcn.in_dim, p.config.gcn.hidden, p.config.gcn.hidden, p.gcn.num_classes};
  for (int l = 0; l < 3; ++l) {
    std::vector<Tensor<double>> ws;
    for (int b = 0; b < num_basis; ++b) {
      const Tensor<float>& w =
          store.get("gcn.gc" + std::to_string(l) + ".w" + std::to_string(b));
      if (w.dim(0) != dims[l] || w.dim(1) != dims[l + 1])
        throw ShapeError("gcn weight gc" + std::to_string(l) + " has unexpected shape");
      ws.push_back(w.cast<double>());
    }
    p.gcn.weights.push_back(std::move(ws));
    p.gcn.bias.push_back(store.get("gcn.gc" + std::to_string(l) + ".b").cast<double>());
  }

  const auto& gr = need("graph");
  p.graph.sample_ids = gr.at("sample_ids").get<std::vector<std::string>>();
  p.graph.labels = gr.at("labels").get<std::vector<int>>();
  p.graph.train_mask = gr.at("train_mask").get<std::vector<uint8_t>>();
  p.graph.test_mask = gr.at("test_mask").get<std::vector<uint8_t>>();
  p.graph.features = store.get("graph.features");
  p.graph.n = p.graph.features.dim(0);

  const Tensor<float>& h = store.get("graph.h_hat");
  if (h.dim(0) != p.graph.n) throw DataError("checkpoint h_hat does not match node count");
  for (int64_t i = 0; i < h.dim(0); ++i) p.h_hat.push_back({h[i * 2], h[i * 2 + 1]});
  for (const auto& s : need("spleens").get<std::vector<std::string>>())
    p.spleens.push_back(SpleenDescriptor::parse(s));
  if (int64_t(p.spleens.size()) != p.graph.n)
    throw DataError("checkpoint spleen list does not match node count");

  // adjacency is derived data: rebuild from the stored kernel inputs
  p.graph.adjacency = Tensor<double>({p.graph.n, p.graph.n});
  for (int64_t i = 0; i < p.graph.n; ++i)
    for (int64_t j = i + 1; j < p.graph.n; ++j) {
      SimilarityInputs a{p.h_hat[size_t(i)], p.spleens[size_t(i)]};
      SimilarityInputs b{p.h_hat[size_t(j)], p.spleens[size_t(j)]};
      double w = similarity(a, b, p.config.lambda, p.config.mode, p.config.terms);
      p.graph.adjacency[i * p.graph.n + j] = w;
      p.graph.adjacency[j * p.graph.n + i] = w;
    }
  return p;
}

}  // namespace scd
