#include "scd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "scd/chrome.hpp"
#include "scd/features.hpp"
#include "scd/svm.hpp"

namespace scd {

uint64_t hash_id_set(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& id : ids) {
    h = fnv1a64(id, h);
    h = fnv1a64("\x1f", 1, h);  // separator so {"ab","c"} != {"a","bc"}
  }
  return h;
}

const char* to_string(MethodVariant v) {
  switch (v) {
    case MethodVariant::SVM: return "SVM";
    case MethodVariant::SVM_Lab: return "SVM_Lab";
    case MethodVariant::GCN_Rand: return "GCN_Rand";
    case MethodVariant::SCD_severity_GCN: return "SCD_severity_GCN";
    case MethodVariant::GCN_Lab: return "GCN_Lab";
  }
  return "?";
}

MethodVariant method_variant_from_string(const std::string& s) {
  for (MethodVariant v : all_method_variants())
    if (s == to_string(v)) return v;
  throw UsageError("unknown method variant '" + s + "'");
}

std::vector<MethodVariant> all_method_variants() {
  return {MethodVariant::SVM, MethodVariant::SVM_Lab, MethodVariant::GCN_Rand,
          MethodVariant::SCD_severity_GCN, MethodVariant::GCN_Lab};
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  out.count = int(xs.size());
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / double(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(ss / double(xs.size() - 1));
  }
  return out;
}

MeanStd summarize(const BenchRow& row, const std::string& metric) {
  std::vector<double> xs;
  for (const auto& f : row.folds) {
    if (metric == "accuracy") {
      xs.push_back(f.metrics.accuracy);
    } else if (metric == "weighted_f1") {
      xs.push_back(f.metrics.weighted_f1);
    } else if (metric == "auroc") {
      if (f.metrics.auroc) xs.push_back(*f.metrics.auroc);
    } else {
      throw UsageError("summarize: unknown metric '" + metric + "'");
    }
  }
  return mean_std(xs);
}

std::vector<SimilarityTerms> default_ablation_sets() {
  return {{true, false, false}, {true, true, false}, {true, false, true},
          {false, true, true}, {true, true, true}};
}

namespace {

// Rethrows component errors with the (variant, fold) context the report
// consumer needs to localize a failure. Preserves the error category.
template <typename Fn>
auto with_context(const std::string& variant, int fold, Fn&& fn) -> decltype(fn()) {
  auto tag = [&](const char* msg) {
    std::string where = variant.empty() ? "" : variant + ", ";
    return std::string(msg) + " (" + where + "fold " + std::to_string(fold) + ")";
  };
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw ShapeError(tag(e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e.what()));
  } catch (const UsageError& e) {
    throw UsageError(tag(e.what()));
  } catch (const DataError& e) {
    throw DataError(tag(e.what()));
  } catch (const IoError& e) {
    throw IoError(tag(e.what()));
  }
}

// Fold jobs are independent: each one derives its own seeds and writes only
// its own output slot, so scheduling cannot change the aggregate.
void run_fold_jobs(int k, const std::function<void(int)>& job) {
  unsigned hw = std::thread::hardware_concurrency();
  int workers = std::min(k, int(hw ? hw : 1));
  if (workers <= 1) {
    for (int f = 0; f < k; ++f) job(f);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (;;) {
      int f = next.fetch_add(1);
      if (f >= k) return;
      try {
        job(f);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(size_t(workers));
  for (int i = 0; i < workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (err) std::rethrow_exception(err);
}

Dataset subset_dataset(const Dataset& ds, const std::vector<size_t>& idx) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.provenance = ds.provenance;
  out.samples.reserve(idx.size());
  for (size_t i : idx) out.samples.push_back(ds.samples[i]);
  return out;
}

// Everything fitted on one fold's train split, shared across variants/modes.
struct FoldStages {
  std::vector<size_t> train_idx, test_idx;
  uint64_t train_hash = 0;
  ChromeNet chrome;
  ChromeFoldEval chrome_eval;
  Tensor<float> feats;  // all rows, RFE-reduced and train-standardized
  std::vector<int> y_all;
  std::vector<int> y_test;
  std::vector<FitRecord> fits;
};

FoldStages fit_fold_stages(const Dataset& ds, const FoldPlan& plan, int fold,
                           const PipelineConfig& cfg, uint64_t master_seed) {
  FoldStages st;
  st.train_idx = train_indices(ds, plan, fold);
  st.test_idx = test_indices(ds, plan, fold);
  Dataset train_ds = subset_dataset(ds, st.train_idx);
  {
    std::vector<std::string> ids;
    for (const auto& s : train_ds.samples) ids.push_back(s.sample_id);
    st.train_hash = hash_id_set(std::move(ids));
  }
  auto fitted = [&](const char* stage) { st.fits.push_back({stage, fold, st.train_hash}); };

  st.chrome = train_chrome(train_ds, cfg.chrome, derive_seed(master_seed, 0x6368726dULL, fold));
  fitted("chrome");
  ChromeEval ce = evaluate_chrome(st.chrome, subset_dataset(ds, st.test_idx));
  st.chrome_eval = {fold, ce.rmse_hypo, ce.rmse_hyper};

  FeatureCNN featcnn =
      train_feature_cnn(train_ds, cfg.feat, derive_seed(master_seed, 0x66656174ULL, fold));
  fitted("featcnn");

  int64_t n = int64_t(ds.samples.size());
  FeatureVector probe = extract_raw(ds.samples[0].image, featcnn, cfg.f_fft);
  int64_t d = int64_t(probe.values.size());
  Tensor<float> raw({n, d});
  std::copy(probe.values.begin(), probe.values.end(), raw.data());
  for (int64_t i = 1; i < n; ++i) {
    FeatureVector fv = extract_raw(ds.samples[size_t(i)].image, featcnn, cfg.f_fft);
    std::copy(fv.values.begin(), fv.values.end(), raw.data() + i * d);
  }

  Tensor<float> raw_train({int64_t(st.train_idx.size()), d});
  std::vector<int> y_train;
  for (size_t r = 0; r < st.train_idx.size(); ++r) {
    std::copy(raw.data() + int64_t(st.train_idx[r]) * d,
              raw.data() + int64_t(st.train_idx[r] + 1) * d,
              raw_train.data() + int64_t(r) * d);
    y_train.push_back(*ds.samples[st.train_idx[r]].severity);
  }
  RFESelection sel = rfe_select(raw_train, y_train, ds.num_classes, cfg.target_features,
                                cfg.rfe_step, cfg.ridge_alpha);
  fitted("rfe");

  int64_t kept = int64_t(sel.surviving_indices.size());
  Tensor<float> red_train({int64_t(st.train_idx.size()), kept});
  for (size_t r = 0; r < st.train_idx.size(); ++r)
    for (int64_t j = 0; j < kept; ++j)
      red_train[int64_t(r) * kept + j] =
          raw[int64_t(st.train_idx[r]) * d + sel.surviving_indices[size_t(j)]];
  FeatureScaler scaler = fit_scaler(red_train);
  fitted("scaler");

  st.feats = Tensor<float>({n, kept});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < kept; ++j)
      st.feats[i * kept + j] =
          (raw[i * d + sel.surviving_indices[size_t(j)]] - scaler.mean[size_t(j)]) /
          scaler.stddev[size_t(j)];

  for (const auto& s : ds.samples) st.y_all.push_back(*s.severity);
  for (size_t i : st.test_idx) st.y_test.push_back(*ds.samples[i].severity);
  return st;
}

Tensor<float> gather_rows(const Tensor<float>& x, const std::vector<size_t>& rows) {
  int64_t d = x.dim(1);
  Tensor<float> out({int64_t(rows.size()), d});
  for (size_t r = 0; r < rows.size(); ++r)
    std::copy(x.data() + int64_t(rows[r]) * d, x.data() + int64_t(rows[r] + 1) * d,
              out.data() + int64_t(r) * d);
  return out;
}

ClassificationMetrics eval_svm(const Dataset& ds, const FoldStages& st, const Tensor<float>& x,
                               const PipelineConfig& cfg, uint64_t seed) {
  Tensor<float> x_train = gather_rows(x, st.train_idx);
  std::vector<int> y_train;
  for (size_t i : st.train_idx) y_train.push_back(*ds.samples[i].severity);
  SvmModel svm = linear_svm_fit(x_train, y_train, ds.num_classes, cfg.svm, seed);
  std::vector<int> y_pred;
  for (size_t i : st.test_idx) y_pred.push_back(svm.predict(x.data() + int64_t(i) * x.dim(1)));
  // hinge scores are not calibrated, so the ranking metrics stay absent
  return compute_metrics(st.y_test, y_pred, ds.num_classes, nullptr);
}

// reduced features ⊕ [hypo, hyper, spleen cm (Removed → −1)], the extra
// columns standardized with train-fold statistics.
Tensor<float> lab_augmented(const Dataset& ds, const FoldStages& st) {
  int64_t n = st.feats.dim(0), d = st.feats.dim(1);
  Tensor<float> extra({n, 3});
  for (int64_t i = 0; i < n; ++i) {
    const Sample& s = ds.samples[size_t(i)];
    extra[i * 3 + 0] = s.lab->hypo_pct;
    extra[i * 3 + 1] = s.lab->hyper_pct;
    extra[i * 3 + 2] = s.spleen.cm_or(-1.0f);
  }
  FeatureScaler sc = fit_scaler(gather_rows(extra, st.train_idx));
  Tensor<float> out({n, d + 3});
  for (int64_t i = 0; i < n; ++i) {
    std::copy(st.feats.data() + i * d, st.feats.data() + (i + 1) * d, out.data() + i * (d + 3));
    for (int64_t j = 0; j < 3; ++j)
      out[i * (d + 3) + d + j] = (extra[i * 3 + j] - sc.mean[size_t(j)]) / sc.stddev[size_t(j)];
  }
  return out;
}

ClassificationMetrics eval_gcn(const Dataset& ds, const FoldStages& st, const HSource& source,
                               SimilarityMode mode, const SimilarityTerms& terms,
                               const PipelineConfig& cfg, uint64_t seed) {
  PopulationGraph g =
      build_graph(ds.samples, st.feats, source, cfg.lambda, mode, terms);
  std::vector<uint8_t> train_mask(ds.samples.size(), 0), test_mask(ds.samples.size(), 0);
  for (size_t i : st.train_idx) train_mask[i] = 1;
  for (size_t i : st.test_idx) test_mask[i] = 1;
  g.set_masks(train_mask, test_mask);

  GCNModel model = train_gcn(g, cfg.gcn, seed);
  GcnPrediction pred = predict_gcn(model, g);
  std::vector<int> y_pred;
  Tensor<double> scores({int64_t(st.test_idx.size()), int64_t(ds.num_classes)});
  for (size_t r = 0; r < st.test_idx.size(); ++r) {
    int64_t i = int64_t(st.test_idx[r]);
    y_pred.push_back(pred.labels[size_t(i)]);
    for (int c = 0; c < ds.num_classes; ++c)
      scores[int64_t(r) * ds.num_classes + c] = pred.probabilities[i * ds.num_classes + c];
  }
  return compute_metrics(st.y_test, y_pred, ds.num_classes, &scores);
}

void check_bench_inputs(const Dataset& ds, const PipelineConfig& cfg) {
  cfg.validate();
  ds.validate();
  if (ds.samples.empty()) throw DataError("benchmark needs a non-empty dataset");
  for (const auto& s : ds.samples) {
    if (!s.severity) throw DataError("sample '" + s.sample_id + "' lacks a severity label");
    if (!s.lab) throw DataError("sample '" + s.sample_id + "' lacks lab values");
  }
}

}  // namespace

std::vector<BenchReport> run_benchmark(const Dataset& ds,
                                       const std::vector<MethodVariant>& variants,
                                       const std::vector<SimilarityMode>& modes,
                                       const PipelineConfig& cfg, uint64_t master_seed) {
  check_bench_inputs(ds, cfg);
  if (variants.empty()) throw ConfigError("benchmark needs at least one method variant");
  if (modes.empty()) throw ConfigError("benchmark needs at least one similarity mode");
  FoldPlan plan = make_folds(ds, cfg.num_folds, derive_seed(master_seed, 0x666f6c64ULL));

  struct FoldOut {
    // [mode][variant]
    std::vector<std::vector<ClassificationMetrics>> metrics;
    ChromeFoldEval chrome_eval;
    std::vector<FitRecord> fits;
  };
  std::vector<FoldOut> outs(size_t(cfg.num_folds));

  run_fold_jobs(cfg.num_folds, [&](int fold) {
    FoldStages st = with_context("", fold, [&] {
      return fit_fold_stages(ds, plan, fold, cfg, master_seed);
    });
    FoldOut& out = outs[size_t(fold)];
    out.chrome_eval = st.chrome_eval;
    out.fits = st.fits;
    out.metrics.assign(modes.size(), std::vector<ClassificationMetrics>(variants.size()));

    // mode-independent variants, evaluated once and copied into every report
    std::vector<ClassificationMetrics> fixed(variants.size());
    std::vector<bool> is_fixed(variants.size(), false);
    for (size_t v = 0; v < variants.size(); ++v) {
      if (variants[v] == MethodVariant::SVM) {
        fixed[v] = with_context("SVM", fold, [&] {
          return eval_svm(ds, st, st.feats, cfg, derive_seed(master_seed, 0x73766dULL, fold));
        });
        out.fits.push_back({"svm", fold, st.train_hash});
        is_fixed[v] = true;
      } else if (variants[v] == MethodVariant::SVM_Lab) {
        fixed[v] = with_context("SVM_Lab", fold, [&] {
          return eval_svm(ds, st, lab_augmented(ds, st), cfg,
                          derive_seed(master_seed, 0x73766d6cULL, fold));
        });
        out.fits.push_back({"svm_lab", fold, st.train_hash});
        is_fixed[v] = true;
      }
    }

    for (size_t m = 0; m < modes.size(); ++m) {
      for (size_t v = 0; v < variants.size(); ++v) {
        if (is_fixed[v]) {
          out.metrics[m][v] = fixed[v];
          continue;
        }
        HSource source = HSource::groundtruth();
        const char* stage = "gcn_lab";
        if (variants[v] == MethodVariant::SCD_severity_GCN) {
          source = HSource::estimated(st.chrome);
          stage = "gcn_estimated";
        } else if (variants[v] == MethodVariant::GCN_Rand) {
          source = HSource::randomized(derive_seed(master_seed, 0x68726e64ULL, fold));
          stage = "gcn_rand";
        }
        uint64_t seed = derive_seed(master_seed, 0x67636e76ULL, fold, int(v));
        out.metrics[m][v] = with_context(to_string(variants[v]), fold, [&] {
          return eval_gcn(ds, st, source, modes[m], cfg.terms, cfg, seed);
        });
        out.fits.push_back({stage, fold, st.train_hash});
      }
    }
  });

  std::vector<BenchReport> reports;
  for (size_t m = 0; m < modes.size(); ++m) {
    BenchReport rep;
    rep.tag = to_string(modes[m]);
    rep.num_classes = ds.num_classes;
    for (size_t v = 0; v < variants.size(); ++v) {
      BenchRow row;
      row.name = to_string(variants[v]);
      for (int f = 0; f < cfg.num_folds; ++f)
        row.folds.push_back({f, outs[size_t(f)].metrics[m][v]});
      rep.rows.push_back(std::move(row));
    }
    for (int f = 0; f < cfg.num_folds; ++f) {
      rep.chrome_evals.push_back(outs[size_t(f)].chrome_eval);
      for (const auto& fit : outs[size_t(f)].fits) rep.fits.push_back(fit);
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

BenchReport run_ablation(const Dataset& ds, const std::vector<SimilarityTerms>& subsets,
                         const PipelineConfig& cfg, uint64_t master_seed) {
  check_bench_inputs(ds, cfg);
  if (subsets.empty()) throw ConfigError("ablation needs at least one term subset");
  for (const auto& t : subsets) t.validate();
  FoldPlan plan = make_folds(ds, cfg.num_folds, derive_seed(master_seed, 0x666f6c64ULL));

  struct FoldOut {
    std::vector<ClassificationMetrics> metrics;  // per subset
    ChromeFoldEval chrome_eval;
    std::vector<FitRecord> fits;
  };
  std::vector<FoldOut> outs(size_t(cfg.num_folds));

  run_fold_jobs(cfg.num_folds, [&](int fold) {
    FoldStages st = with_context("", fold, [&] {
      return fit_fold_stages(ds, plan, fold, cfg, master_seed);
    });
    FoldOut& out = outs[size_t(fold)];
    out.chrome_eval = st.chrome_eval;
    out.fits = st.fits;
    for (size_t s = 0; s < subsets.size(); ++s) {
      uint64_t seed = derive_seed(master_seed, 0x61626c74ULL, fold, int(s));
      out.metrics.push_back(with_context(subsets[s].str(), fold, [&] {
        return eval_gcn(ds, st, HSource::estimated(st.chrome), cfg.mode, subsets[s], cfg, seed);
      }));
      out.fits.push_back({"gcn_" + subsets[s].str(), fold, st.train_hash});
    }
  });

  BenchReport rep;
  rep.tag = "ablation";
  rep.num_classes = ds.num_classes;
  for (size_t s = 0; s < subsets.size(); ++s) {
    BenchRow row;
    row.name = subsets[s].str();
    for (int f = 0; f < cfg.num_folds; ++f)
      row.folds.push_back({f, outs[size_t(f)].metrics[s]});
    rep.rows.push_back(std::move(row));
  }
  for (int f = 0; f < cfg.num_folds; ++f) {
    rep.chrome_evals.push_back(outs[size_t(f)].chrome_eval);
    for (const auto& fit : outs[size_t(f)].fits) rep.fits.push_back(fit);
  }
  return rep;
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// per-class AUPRC means/stds; count 0 where a class never had support
std::vector<MeanStd> auprc_summary(const BenchRow& row, int num_classes) {
  std::vector<MeanStd> out;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<double> xs;
    for (const auto& f : row.folds)
      if (f.metrics.per_class_auprc[size_t(c)]) xs.push_back(*f.metrics.per_class_auprc[size_t(c)]);
    out.push_back(mean_std(xs));
  }
  return out;
}

}  // namespace

void write_report_csv(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "variant,fold,metric,value\n";
  for (const auto& row : report.rows) {
    for (const auto& f : row.folds) {
      out << row.name << ',' << f.fold << ",accuracy," << fmt6(f.metrics.accuracy) << '\n';
      out << row.name << ',' << f.fold << ",weighted_f1," << fmt6(f.metrics.weighted_f1) << '\n';
      if (f.metrics.auroc)
        out << row.name << ',' << f.fold << ",auroc," << fmt6(*f.metrics.auroc) << '\n';
      for (size_t c = 0; c < f.metrics.per_class_auprc.size(); ++c)
        if (f.metrics.per_class_auprc[c])
          out << row.name << ',' << f.fold << ",auprc_class_" << c << ','
              << fmt6(*f.metrics.per_class_auprc[c]) << '\n';
    }
  }
  for (const auto& ce : report.chrome_evals) {
    out << "ChromeNet," << ce.fold << ",rmse_hypo," << fmt6(ce.rmse_hypo) << '\n';
    out << "ChromeNet," << ce.fold << ",rmse_hyper," << fmt6(ce.rmse_hyper) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_summary_csv(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "variant,metric,mean,std\n";
  auto line = [&](const std::string& name, const std::string& metric, const MeanStd& ms) {
    out << name << ',' << metric << ',';
    if (ms.count > 0) out << fmt6(ms.mean) << ',' << fmt6(ms.stddev);
    else out << ',';
    out << '\n';
  };
  for (const auto& row : report.rows) {
    line(row.name, "accuracy", summarize(row, "accuracy"));
    line(row.name, "weighted_f1", summarize(row, "weighted_f1"));
    line(row.name, "auroc", summarize(row, "auroc"));
    auto per_class = auprc_summary(row, report.num_classes);
    for (int c = 0; c < report.num_classes; ++c)
      line(row.name, "auprc_class_" + std::to_string(c), per_class[size_t(c)]);
  }
  std::vector<double> hypo, hyper;
  for (const auto& ce : report.chrome_evals) {
    hypo.push_back(ce.rmse_hypo);
    hyper.push_back(ce.rmse_hyper);
  }
  if (!hypo.empty()) {
    line("ChromeNet", "rmse_hypo", mean_std(hypo));
    line("ChromeNet", "rmse_hyper", mean_std(hyper));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_auprc_csv(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "variant,class,mean,std\n";
  for (const auto& row : report.rows) {
    auto per_class = auprc_summary(row, report.num_classes);
    for (int c = 0; c < report.num_classes; ++c) {
      out << row.name << ',' << c << ',';
      if (per_class[size_t(c)].count > 0)
        out << fmt6(per_class[size_t(c)].mean) << ',' << fmt6(per_class[size_t(c)].stddev);
      else
        out << ',';
      out << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace scd
