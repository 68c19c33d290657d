#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scd/dataset.hpp"
#include "scd/folds.hpp"
#include "scd/graph.hpp"
#include "scd/metrics.hpp"
#include "scd/pipeline.hpp"

namespace scd {

// The five method-comparison rows.
enum class MethodVariant { SVM, SVM_Lab, GCN_Rand, SCD_severity_GCN, GCN_Lab };

const char* to_string(MethodVariant v);
MethodVariant method_variant_from_string(const std::string& s);
std::vector<MethodVariant> all_method_variants();

// Provenance of every fitted statistic: per (stage, fold), the hash of the
// sample ids the fit saw. Tests assert these all equal the train-split hash,
// which rules out train/test leakage by construction.
struct FitRecord {
  std::string stage;
  int fold = 0;
  uint64_t train_hash = 0;
};

// Order-independent hash of a sample-id set, the value FitRecord carries.
uint64_t hash_id_set(std::vector<std::string> ids);

struct FoldOutcome {
  int fold = 0;
  ClassificationMetrics metrics;
};

struct BenchRow {
  std::string name;  // variant name, or term subset for ablations
  std::vector<FoldOutcome> folds;
};

// Per-fold regressor error on the held-out split; reported next to the
// classification rows so one CSV carries the whole evaluation.
struct ChromeFoldEval {
  int fold = 0;
  double rmse_hypo = 0.0;
  double rmse_hyper = 0.0;
};

struct BenchReport {
  std::string tag;  // similarity mode for benchmarks, "ablation" otherwise
  int num_classes = 0;
  std::vector<BenchRow> rows;
  std::vector<ChromeFoldEval> chrome_evals;
  std::vector<FitRecord> fits;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample std; 0 when count < 2
  int count = 0;
};

MeanStd mean_std(const std::vector<double>& xs);

// metric ∈ {"accuracy", "weighted_f1", "auroc"}; folds where the metric is
// absent are skipped.
MeanStd summarize(const BenchRow& row, const std::string& metric);

// Patient-wise cross-validated comparison. Every per-fold stage (ChromeNet,
// feature CNN, RFE, scaler) is fitted once on the train split and shared by
// all variants and similarity modes; one report per requested mode.
std::vector<BenchReport> run_benchmark(const Dataset& ds,
                                       const std::vector<MethodVariant>& variants,
                                       const std::vector<SimilarityMode>& modes,
                                       const PipelineConfig& cfg, uint64_t master_seed);

// Similarity-term ablation: one row per subset, estimated haematology inputs,
// cfg.mode kernel. Subsets must be non-empty.
BenchReport run_ablation(const Dataset& ds, const std::vector<SimilarityTerms>& subsets,
                         const PipelineConfig& cfg, uint64_t master_seed);

// spleen; spleen+hypo; spleen+hyper; hypo+hyper; spleen+hypo+hyper
std::vector<SimilarityTerms> default_ablation_sets();

// `variant,fold,metric,value` — absent metrics are omitted.
void write_report_csv(const BenchReport& report, const std::filesystem::path& path);
// `variant,metric,mean,std` — absent aggregates keep the row, empty fields.
void write_summary_csv(const BenchReport& report, const std::filesystem::path& path);
// `variant,class,mean,std` for the per-class precision-recall areas.
void write_auprc_csv(const BenchReport& report, const std::filesystem::path& path);

}  // namespace scd
