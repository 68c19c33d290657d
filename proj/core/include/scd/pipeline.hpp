#pragma once

#include <filesystem>
#include <string>

#include "scd/chrome.hpp"
#include "scd/dataset.hpp"
#include "scd/features.hpp"
#include "scd/graph.hpp"
#include "scd/svm.hpp"

namespace scd {

// Everything the end-to-end severity predictor needs, with defaults pinned to
// the reference configuration: chrome 100 epochs @ 5e-4 (AMSGrad), GCN 300
// epochs @ 0.01 with 50 hidden filters and dropout 0.2, λ = 10, 1024 features
// cut to 50, 10 folds.
struct PipelineConfig {
  GeneratorConfig gen;
  ChromeConfig chrome;
  FeatureCnnConfig feat;
  GcnConfig gcn;
  double lambda = 10.0;
  SimilarityMode mode = SimilarityMode::Literal;
  SimilarityTerms terms;
  int f_fft = 512;
  int target_features = 50;
  double rfe_step = 0.1;
  double ridge_alpha = 1.0;
  int num_folds = 10;
  SvmConfig svm;

  void validate() const;
};

// Fitted end-to-end predictor plus the training population graph it performs
// transductive inference over.
struct TrainedPipeline {
  PipelineConfig config;
  ChromeNet chrome;
  FeatureCNN featcnn;
  RFESelection selection;
  FeatureScaler scaler;
  GCNModel gcn;
  PopulationGraph graph;                      // reduced features + adjacency
  std::vector<std::array<float, 2>> h_hat;    // kernel inputs per node
  std::vector<SpleenDescriptor> spleens;
  int num_classes = 0;
};

TrainedPipeline train_pipeline(const Dataset& ds, const PipelineConfig& cfg, uint64_t seed);

void save_pipeline(const TrainedPipeline& p, const std::filesystem::path& path);
TrainedPipeline load_pipeline(const std::filesystem::path& path);

// Resolved configuration as a JSON object string with a stable field order,
// for run manifests and checkpoint metadata.
std::string config_json(const PipelineConfig& cfg);

struct PredictionRecord {
  std::string sample_id;
  float hypo_pct = 0.0f;
  float hyper_pct = 0.0f;
  int severity = 0;
  std::vector<double> probabilities;
};

// Attaches the query as node n of the stored graph (kernel edges from its
// chrome estimate and spleen) and reads off that node's GCN output.
PredictionRecord predict_sample(const TrainedPipeline& p, const PercollImage& img,
                                const SpleenDescriptor& spleen, const std::string& sample_id);

}  // namespace scd
