#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "scd/chrome.hpp"
#include "scd/dataset.hpp"
#include "scd/tensor.hpp"

namespace scd {

// Population graph: one node per sample, edge weights from the similarity
// kernel  E(a,b) = exp(-(‖Ĥ_a − Ĥ_b‖ + λ·[spleen bracket])).
//
// Literal mode applies the bracket on spleen equality exactly as the formula
// is printed, which penalizes equal spleens; Corrected flips it to apply the
// penalty on inequality so that similar patients connect strongly. Both are
// first-class and the bench reports both.

enum class SimilarityMode { Literal, Corrected };

inline const char* to_string(SimilarityMode m) {
  return m == SimilarityMode::Literal ? "literal" : "corrected";
}
SimilarityMode similarity_mode_from_string(const std::string& s);

struct SimilarityInputs {
  std::array<float, 2> h_hat{0.0f, 0.0f};  // (hypo_pct, hyper_pct)
  SpleenDescriptor spleen;
};

// Ablation subsets: which measurements enter the kernel. Omitted continuous
// terms leave the norm; omitting spleen removes the bracket term entirely.
struct SimilarityTerms {
  bool spleen = true;
  bool hypo = true;
  bool hyper = true;

  void validate() const {
    if (!spleen && !hypo && !hyper) throw ConfigError("similarity needs at least one term");
  }
  std::string str() const;
};

double similarity(const SimilarityInputs& a, const SimilarityInputs& b, double lambda,
                  SimilarityMode mode, const SimilarityTerms& terms = {});

struct PopulationGraph {
  int64_t n = 0;
  Tensor<double> adjacency;  // n×n, symmetric, zero diagonal
  Tensor<float> features;    // n×d node features
  std::vector<int> labels;   // -1 where unknown
  std::vector<uint8_t> train_mask, test_mask;
  std::vector<std::string> sample_ids;

  void set_masks(const std::vector<uint8_t>& train, const std::vector<uint8_t>& test);
};

struct HSource {
  enum class Kind { Estimated, Groundtruth, Randomized };
  Kind kind = Kind::Groundtruth;
  const ChromeNet* chrome = nullptr;  // Estimated
  uint64_t seed = 0;                  // Randomized

  static HSource estimated(const ChromeNet& net) { return {Kind::Estimated, &net, 0}; }
  static HSource groundtruth() { return {Kind::Groundtruth, nullptr, 0}; }
  static HSource randomized(uint64_t seed) { return {Kind::Randomized, nullptr, seed}; }
};

// The Ĥ vectors actually used for graph edges, per h_source.
std::vector<std::array<float, 2>> resolve_h(const std::vector<Sample>& samples,
                                            const HSource& source);

PopulationGraph build_graph(const std::vector<Sample>& samples, const Tensor<float>& features,
                            const HSource& source, double lambda, SimilarityMode mode,
                            const SimilarityTerms& terms = {});

// First-order renormalization Â = D̃^{-1/2} (A + I) D̃^{-1/2}.
Tensor<double> normalize_propagation(const Tensor<double>& adj);

struct GcnConfig {
  int epochs = 300;
  double lr = 0.01;
  int hidden = 50;
  double dropout = 0.2;
  int cheb_order = 1;  // 1 = renormalization trick; q>1 = Chebyshev basis T_0..T_q
};

// Two hidden spectral graph-convolution layers (ReLU, dropout between), then
// a graph convolution to K logits. Internally double precision.
struct GCNModel {
  GcnConfig config;
  int in_dim = 0, num_classes = 0;
  // weights[l][b]: in×out for basis matrix b of layer l; bias[l]: out
  std::vector<std::vector<Tensor<double>>> weights;
  std::vector<Tensor<double>> bias;
  std::vector<Tensor<double>> basis;  // propagation matrices, cached from training graph
};

GCNModel train_gcn(const PopulationGraph& graph, const GcnConfig& cfg, uint64_t seed,
                   std::vector<double>* loss_trace = nullptr);

struct GcnPrediction {
  Tensor<double> probabilities;  // n×K, rows sum to 1
  std::vector<int> labels;       // argmax
};

// Dropout-off forward on the given graph (recomputes the propagation basis,
// so a query node may be attached to the stored training graph).
GcnPrediction predict_gcn(const GCNModel& model, const PopulationGraph& graph);

// Edge list (`src,dst,weight`, upper triangle) and node table
// (`sample_id,label,mask`) for external inspection.
void export_graph(const PopulationGraph& graph, const std::filesystem::path& edges_csv,
                  const std::filesystem::path& nodes_csv);

}  // namespace scd
