#pragma once

#include <optional>
#include <vector>

#include "scd/tensor.hpp"

namespace scd {

// Binary ranking metrics on raw scores (any finite values, higher = more
// positive). AUROC is the trapezoidal area under the tie-grouped ROC curve —
// identical to pair counting with ties worth 1/2. AUPRC is the step-
// interpolated area with precision monotonized from the right.
// Both are undefined (nullopt) when a class is missing from y_true.
std::optional<double> binary_auroc(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& positive);
std::optional<double> binary_auprc(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& positive);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::optional<double> auroc;                         // macro one-vs-rest
  std::vector<std::optional<double>> per_class_auprc;  // K entries
};

// scores may be null (no ranking metrics then); otherwise [N,K], one row of
// class scores per sample. Classes with zero support are excluded from the
// macro AUROC and reported absent in per_class_auprc.
ClassificationMetrics compute_metrics(const std::vector<int>& y_true,
                                      const std::vector<int>& y_pred, int num_classes,
                                      const Tensor<double>* scores = nullptr);

}  // namespace scd
