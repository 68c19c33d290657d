#include "scd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scd {

namespace {

// Descending-score order with ties left adjacent.
std::vector<size_t> rank_order(const std::vector<double>& scores) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return order;
}

void check_scores(const std::vector<double>& scores, const std::vector<uint8_t>& positive) {
  if (scores.size() != positive.size()) throw ShapeError("scores/labels length mismatch");
  for (double s : scores)
    if (!std::isfinite(s)) throw DataError("scores must be finite");
}

}  // namespace

std::optional<double> binary_auroc(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& positive) {
  check_scores(scores, positive);
  int64_t pos = 0, neg = 0;
  for (uint8_t p : positive) (p ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return std::nullopt;

  auto order = rank_order(scores);
  double area = 0.0;
  double tp = 0.0, fp = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    double tp_add = 0.0, fp_add = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? tp_add : fp_add) += 1.0;
      ++j;
    }
    // trapezoid over the tie block
    area += fp_add / double(neg) * (tp + tp_add / 2.0) / double(pos);
    tp += tp_add;
    fp += fp_add;
    i = j;
  }
  return area;
}

std::optional<double> binary_auprc(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& positive) {
  check_scores(scores, positive);
  int64_t pos = 0;
  for (uint8_t p : positive) pos += p ? 1 : 0;
  if (pos == 0) return std::nullopt;

  auto order = rank_order(scores);
  std::vector<double> recall, precision;
  double tp = 0.0, fp = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? tp : fp) += 1.0;
      ++j;
    }
    recall.push_back(tp / double(pos));
    precision.push_back(tp / (tp + fp));
    i = j;
  }
  // monotonize precision from the right, then step-integrate over recall
  for (size_t k = precision.size() - 1; k-- > 0;)
    precision[k] = std::max(precision[k], precision[k + 1]);
  double area = 0.0, prev_recall = 0.0;
  for (size_t k = 0; k < recall.size(); ++k) {
    area += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return area;
}

ClassificationMetrics compute_metrics(const std::vector<int>& y_true,
                                      const std::vector<int>& y_pred, int num_classes,
                                      const Tensor<double>* scores) {
  size_t n = y_true.size();
  if (y_pred.size() != n) throw ShapeError("y_true/y_pred length mismatch");
  if (n == 0) throw DataError("metrics on an empty evaluation set");
  if (num_classes < 2) throw ConfigError("metrics need at least 2 classes");
  for (size_t i = 0; i < n; ++i)
    if (y_true[i] < 0 || y_true[i] >= num_classes || y_pred[i] < 0 || y_pred[i] >= num_classes)
      throw DataError("label out of range in metrics input");
  if (scores && (scores->rank() != 2 || scores->dim(0) != int64_t(n) ||
                 scores->dim(1) != int64_t(num_classes)))
    throw ShapeError("scores must be [N,K]");

  ClassificationMetrics m;
  size_t correct = 0;
  for (size_t i = 0; i < n; ++i) correct += y_true[i] == y_pred[i] ? 1 : 0;
  m.accuracy = double(correct) / double(n);

  for (int c = 0; c < num_classes; ++c) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (size_t i = 0; i < n; ++i) {
      if (y_true[i] == c) {
        ++support;
        (y_pred[i] == c ? tp : fn) += 1;
      } else if (y_pred[i] == c) {
        ++fp;
      }
    }
    if (support == 0) continue;
    double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    double rec = tp / (tp + fn);
    double f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    m.weighted_f1 += support / double(n) * f1;
  }

  m.per_class_auprc.assign(size_t(num_classes), std::nullopt);
  if (scores) {
    double auroc_sum = 0.0;
    int auroc_count = 0;
    for (int c = 0; c < num_classes; ++c) {
      std::vector<double> s(n);
      std::vector<uint8_t> p(n);
      for (size_t i = 0; i < n; ++i) {
        s[i] = (*scores)[int64_t(i) * num_classes + c];
        p[i] = y_true[i] == c ? 1 : 0;
      }
      if (auto a = binary_auroc(s, p)) {
        auroc_sum += *a;
        ++auroc_count;
      }
      m.per_class_auprc[size_t(c)] = binary_auprc(s, p);
    }
    if (auroc_count > 0) m.auroc = auroc_sum / auroc_count;
  }
  return m;
}

}  // namespace scd
