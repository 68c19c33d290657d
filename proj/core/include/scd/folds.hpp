#pragma once

#include <map>
#include <string>
#include <vector>

#include "scd/dataset.hpp"

namespace scd {

// Patient-wise stratified folds: all samples of a patient share a fold, and
// the greedy assignment keeps fold class mixtures close to the global one.
struct FoldPlan {
  int num_folds = 10;
  std::map<std::string, int> assignments;  // patient_id → fold

  int fold_of(const std::string& patient_id) const;
};

// Deterministic greedy stratification: patients sorted by (majority class,
// sample count descending), each assigned to the currently least-filled fold;
// remaining ties follow a seed-derived fold preference order.
FoldPlan make_folds(const Dataset& ds, int k, uint64_t seed);

// Sample indices of the fold's test split / its complement.
std::vector<size_t> test_indices(const Dataset& ds, const FoldPlan& plan, int fold);
std::vector<size_t> train_indices(const Dataset& ds, const FoldPlan& plan, int fold);

}  // namespace scd
