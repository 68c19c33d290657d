#include "scd/folds.hpp"

#include <algorithm>
#include <numeric>

#include "scd/rng.hpp"

namespace scd {

int FoldPlan::fold_of(const std::string& patient_id) const {
  auto it = assignments.find(patient_id);
  if (it == assignments.end()) throw DataError("patient '" + patient_id + "' not in fold plan");
  return it->second;
}

FoldPlan make_folds(const Dataset& ds, int k, uint64_t seed) {
  if (k < 2) throw ConfigError("need at least 2 folds");
  std::vector<std::string> patients = ds.patient_ids();
  if (int(patients.size()) < k)
    throw ConfigError("cannot make " + std::to_string(k) + " folds from " +
                      std::to_string(patients.size()) + " patients");

  struct PatientInfo {
    std::string id;
    int majority_class = 0;
    int count = 0;
  };
  std::vector<PatientInfo> infos;
  for (const auto& pid : patients) {
    PatientInfo info;
    info.id = pid;
    std::vector<int> hist(size_t(ds.num_classes), 0);
    for (const auto& s : ds.samples)
      if (s.patient_id == pid) {
        ++info.count;
        if (s.severity) ++hist[size_t(*s.severity)];
      }
    info.majority_class =
        int(std::max_element(hist.begin(), hist.end()) - hist.begin());  // ties → lower class
    infos.push_back(std::move(info));
  }
  std::sort(infos.begin(), infos.end(), [](const PatientInfo& a, const PatientInfo& b) {
    if (a.majority_class != b.majority_class) return a.majority_class < b.majority_class;
    if (a.count != b.count) return a.count > b.count;
    return a.id < b.id;
  });

  // Seeded fold preference breaks exact fill ties, so different master seeds
  // explore different (still stratified) plans.
  std::vector<int> pref(static_cast<size_t>(k));
  std::iota(pref.begin(), pref.end(), 0);
  Rng rng(derive_seed(seed, 0x666f6c64ULL));
  rng.shuffle(pref);
  std::vector<int> pref_rank(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) pref_rank[size_t(pref[size_t(i)])] = i;

  FoldPlan plan;
  plan.num_folds = k;
  std::vector<int> fill(size_t(k), 0), patients_in(size_t(k), 0);
  for (const auto& info : infos) {
    int best = 0;
    for (int f = 1; f < k; ++f) {
      if (fill[size_t(f)] != fill[size_t(best)]) {
        if (fill[size_t(f)] < fill[size_t(best)]) best = f;
      } else if (patients_in[size_t(f)] != patients_in[size_t(best)]) {
        if (patients_in[size_t(f)] < patients_in[size_t(best)]) best = f;
      } else if (pref_rank[size_t(f)] < pref_rank[size_t(best)]) {
        best = f;
      }
    }
    plan.assignments[info.id] = best;
    fill[size_t(best)] += info.count;
    patients_in[size_t(best)] += 1;
  }
  return plan;
}

std::vector<size_t> test_indices(const Dataset& ds, const FoldPlan& plan, int fold) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (plan.fold_of(ds.samples[i].patient_id) == fold) idx.push_back(i);
  return idx;
}

std::vector<size_t> train_indices(const Dataset& ds, const FoldPlan& plan, int fold) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (plan.fold_of(ds.samples[i].patient_id) != fold) idx.push_back(i);
  return idx;
}

}  // namespace scd
