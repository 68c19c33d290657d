#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scd/image.hpp"
#include "scd/rng.hpp"

namespace scd {

// Spleen size in integer centimeters, or Removed (autosplenectomy). A
// surgically removed spleen is recorded as Measured(0); the two sentinels are
// distinct values and compare unequal.
struct SpleenDescriptor {
  enum class Status { Measured, Removed };
  Status status = Status::Measured;
  int size_cm = 0;  // meaningful only when Measured

  static SpleenDescriptor measured(int cm) {
    if (cm < 0) throw DataError("spleen size must be non-negative");
    return {Status::Measured, cm};
  }
  static SpleenDescriptor removed() { return {Status::Removed, 0}; }

  bool operator==(const SpleenDescriptor& o) const {
    if (status != o.status) return false;
    return status == Status::Removed || size_cm == o.size_cm;
  }

  // Numeric encoding where a scalar is unavoidable (SVM column, severity
  // score). Removed maps to the caller's sentinel.
  double cm_or(double removed_value) const {
    return status == Status::Removed ? removed_value : double(size_cm);
  }

  std::string str() const {
    return status == Status::Removed ? "removed" : std::to_string(size_cm);
  }
  static SpleenDescriptor parse(const std::string& field);
};

struct LabValues {
  float hypo_pct = 0.0f;
  float hyper_pct = 0.0f;

  void validate() const {
    if (hypo_pct < 0.0f || hypo_pct > 100.0f || hyper_pct < 0.0f || hyper_pct > 100.0f)
      throw DataError("lab percentages must be in [0,100]");
    if (hypo_pct + hyper_pct > 100.0f)
      throw DataError("hypo_pct + hyper_pct must not exceed 100");
  }
};

struct Sample {
  std::string sample_id;
  std::string patient_id;
  PercollImage image;
  SpleenDescriptor spleen;
  std::optional<LabValues> lab;  // absent at predict time
  std::optional<int> severity;   // absent at predict time
};

struct Provenance {
  enum class Kind { Synthetic, Loaded };
  Kind kind = Kind::Synthetic;
  uint64_t seed = 0;       // Synthetic
  std::string path;        // Loaded
};

struct Dataset {
  std::vector<Sample> samples;
  int num_classes = 5;
  Provenance provenance;

  // Unique patient ids in first-appearance order.
  std::vector<std::string> patient_ids() const;
  void validate() const;  // unique sample ids, labels < num_classes
};

struct GeneratorConfig {
  int num_patients = 17;
  int samples_per_patient = 12;  // used when total_samples == 0
  int total_samples = 216;       // 0 = derive from samples_per_patient
  int num_classes = 5;
  int height = 128;
  int width = 32;
  float noise = 0.02f;
  // Latent severity score = w_hyper·hyper − w_hypo·hypo − w_spleen·spleen_cm
  // (Removed counts as 0 cm), binned into equal-frequency classes.
  float w_hyper = 1.0f;
  float w_hypo = 0.3f;
  float w_spleen = 0.7f;

  void validate() const;
};

// Renders one Percoll image: four Gaussian bands along the gradient axis,
// top-band amplitude driven by hypo_pct, bottom-band by hyper_pct, plus
// uniform pixel noise of the given amplitude. Pixels are quantized to the
// 8-bit grid so a saved copy reloads bit-exactly.
PercollImage render_percoll(int height, int width, float hypo_pct, float hyper_pct, float noise,
                            Rng& rng);

// Deterministic synthetic cohort for a fixed (config, seed).
Dataset generate_synthetic(const GeneratorConfig& cfg, uint64_t seed);

// Manifest CSV; image paths are resolved relative to the CSV's directory.
// num_classes == 0 infers K from the labels present (at least 2).
Dataset load_manifest(const std::filesystem::path& csv_path, int num_classes = 0);

// Writes dir/manifest.csv and dir/images/<sample_id><image_ext>.
void save_manifest(const Dataset& ds, const std::filesystem::path& dir,
                   const std::string& image_ext = ".png");

}  // namespace scd
