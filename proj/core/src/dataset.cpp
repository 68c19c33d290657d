#include "scd/dataset.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace scd {

SpleenDescriptor SpleenDescriptor::parse(const std::string& field) {
  if (field == "removed") return removed();
  if (field.empty() || field.find_first_not_of("0123456789") != std::string::npos)
    throw DataError("spleen must be a non-negative integer or 'removed', got '" + field + "'");
  return measured(std::stoi(field));
}

std::vector<std::string> Dataset::patient_ids() const {
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (const auto& s : samples)
    if (seen.insert(s.patient_id).second) ids.push_back(s.patient_id);
  return ids;
}

void Dataset::validate() const {
  if (num_classes < 2) throw ConfigError("dataset needs at least 2 classes");
  std::unordered_set<std::string> ids;
  for (const auto& s : samples) {
    if (!ids.insert(s.sample_id).second)
      throw DataError("duplicate sample_id '" + s.sample_id + "'");
    if (s.severity && (*s.severity < 0 || *s.severity >= num_classes))
      throw DataError("sample '" + s.sample_id + "' severity out of range");
    if (s.lab) s.lab->validate();
  }
}

void GeneratorConfig::validate() const {
  if (num_patients < 2) throw ConfigError("generator needs at least 2 patients");
  if (num_classes < 2) throw ConfigError("generator needs at least 2 classes");
  if (total_samples == 0 && samples_per_patient < 1)
    throw ConfigError("generator needs at least 1 sample per patient");
  if (total_samples != 0 && total_samples < num_patients)
    throw ConfigError("total_samples must cover every patient");
  if (height < 64 || width < 16)
    throw ConfigError("generated images must be at least 64x16 for the conv stack");
  if (noise < 0.0f || noise > 0.5f) throw ConfigError("noise amplitude must be in [0, 0.5]");
}

PercollImage render_percoll(int height, int width, float hypo_pct, float hyper_pct, float noise,
                            Rng& rng) {
  // Band geometry in relative row units: three buffy/normal-density bands and
  // a bottom high-density band. Hypochromic (light) cells float high,
  // hyperchromic (dense) cells sink, so those two bands carry the labels.
  static constexpr double kCenter[4] = {0.18, 0.38, 0.58, 0.82};
  static constexpr double kSigma[4] = {0.05, 0.05, 0.05, 0.06};
  double amp[4];
  amp[0] = 0.15 + 0.75 * double((hypo_pct - 0.6f) / 36.9f);
  amp[1] = 0.45;
  amp[2] = 0.45;
  amp[3] = 0.10 + 0.85 * double((hyper_pct - 0.2f) / 10.7f);

  std::vector<float> px(size_t(height) * size_t(width));
  std::vector<double> profile(static_cast<size_t>(height));
  for (int r = 0; r < height; ++r) {
    double v = 0.0;
    for (int b = 0; b < 4; ++b) {
      double z = (double(r) / height - kCenter[b]) / kSigma[b];
      v += amp[b] * std::exp(-0.5 * z * z);
    }
    profile[size_t(r)] = v;
  }
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      // gentle horizontal envelope so the tube has a center bulge
      double e = 1.0 - 0.1 * std::pow(2.0 * c / (width - 1) - 1.0, 2.0);
      double v = profile[size_t(r)] * e;
      if (noise > 0.0f) v += double(noise) * rng.uniform(-1.0, 1.0);
      px[size_t(r) * size_t(width) + size_t(c)] = quantize8(float(std::clamp(v, 0.0, 1.0)));
    }
  }
  return PercollImage::from_quantized(height, width, std::move(px));
}

namespace {

constexpr float kHypoLo = 0.6f, kHypoHi = 37.5f;
constexpr float kHyperLo = 0.2f, kHyperHi = 10.9f;

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

}  // namespace

Dataset generate_synthetic(const GeneratorConfig& cfg, uint64_t seed) {
  cfg.validate();
  Dataset ds;
  ds.num_classes = cfg.num_classes;
  ds.provenance = {Provenance::Kind::Synthetic, seed, ""};

  // Per-patient sample counts: either fixed, or total distributed as evenly
  // as possible (first `extra` patients get one more).
  std::vector<int> counts(size_t(cfg.num_patients), cfg.samples_per_patient);
  if (cfg.total_samples > 0) {
    int base = cfg.total_samples / cfg.num_patients;
    int extra = cfg.total_samples % cfg.num_patients;
    for (int p = 0; p < cfg.num_patients; ++p) counts[size_t(p)] = base + (p < extra ? 1 : 0);
  }

  std::vector<double> scores;
  int sample_no = 0;
  for (int p = 0; p < cfg.num_patients; ++p) {
    Rng prng(derive_seed(seed, 0x706174ULL, uint64_t(p)));
    // Patient latent in [0,1]: disease propensity. High u → more hyperchromic
    // cells, fewer hypochromic, smaller (or auto-splenectomized) spleen.
    double u = prng.uniform();
    SpleenDescriptor spleen;
    double removed_prob = u > 0.75 ? 0.5 : 0.05;
    if (prng.uniform() < removed_prob) {
      spleen = SpleenDescriptor::removed();
    } else {
      int cm = int(std::lround(std::clamp(15.0 * (1.0 - u) + 1.5 * prng.normal(), 0.0, 15.0)));
      spleen = SpleenDescriptor::measured(cm);
    }
    char pid[16];
    std::snprintf(pid, sizeof pid, "p%02d", p + 1);

    for (int s = 0; s < counts[size_t(p)]; ++s, ++sample_no) {
      Rng srng(derive_seed(seed, 0x73616dULL, uint64_t(p), uint64_t(s)));
      float hv = clamp01(float(1.0 - u + 0.12 * srng.normal()));
      float tv = clamp01(float(u + 0.12 * srng.normal()));
      LabValues lab;
      lab.hypo_pct = kHypoLo + (kHypoHi - kHypoLo) * hv;
      lab.hyper_pct = kHyperLo + (kHyperHi - kHyperLo) * tv;

      Sample smp;
      char sid[16];
      std::snprintf(sid, sizeof sid, "s%04d", sample_no + 1);
      smp.sample_id = sid;
      smp.patient_id = pid;
      smp.spleen = spleen;
      smp.lab = lab;
      smp.image = render_percoll(cfg.height, cfg.width, lab.hypo_pct, lab.hyper_pct, cfg.noise,
                                 srng);
      ds.samples.push_back(std::move(smp));

      double score = double(cfg.w_hyper) * lab.hyper_pct - double(cfg.w_hypo) * lab.hypo_pct -
                     double(cfg.w_spleen) * spleen.cm_or(0.0);
      scores.push_back(score);
    }
  }

  // Equal-frequency binning: thresholds at the k/K quantiles of the scores
  // actually drawn, label = number of thresholds at or below the score.
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> thresholds;
  size_t n = sorted.size();
  for (int k = 1; k < cfg.num_classes; ++k)
    thresholds.push_back(sorted[n * size_t(k) / size_t(cfg.num_classes)]);
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    int label = 0;
    for (double t : thresholds) label += scores[i] >= t ? 1 : 0;
    ds.samples[i].severity = label;
  }
  ds.validate();
  return ds;
}

namespace {

// One CSV row split on commas; quoting is not needed by this format, so a
// bare split is correct and keeps errors obvious.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string fmt_pct(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", double(v));
  return buf;
}

constexpr const char* kHeader = "sample_id,patient_id,image_file,spleen,hypo_pct,hyper_pct,severity";

}  // namespace

Dataset load_manifest(const std::filesystem::path& csv_path, int num_classes) {
  std::ifstream f(csv_path);
  if (!f) throw IoError("cannot open manifest " + csv_path.string());
  std::string line;
  if (!std::getline(f, line)) throw DataError(csv_path.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader)
    throw DataError(csv_path.string() + ": bad header, expected '" + std::string(kHeader) + "'");

  Dataset ds;
  ds.provenance = {Provenance::Kind::Loaded, 0, csv_path.string()};
  std::filesystem::path base = csv_path.parent_path();
  std::unordered_set<std::string> seen;
  int row = 1;
  int max_label = -1;
  while (std::getline(f, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 7)
      throw DataError(csv_path.string() + ":" + std::to_string(row) + ": expected 7 fields, got " +
                      std::to_string(fields.size()));
    Sample s;
    s.sample_id = fields[0];
    s.patient_id = fields[1];
    if (s.sample_id.empty() || s.patient_id.empty())
      throw DataError(csv_path.string() + ":" + std::to_string(row) + ": empty id field");
    if (!seen.insert(s.sample_id).second)
      throw DataError(csv_path.string() + ":" + std::to_string(row) + ": duplicate sample_id '" +
                      s.sample_id + "'");
    try {
      s.spleen = SpleenDescriptor::parse(fields[3]);
      bool has_hypo = !fields[4].empty(), has_hyper = !fields[5].empty();
      if (has_hypo != has_hyper)
        throw DataError("hypo_pct and hyper_pct must both be present or both empty");
      if (has_hypo) {
        LabValues lab{std::stof(fields[4]), std::stof(fields[5])};
        lab.validate();
        s.lab = lab;
      }
      if (!fields[6].empty()) {
        if (fields[6].find_first_not_of("0123456789") != std::string::npos)
          throw DataError("severity must be a non-negative integer");
        s.severity = std::stoi(fields[6]);
        max_label = std::max(max_label, *s.severity);
      }
      s.image = load_image(base / fields[2]);
    } catch (const IoError& e) {
      throw DataError(csv_path.string() + ":" + std::to_string(row) + ": " + e.what());
    } catch (const Error& e) {
      throw DataError(csv_path.string() + ":" + std::to_string(row) + ": " + e.what());
    } catch (const std::exception& e) {
      throw DataError(csv_path.string() + ":" + std::to_string(row) + ": malformed field (" +
                      e.what() + ")");
    }
    ds.samples.push_back(std::move(s));
  }
  ds.num_classes = num_classes > 0 ? num_classes : std::max(max_label + 1, 2);
  try {
    ds.validate();
  } catch (const Error& e) {
    throw DataError(csv_path.string() + ": " + e.what());
  }
  return ds;
}

void save_manifest(const Dataset& ds, const std::filesystem::path& dir,
                   const std::string& image_ext) {
  if (image_ext != ".png" && image_ext != ".pgm")
    throw UsageError("image_ext must be .png or .pgm");
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError("cannot create " + (dir / "images").string());
  std::ofstream f(dir / "manifest.csv");
  if (!f) throw IoError("cannot write manifest in " + dir.string());
  f << kHeader << "\n";
  for (const auto& s : ds.samples) {
    std::string rel = "images/" + s.sample_id + image_ext;
    save_image(s.image, dir / rel);
    f << s.sample_id << ',' << s.patient_id << ',' << rel << ',' << s.spleen.str() << ',';
    if (s.lab) f << fmt_pct(s.lab->hypo_pct) << ',' << fmt_pct(s.lab->hyper_pct);
    else f << ',';
    f << ',';
    if (s.severity) f << *s.severity;
    f << "\n";
  }
  if (!f.flush()) throw IoError("write failure in " + dir.string());
}

}  // namespace scd
