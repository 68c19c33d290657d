#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "scd/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "scd/rng.hpp"

using scd::ConfigError;
using scd::DataError;
using scd::Dataset;
using scd::GeneratorConfig;
using scd::LabValues;
using scd::Rng;
using scd::SpleenDescriptor;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const std::string& leaf) {
  fs::path d = fs::temp_directory_path() / "scd_dataset_tests" / leaf;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

GeneratorConfig small_cfg() {
  GeneratorConfig cfg;
  cfg.num_patients = 5;
  cfg.total_samples = 30;
  cfg.height = 64;
  cfg.width = 16;
  return cfg;
}

}  // namespace

TEST_CASE("spleen descriptor: parse, equality, numeric encoding") {
  SpleenDescriptor m = SpleenDescriptor::parse("7");
  CHECK(m.status == SpleenDescriptor::Status::Measured);
  CHECK(m.size_cm == 7);
  SpleenDescriptor r = SpleenDescriptor::parse("removed");
  CHECK(r.status == SpleenDescriptor::Status::Removed);
  CHECK(r == SpleenDescriptor::removed());
  // surgically absent is not the same as measured-zero
  CHECK(!(r == SpleenDescriptor::measured(0)));
  CHECK(m.cm_or(-1.0) == 7.0);
  CHECK(r.cm_or(-1.0) == -1.0);
  CHECK(m.str() == "7");
  CHECK(r.str() == "removed");
  CHECK_THROWS_AS(SpleenDescriptor::parse("-3"), DataError);
  CHECK_THROWS_AS(SpleenDescriptor::parse("3.5"), DataError);
  CHECK_THROWS_AS(SpleenDescriptor::parse(""), DataError);
  CHECK_THROWS_AS(SpleenDescriptor::parse("Removed"), DataError);
  CHECK_THROWS_AS(SpleenDescriptor::measured(-1), DataError);
}

TEST_CASE("lab values validate their ranges") {
  LabValues ok{10.0f, 5.0f};
  ok.validate();
  CHECK_THROWS_AS((LabValues{-0.5f, 5.0f}.validate()), DataError);
  CHECK_THROWS_AS((LabValues{5.0f, 101.0f}.validate()), DataError);
  CHECK_THROWS_AS((LabValues{60.0f, 50.0f}.validate()), DataError);
}

TEST_CASE("generator config rejects bad geometry") {
  GeneratorConfig cfg;
  cfg.num_patients = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = GeneratorConfig{};
  cfg.height = 32;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = GeneratorConfig{};
  cfg.noise = 0.6f;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = GeneratorConfig{};
  cfg.total_samples = 10;  // fewer than 17 patients
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  GeneratorConfig{}.validate();  // defaults are fine
}

TEST_CASE("default synthetic cohort: 216 samples over 17 patients") {
  Dataset ds = scd::generate_synthetic(GeneratorConfig{}, 42);
  CHECK(ds.samples.size() == 216);
  CHECK(ds.patient_ids().size() == 17);
  CHECK(ds.num_classes == 5);
  CHECK(ds.provenance.kind == scd::Provenance::Kind::Synthetic);
  CHECK(ds.provenance.seed == 42);
  std::map<std::string, int> per_patient;
  for (const auto& s : ds.samples) {
    CHECK(s.lab.has_value());
    CHECK(s.severity.has_value());
    CHECK(s.image.height() == 128);
    CHECK(s.image.width() == 32);
    per_patient[s.patient_id]++;
  }
  for (const auto& [pid, n] : per_patient) {
    CHECK(n >= 12);
    CHECK(n <= 13);
  }
}

TEST_CASE("severity labels are equal-frequency binned") {
  Dataset ds = scd::generate_synthetic(GeneratorConfig{}, 1);
  std::vector<int> counts(5, 0);
  for (const auto& s : ds.samples) counts[size_t(*s.severity)]++;
  for (int k = 0; k < 5; ++k) {
    INFO("class ", k, " count ", counts[size_t(k)]);
    CHECK(counts[size_t(k)] >= 38);  // 216/5 = 43.2, allow tie slack
    CHECK(counts[size_t(k)] <= 49);
  }
}

TEST_CASE("generation is deterministic in (config, seed)") {
  GeneratorConfig cfg = small_cfg();
  Dataset a = scd::generate_synthetic(cfg, 7);
  Dataset b = scd::generate_synthetic(cfg, 7);
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].sample_id == b.samples[i].sample_id);
    CHECK(a.samples[i].patient_id == b.samples[i].patient_id);
    CHECK(a.samples[i].spleen == b.samples[i].spleen);
    CHECK(*a.samples[i].severity == *b.samples[i].severity);
    CHECK(a.samples[i].lab->hypo_pct == b.samples[i].lab->hypo_pct);
    CHECK(a.samples[i].image.pixels() == b.samples[i].image.pixels());
  }
  Dataset c = scd::generate_synthetic(cfg, 8);
  bool any_diff = false;
  for (size_t i = 0; i < a.samples.size() && !any_diff; ++i)
    any_diff = a.samples[i].image.pixels() != c.samples[i].image.pixels();
  CHECK(any_diff);
}

TEST_CASE("render: deterministic, quantized, and band amplitudes track labs") {
  Rng r1(99), r2(99);
  auto a = scd::render_percoll(64, 16, 20.0f, 5.0f, 0.02f, r1);
  auto b = scd::render_percoll(64, 16, 20.0f, 5.0f, 0.02f, r2);
  CHECK(a.pixels() == b.pixels());
  for (float v : a.pixels()) CHECK(scd::quantize8(v) == v);

  // noise-free renders: the top band tracks hypo_pct, the bottom hyper_pct
  Rng r3(0), r4(0), r5(0), r6(0);
  auto lo_hypo = scd::render_percoll(100, 8, 1.0f, 5.0f, 0.0f, r3);
  auto hi_hypo = scd::render_percoll(100, 8, 35.0f, 5.0f, 0.0f, r4);
  auto row_mean = [](const scd::PercollImage& im, int row) {
    double s = 0;
    for (int c = 0; c < im.width(); ++c) s += im.at(row, c);
    return s / im.width();
  };
  CHECK(row_mean(hi_hypo, 18) > row_mean(lo_hypo, 18) + 0.1);
  auto lo_hyper = scd::render_percoll(100, 8, 20.0f, 0.5f, 0.0f, r5);
  auto hi_hyper = scd::render_percoll(100, 8, 20.0f, 10.0f, 0.0f, r6);
  CHECK(row_mean(hi_hyper, 82) > row_mean(lo_hyper, 82) + 0.1);
}

TEST_CASE("manifest round trip preserves every field and pixel") {
  GeneratorConfig cfg = small_cfg();
  Dataset ds = scd::generate_synthetic(cfg, 3);
  fs::path dir = tmp_dir("roundtrip");
  scd::save_manifest(ds, dir);
  Dataset back = scd::load_manifest(dir / "manifest.csv", ds.num_classes);
  REQUIRE(back.samples.size() == ds.samples.size());
  CHECK(back.num_classes == ds.num_classes);
  CHECK(back.provenance.kind == scd::Provenance::Kind::Loaded);
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& x = ds.samples[i];
    const auto& y = back.samples[i];
    CHECK(x.sample_id == y.sample_id);
    CHECK(x.patient_id == y.patient_id);
    CHECK(x.spleen == y.spleen);
    CHECK(*x.severity == *y.severity);
    REQUIRE(y.lab.has_value());
    CHECK(x.lab->hypo_pct == y.lab->hypo_pct);  // %.9g round-trips float exactly
    CHECK(x.lab->hyper_pct == y.lab->hyper_pct);
    CHECK(x.image.pixels() == y.image.pixels());
  }
}

TEST_CASE("manifest without labels or severity loads as predict-time data") {
  Dataset ds = scd::generate_synthetic(small_cfg(), 4);
  for (auto& s : ds.samples) {
    s.lab.reset();
    s.severity.reset();
  }
  fs::path dir = tmp_dir("unlabeled");
  scd::save_manifest(ds, dir, ".pgm");
  Dataset back = scd::load_manifest(dir / "manifest.csv", 5);
  for (const auto& s : back.samples) {
    CHECK(!s.lab.has_value());
    CHECK(!s.severity.has_value());
  }
}

TEST_CASE("load_manifest infers num_classes from labels when asked") {
  Dataset ds = scd::generate_synthetic(small_cfg(), 5);
  fs::path dir = tmp_dir("inferk");
  scd::save_manifest(ds, dir);
  Dataset back = scd::load_manifest(dir / "manifest.csv");  // num_classes = 0
  int max_label = 0;
  for (const auto& s : back.samples) max_label = std::max(max_label, *s.severity);
  CHECK(back.num_classes == max_label + 1);
}

TEST_CASE("malformed manifests report the offending row") {
  fs::path dir = tmp_dir("broken");
  Dataset ds = scd::generate_synthetic(small_cfg(), 6);
  scd::save_manifest(ds, dir);
  fs::path csv = dir / "manifest.csv";

  auto rewrite = [&](const std::string& content) {
    std::ofstream f(csv);
    f << content;
  };
  auto message_of = [&]() {
    try {
      scd::load_manifest(csv, 5);
      return std::string("no error");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
  };

  rewrite("wrong,header\n");
  CHECK(message_of().find("bad header") != std::string::npos);

  const char* hdr = "sample_id,patient_id,image_file,spleen,hypo_pct,hyper_pct,severity\n";
  rewrite(std::string(hdr) + "s1,p1,images/s0001.png,5,10,5\n");  // 6 fields
  CHECK(message_of().find(":2:") != std::string::npos);
  CHECK(message_of().find("7 fields") != std::string::npos);

  rewrite(std::string(hdr) + "s1,p1,images/s0001.png,5,10,5,2\n" +
          "s1,p2,images/s0002.png,5,10,5,2\n");
  CHECK(message_of().find(":3:") != std::string::npos);
  CHECK(message_of().find("duplicate") != std::string::npos);

  rewrite(std::string(hdr) + "s1,p1,images/s0001.png,huge,10,5,2\n");
  CHECK(message_of().find("spleen") != std::string::npos);

  rewrite(std::string(hdr) + "s1,p1,images/s0001.png,5,10,,2\n");  // hypo without hyper
  CHECK(message_of().find("both") != std::string::npos);

  rewrite(std::string(hdr) + "s1,p1,images/s0001.png,5,10,5,-2\n");
  CHECK(message_of().find("severity") != std::string::npos);

  rewrite(std::string(hdr) + "s1,p1,images/missing.png,5,10,5,2\n");
  CHECK(message_of().find(":2:") != std::string::npos);

  rewrite(std::string(hdr) + ",p1,images/s0001.png,5,10,5,2\n");
  CHECK(message_of().find("empty id") != std::string::npos);
}

TEST_CASE("dataset validate rejects duplicates and out-of-range labels") {
  Dataset ds = scd::generate_synthetic(small_cfg(), 9);
  ds.samples[1].sample_id = ds.samples[0].sample_id;
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds = scd::generate_synthetic(small_cfg(), 9);
  ds.samples[0].severity = 99;
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds = scd::generate_synthetic(small_cfg(), 9);
  ds.num_classes = 1;
  CHECK_THROWS_AS(ds.validate(), ConfigError);
}

TEST_CASE("save_manifest rejects unknown image extensions") {
  Dataset ds = scd::generate_synthetic(small_cfg(), 10);
  CHECK_THROWS_AS(scd::save_manifest(ds, tmp_dir("ext"), ".bmp"), scd::UsageError);
}
