// scdgcn: Percoll-image SCD severity pipeline.
//
// Subcommands cover the full workflow: synthesize a cohort, train the
// end-to-end pipeline, predict a single sample against the stored population
// graph, run the cross-validated method comparison and the similarity-term
// ablation, and export the population graph for inspection. Every run writes
// a run.json with the resolved configuration and master seed so any reported
// number can be regenerated.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scd/bench.hpp"
#include "scd/dataset.hpp"
#include "scd/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

scd::SimilarityTerms parse_terms(const std::string& spec) {
  scd::SimilarityTerms t{false, false, false};
  size_t start = 0;
  while (start <= spec.size()) {
    size_t end = spec.find('+', start);
    if (end == std::string::npos) end = spec.size();
    std::string tok = spec.substr(start, end - start);
    if (tok == "spleen") t.spleen = true;
    else if (tok == "hypo") t.hypo = true;
    else if (tok == "hyper") t.hyper = true;
    else throw scd::UsageError("unknown similarity term '" + tok + "'");
    start = end + 1;
  }
  t.validate();
  return t;
}

void write_run_json(const fs::path& dir, const std::string& command, uint64_t seed,
                    const scd::PipelineConfig& cfg, ordered_json extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  ordered_json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = ordered_json::parse(scd::config_json(cfg));
  for (auto& [k, v] : extra.items()) j[k] = v;
  fs::path path = dir / "run.json";
  std::ofstream out(path);
  if (!out) throw scd::IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

scd::Dataset load_or_generate(const std::string& data, const scd::PipelineConfig& cfg,
                              uint64_t seed) {
  if (data.empty()) return scd::generate_synthetic(cfg.gen, seed);
  fs::path p = data;
  if (fs::is_directory(p)) p /= "manifest.csv";
  return scd::load_manifest(p);
}

ordered_json prediction_json(const scd::PredictionRecord& rec) {
  ordered_json j;
  j["sample_id"] = rec.sample_id;
  j["hypo_pct"] = rec.hypo_pct;
  j["hyper_pct"] = rec.hyper_pct;
  j["severity"] = rec.severity;
  j["probabilities"] = rec.probabilities;
  return j;
}

void print_summary_table(const scd::BenchReport& rep) {
  std::cout << "[" << rep.tag << "]\n";
  for (const auto& row : rep.rows) {
    scd::MeanStd acc = scd::summarize(row, "accuracy");
    scd::MeanStd f1 = scd::summarize(row, "weighted_f1");
    scd::MeanStd auroc = scd::summarize(row, "auroc");
    char line[160];
    if (auroc.count > 0)
      std::snprintf(line, sizeof line, "  %-20s acc %.2f ± %.2f   F1 %.2f ± %.2f   AUROC %.2f ± %.2f",
                    row.name.c_str(), acc.mean, acc.stddev, f1.mean, f1.stddev, auroc.mean,
                    auroc.stddev);
    else
      std::snprintf(line, sizeof line, "  %-20s acc %.2f ± %.2f   F1 %.2f ± %.2f   AUROC -",
                    row.name.c_str(), acc.mean, acc.stddev, f1.mean, f1.stddev);
    std::cout << line << '\n';
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Percoll-image SCD severity pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file")->envname("SCDGCN_CONFIG");

  uint64_t seed = 42;
  scd::PipelineConfig cfg;
  std::string mode_str = "literal";
  std::string terms_str = "spleen+hypo+hyper";

  app.add_option("--seed", seed, "master seed; every derived RNG stream is a pure function of it")
      ->capture_default_str();
  app.add_option("--patients", cfg.gen.num_patients, "synthetic cohort size")
      ->capture_default_str();
  app.add_option("--total-samples", cfg.gen.total_samples,
                 "total synthetic samples (0 = samples-per-patient applies)")
      ->capture_default_str();
  app.add_option("--samples-per-patient", cfg.gen.samples_per_patient,
                 "per-patient sample count when --total-samples is 0")
      ->capture_default_str();
  app.add_option("--classes", cfg.gen.num_classes, "severity classes")->capture_default_str();
  app.add_option("--height", cfg.gen.height, "image height")->capture_default_str();
  app.add_option("--width", cfg.gen.width, "image width")->capture_default_str();
  app.add_option("--noise", cfg.gen.noise, "synthetic pixel noise amplitude")
      ->capture_default_str();
  app.add_option("--chrome-epochs", cfg.chrome.epochs, "regressor epochs")->capture_default_str();
  app.add_option("--chrome-lr", cfg.chrome.lr, "regressor learning rate")->capture_default_str();
  app.add_option("--chrome-batch", cfg.chrome.batch_size, "regressor batch size")
      ->capture_default_str();
  app.add_option("--chrome-dropout", cfg.chrome.dropout, "regressor dropout rate")
      ->capture_default_str();
  app.add_option("--feat-epochs", cfg.feat.epochs, "feature-CNN epochs")->capture_default_str();
  app.add_option("--feat-lr", cfg.feat.lr, "feature-CNN learning rate")->capture_default_str();
  app.add_option("--feat-batch", cfg.feat.batch_size, "feature-CNN batch size")
      ->capture_default_str();
  app.add_option("--gcn-epochs", cfg.gcn.epochs, "GCN epochs")->capture_default_str();
  app.add_option("--gcn-lr", cfg.gcn.lr, "GCN learning rate")->capture_default_str();
  app.add_option("--hidden", cfg.gcn.hidden, "GCN hidden width")->capture_default_str();
  app.add_option("--gcn-dropout", cfg.gcn.dropout, "GCN dropout rate")->capture_default_str();
  app.add_option("--cheb-order", cfg.gcn.cheb_order,
                 "Chebyshev order (1 = renormalized single-hop propagation)")
      ->capture_default_str();
  app.add_option("--lambda", cfg.lambda, "spleen-term weight in the similarity kernel")
      ->capture_default_str();
  app.add_option("--mode", mode_str, "similarity bracket: literal or corrected")
      ->check(CLI::IsMember({"literal", "corrected"}))
      ->capture_default_str();
  app.add_option("--terms", terms_str, "kernel terms, e.g. spleen+hypo or spleen+hypo+hyper")
      ->capture_default_str();
  app.add_option("--f-fft", cfg.f_fft, "FFT magnitude features per image")->capture_default_str();
  app.add_option("--target-features", cfg.target_features, "features kept by RFE")
      ->capture_default_str();
  app.add_option("--rfe-step", cfg.rfe_step, "fraction of features dropped per RFE round")
      ->capture_default_str();
  app.add_option("--ridge-alpha", cfg.ridge_alpha, "ridge regularization for RFE")
      ->capture_default_str();
  app.add_option("--folds", cfg.num_folds, "cross-validation folds")->capture_default_str();
  app.add_option("--svm-c", cfg.svm.c, "SVM regularization C")->capture_default_str();
  app.add_option("--svm-steps", cfg.svm.steps, "SVM subgradient steps")->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic cohort to a manifest directory");
  gen->fallthrough();
  std::string gen_out;
  std::string gen_format = "png";
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--format", gen_format, "image format")
      ->check(CLI::IsMember({"png", "pgm"}))
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "train the full pipeline and save a checkpoint");
  train->fallthrough();
  std::string train_data, train_out;
  train->add_option("--data", train_data, "manifest.csv or its directory (default: synthetic)");
  train->add_option("--out", train_out, "output directory (model.pgcn, run.json)")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "severity for one image + spleen measurement");
  predict->fallthrough();
  std::string pr_model, pr_image, pr_spleen, pr_id = "query", pr_out;
  predict->add_option("--model", pr_model, "checkpoint from `train`")->required();
  predict->add_option("--image", pr_image, "Percoll image (png or pgm)")->required();
  predict->add_option("--spleen", pr_spleen, "spleen size in cm, or 'removed'")->required();
  predict->add_option("--id", pr_id, "sample id used in the output")->capture_default_str();
  predict->add_option("--out", pr_out, "also write prediction.json and run.json here");

  // bench
  auto* bench = app.add_subcommand("bench", "cross-validated method comparison");
  bench->fallthrough();
  std::string bench_data, bench_out;
  std::vector<std::string> bench_modes = {"literal", "corrected"};
  std::vector<std::string> bench_variants;
  bench->add_option("--data", bench_data, "manifest.csv or its directory (default: synthetic)");
  bench->add_option("--out", bench_out, "output directory for report/summary CSVs")->required();
  bench->add_option("--modes", bench_modes, "similarity modes to benchmark")
      ->check(CLI::IsMember({"literal", "corrected"}))
      ->capture_default_str();
  bench->add_option("--variants", bench_variants,
                    "method rows (default: SVM SVM_Lab GCN_Rand SCD_severity_GCN GCN_Lab)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "similarity-term ablation");
  ablate->fallthrough();
  std::string ab_data, ab_out;
  ablate->add_option("--data", ab_data, "manifest.csv or its directory (default: synthetic)");
  ablate->add_option("--out", ab_out, "output directory for ablation CSVs")->required();

  // export-graph
  auto* exportg = app.add_subcommand("export-graph", "dump a checkpoint's population graph");
  exportg->fallthrough();
  std::string ex_model, ex_out;
  exportg->add_option("--model", ex_model, "checkpoint from `train`")->required();
  exportg->add_option("--out", ex_out, "output directory (edges.csv, nodes.csv)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cfg.mode = scd::similarity_mode_from_string(mode_str);
  cfg.terms = parse_terms(terms_str);
  cfg.validate();

  if (gen->parsed()) {
    scd::Dataset ds = scd::generate_synthetic(cfg.gen, seed);
    scd::save_manifest(ds, gen_out, "." + gen_format);
    write_run_json(gen_out, "generate", seed, cfg,
                   {{"out", gen_out}, {"format", gen_format}, {"samples", ds.samples.size()}});
    std::cout << "wrote " << ds.samples.size() << " samples to " << gen_out << "\n";
  } else if (train->parsed()) {
    scd::Dataset ds = load_or_generate(train_data, cfg, seed);
    scd::TrainedPipeline p = scd::train_pipeline(ds, cfg, seed);
    fs::create_directories(train_out);
    fs::path model_path = fs::path(train_out) / "model.pgcn";
    scd::save_pipeline(p, model_path);
    write_run_json(train_out, "train", seed, cfg,
                   {{"data", train_data.empty() ? "synthetic" : train_data},
                    {"model", model_path.string()}});
    std::cout << "wrote " << model_path.string() << "\n";
  } else if (predict->parsed()) {
    scd::SpleenDescriptor spleen;
    try {
      spleen = scd::SpleenDescriptor::parse(pr_spleen);
    } catch (const scd::DataError& e) {
      throw scd::UsageError(e.what());
    }
    scd::TrainedPipeline p = scd::load_pipeline(pr_model);
    scd::PercollImage img = scd::load_image(pr_image);
    scd::PredictionRecord rec = scd::predict_sample(p, img, spleen, pr_id);
    ordered_json j = prediction_json(rec);
    std::cout << j.dump(2) << "\n";
    if (!pr_out.empty()) {
      fs::create_directories(pr_out);
      fs::path pj = fs::path(pr_out) / "prediction.json";
      std::ofstream out(pj);
      if (!out) throw scd::IoError("cannot write " + pj.string());
      out << j.dump(2) << '\n';
      write_run_json(pr_out, "predict", seed, cfg,
                     {{"model", pr_model}, {"image", pr_image}, {"spleen", pr_spleen},
                      {"id", pr_id}});
    }
  } else if (bench->parsed()) {
    scd::Dataset ds = load_or_generate(bench_data, cfg, seed);
    std::vector<scd::MethodVariant> variants;
    if (bench_variants.empty()) variants = scd::all_method_variants();
    else
      for (const auto& v : bench_variants) variants.push_back(scd::method_variant_from_string(v));
    std::vector<scd::SimilarityMode> modes;
    for (const auto& m : bench_modes) modes.push_back(scd::similarity_mode_from_string(m));
    auto reports = scd::run_benchmark(ds, variants, modes, cfg, seed);
    fs::create_directories(bench_out);
    for (const auto& rep : reports) {
      fs::path dir = bench_out;
      scd::write_report_csv(rep, dir / ("report_" + rep.tag + ".csv"));
      scd::write_summary_csv(rep, dir / ("summary_" + rep.tag + ".csv"));
      scd::write_auprc_csv(rep, dir / ("auprc_" + rep.tag + ".csv"));
      print_summary_table(rep);
    }
    write_run_json(bench_out, "bench", seed, cfg,
                   {{"data", bench_data.empty() ? "synthetic" : bench_data},
                    {"modes", bench_modes}});
  } else if (ablate->parsed()) {
    scd::Dataset ds = load_or_generate(ab_data, cfg, seed);
    scd::BenchReport rep = scd::run_ablation(ds, scd::default_ablation_sets(), cfg, seed);
    fs::create_directories(ab_out);
    fs::path dir = ab_out;
    scd::write_report_csv(rep, dir / "ablation_report.csv");
    scd::write_summary_csv(rep, dir / "ablation_summary.csv");
    scd::write_auprc_csv(rep, dir / "ablation_auprc.csv");
    print_summary_table(rep);
    write_run_json(ab_out, "ablate", seed, cfg,
                   {{"data", ab_data.empty() ? "synthetic" : ab_data}});
  } else if (exportg->parsed()) {
    scd::TrainedPipeline p = scd::load_pipeline(ex_model);
    fs::create_directories(ex_out);
    fs::path dir = ex_out;
    scd::export_graph(p.graph, dir / "edges.csv", dir / "nodes.csv");
    write_run_json(ex_out, "export-graph", seed, cfg, {{"model", ex_model}});
    std::cout << "wrote " << (dir / "edges.csv").string() << " and "
              << (dir / "nodes.csv").string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const scd::UsageError& e) {  // also ConfigError, ShapeError
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const scd::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const scd::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
