#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "scd/dataset.hpp"

using namespace scd;
namespace fs = std::filesystem;

namespace {

constexpr const char* kCli = SCDGCN_CLI_PATH;

struct RunResult {
  int code = -1;
  std::string out;  // stdout + stderr
};

RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  fs::path cap = fs::temp_directory_path() / ("scd_cli_out_" + std::to_string(counter++) + ".txt");
  std::string cmd = env_prefix + "\"" + std::string(kCli) + "\" " + args + " > " +
                    cap.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(cap);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(cap);
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kFlags =
    "--patients 5 --total-samples 20 --classes 2 --height 64 --width 16 --noise 0.05 "
    "--chrome-epochs 3 --chrome-batch 8 --feat-epochs 3 --feat-batch 8 "
    "--f-fft 16 --target-features 6 --rfe-step 0.25 "
    "--gcn-epochs 30 --hidden 8 --gcn-dropout 0.1 --folds 2 --svm-steps 200";

// generate + train once; every case below reads from this world
struct CliWorld {
  fs::path root, gen_dir, train_dir, model;
  RunResult gen, train;
};

const CliWorld& world() {
  static CliWorld w = [] {
    CliWorld v;
    v.root = fs::temp_directory_path() / "scd_cli_world";
    fs::remove_all(v.root);
    fs::create_directories(v.root);
    v.gen_dir = v.root / "cohort";
    v.train_dir = v.root / "model";
    v.model = v.train_dir / "model.pgcn";
    v.gen = run_cli("generate --out " + v.gen_dir.string() + " " + kFlags);
    v.train = run_cli("train --data " + v.gen_dir.string() + " --out " + v.train_dir.string() +
                      " " + kFlags);
    return v;
  }();
  return w;
}

}  // namespace

TEST_CASE("usage errors exit with code 2, --help with 0") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("generate").code == 2);             // missing --out
  CHECK(run_cli("frobnicate --out x").code == 2);   // unknown subcommand
  CHECK(run_cli("generate --out /tmp/scd_cli_x --mode diagonal").code == 2);
  CHECK(run_cli("generate --out /tmp/scd_cli_x --terms spleen+banana " + kFlags).code == 2);
  CHECK(run_cli("generate --out /tmp/scd_cli_x --gcn-dropout 1.5 " + kFlags).code == 2);
}

TEST_CASE("generate writes a loadable cohort and a run manifest") {
  const CliWorld& w = world();
  REQUIRE(w.gen.code == 0);
  CHECK(w.gen.out.find("wrote 20 samples") != std::string::npos);
  REQUIRE(fs::exists(w.gen_dir / "manifest.csv"));
  CHECK(fs::exists(w.gen_dir / "images" / "s0000.png"));
  CHECK(fs::exists(w.gen_dir / "images" / "s0019.png"));

  Dataset ds = load_manifest(w.gen_dir / "manifest.csv");
  CHECK(ds.samples.size() == 20);
  CHECK(ds.num_classes == 2);

  auto run = nlohmann::json::parse(read_file(w.gen_dir / "run.json"));
  CHECK(run.at("command").get<std::string>() == "generate");
  CHECK(run.at("seed").get<uint64_t>() == 42);
  CHECK(run.at("config").at("gen").at("num_patients").get<int>() == 5);
  CHECK(run.at("format").get<std::string>() == "png");
}

TEST_CASE("train writes model.pgcn and run.json") {
  const CliWorld& w = world();
  REQUIRE(w.train.code == 0);
  CHECK(fs::exists(w.model));
  auto run = nlohmann::json::parse(read_file(w.train_dir / "run.json"));
  CHECK(run.at("command").get<std::string>() == "train");
  CHECK(run.at("data").get<std::string>() == w.gen_dir.string());
  CHECK(run.at("config").at("target_features").get<int>() == 6);
}

TEST_CASE("predict emits a JSON record and is deterministic") {
  const CliWorld& w = world();
  REQUIRE(w.train.code == 0);
  fs::path img = w.gen_dir / "images" / "s0007.png";
  fs::path out = w.root / "pred";
  std::string base = "predict --model " + w.model.string() + " --image " + img.string() +
                     " --spleen 7 --id q1";

  RunResult r1 = run_cli(base + " --out " + out.string());
  REQUIRE(r1.code == 0);
  auto j = nlohmann::json::parse(r1.out);
  CHECK(j.at("sample_id").get<std::string>() == "q1");
  CHECK(j.at("hypo_pct").get<double>() >= 0.0);
  CHECK(j.at("hyper_pct").get<double>() >= 0.0);
  int sev = j.at("severity").get<int>();
  CHECK(sev >= 0);
  CHECK(sev < 2);
  auto probs = j.at("probabilities").get<std::vector<double>>();
  REQUIRE(probs.size() == 2);
  CHECK(probs[0] + probs[1] == doctest::Approx(1.0).epsilon(1e-6));

  // --out writes the same record plus a run manifest
  auto file_j = nlohmann::json::parse(read_file(out / "prediction.json"));
  CHECK(file_j == j);
  auto run = nlohmann::json::parse(read_file(out / "run.json"));
  CHECK(run.at("command").get<std::string>() == "predict");
  CHECK(run.at("spleen").get<std::string>() == "7");

  RunResult r2 = run_cli(base);
  REQUIRE(r2.code == 0);
  CHECK(r2.out == r1.out);

  RunResult removed = run_cli("predict --model " + w.model.string() + " --image " +
                              img.string() + " --spleen removed");
  CHECK(removed.code == 0);
}

TEST_CASE("predict error paths map to the documented exit codes") {
  const CliWorld& w = world();
  REQUIRE(w.train.code == 0);
  fs::path img = w.gen_dir / "images" / "s0003.png";

  // bad spleen descriptor is a usage error even before any file is touched
  RunResult bad_spleen =
      run_cli("predict --model " + w.model.string() + " --image " + img.string() +
              " --spleen banana");
  CHECK(bad_spleen.code == 2);
  CHECK(run_cli("predict --model " + w.model.string() + " --image " + img.string() +
                " --spleen -3").code == 2);

  CHECK(run_cli("predict --model " + (w.root / "nope.pgcn").string() + " --image " +
                img.string() + " --spleen 7").code == 4);
  CHECK(run_cli("predict --model " + w.model.string() + " --image " +
                (w.root / "nope.png").string() + " --spleen 7").code == 4);

  fs::path garbage = w.root / "garbage.png";
  std::ofstream(garbage) << "this is not a png";
  CHECK(run_cli("predict --model " + w.model.string() + " --image " + garbage.string() +
                " --spleen 7").code == 3);
}

TEST_CASE("train on a malformed manifest is a data error") {
  const CliWorld& w = world();
  REQUIRE(w.gen.code == 0);
  fs::path broken = w.root / "broken";
  fs::create_directories(broken);
  std::ofstream(broken / "manifest.csv")
      << "sample_id,patient_id,image_file,spleen,hypo_pct,hyper_pct,severity\n"
      << "s0000,p00,images/s0000.png\n";  // truncated row
  CHECK(run_cli("train --data " + broken.string() + " --out " + (w.root / "b1").string() + " " +
                kFlags).code == 3);
  CHECK(run_cli("train --data " + (w.root / "no_such_dir").string() + " --out " +
                (w.root / "b2").string() + " " + kFlags).code == 4);
}

TEST_CASE("export-graph dumps the population graph") {
  const CliWorld& w = world();
  REQUIRE(w.train.code == 0);
  fs::path out = w.root / "graph";
  RunResult r = run_cli("export-graph --model " + w.model.string() + " --out " + out.string());
  REQUIRE(r.code == 0);

  std::ifstream edges(out / "edges.csv");
  REQUIRE(bool(edges));
  std::string line;
  std::getline(edges, line);
  CHECK(line == "src,dst,weight");
  int edge_rows = 0;
  while (std::getline(edges, line))
    if (!line.empty()) ++edge_rows;
  CHECK(edge_rows == 20 * 19 / 2);

  std::ifstream nodes(out / "nodes.csv");
  REQUIRE(bool(nodes));
  std::getline(nodes, line);
  CHECK(line == "sample_id,label,mask");
  int node_rows = 0;
  bool all_train = true;
  while (std::getline(nodes, line)) {
    if (line.empty()) continue;
    ++node_rows;
    if (line.find(",train") == std::string::npos) all_train = false;
  }
  CHECK(node_rows == 20);
  CHECK(all_train);  // a pipeline trains on every labeled node
}

TEST_CASE("bench writes per-mode CSVs and repeats byte-identically") {
  const CliWorld& w = world();
  REQUIRE(w.gen.code == 0);
  std::string common = "bench --data " + w.gen_dir.string() +
                       " --modes literal --variants SVM SCD_severity_GCN --seed 77 " + kFlags;

  fs::path out1 = w.root / "bench1";
  RunResult r1 = run_cli(common + " --out " + out1.string());
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("[literal]") != std::string::npos);
  CHECK(r1.out.find("SCD_severity_GCN") != std::string::npos);
  for (const char* f : {"report_literal.csv", "summary_literal.csv", "auprc_literal.csv",
                        "run.json"})
    CHECK(fs::exists(out1 / f));
  std::string summary = read_file(out1 / "summary_literal.csv");
  CHECK(summary.rfind("variant,metric,mean,std\n", 0) == 0);
  CHECK(summary.find("SCD_severity_GCN,accuracy,") != std::string::npos);
  CHECK(summary.find("ChromeNet,rmse_hypo,") != std::string::npos);

  fs::path out2 = w.root / "bench2";
  RunResult r2 = run_cli(common + " --out " + out2.string());
  REQUIRE(r2.code == 0);
  CHECK(read_file(out2 / "summary_literal.csv") == summary);
  CHECK(read_file(out2 / "report_literal.csv") == read_file(out1 / "report_literal.csv"));
  CHECK(read_file(out2 / "auprc_literal.csv") == read_file(out1 / "auprc_literal.csv"));
}

TEST_CASE("ablate writes the five default term subsets") {
  const CliWorld& w = world();
  REQUIRE(w.gen.code == 0);
  fs::path out = w.root / "ablate";
  RunResult r = run_cli("ablate --data " + w.gen_dir.string() + " --out " + out.string() +
                        " --seed 5 " + kFlags);
  REQUIRE(r.code == 0);
  std::string summary = read_file(out / "ablation_summary.csv");
  for (const char* name : {"spleen,", "spleen+hypo,", "spleen+hyper,", "hypo+hyper,",
                           "spleen+hypo+hyper,"})
    CHECK(summary.find(std::string("\n") + name) != std::string::npos);
  auto run = nlohmann::json::parse(read_file(out / "run.json"));
  CHECK(run.at("command").get<std::string>() == "ablate");
}

TEST_CASE("config file and SCDGCN_CONFIG env are honored, flags win") {
  const CliWorld& w = world();
  fs::path cfg_file = w.root / "cli.cfg";
  std::ofstream(cfg_file) << "seed=99\n";

  fs::path out1 = w.root / "cfg1";
  RunResult r1 = run_cli("generate --out " + out1.string() + " --config " + cfg_file.string() +
                         " " + kFlags);
  REQUIRE(r1.code == 0);
  auto j1 = nlohmann::json::parse(read_file(out1 / "run.json"));
  CHECK(j1.at("seed").get<uint64_t>() == 99);

  fs::path out2 = w.root / "cfg2";
  RunResult r2 = run_cli("generate --out " + out2.string() + " " + kFlags,
                         "SCDGCN_CONFIG=" + cfg_file.string() + " ");
  REQUIRE(r2.code == 0);
  auto j2 = nlohmann::json::parse(read_file(out2 / "run.json"));
  CHECK(j2.at("seed").get<uint64_t>() == 99);

  fs::path out3 = w.root / "cfg3";
  RunResult r3 = run_cli("generate --out " + out3.string() + " --seed 7 --config " +
                         cfg_file.string() + " " + kFlags);
  REQUIRE(r3.code == 0);
  auto j3 = nlohmann::json::parse(read_file(out3 / "run.json"));
  CHECK(j3.at("seed").get<uint64_t>() == 7);
}
