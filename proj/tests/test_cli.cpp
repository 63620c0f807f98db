#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "osap/dataset.hpp"
#include "osap/mlp.hpp"

using namespace osap;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run(const std::string& args, const fs::path& capture = {}) {
  std::string cmd = std::string(OSAPCTL_PATH) + " " + args;
  if (!capture.empty()) cmd += " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("help enumerates config keys with defaults") {
  TempDir dir("osap_cli_help");
  CHECK(run("--help", dir.path / "help.txt") == 0);
  const std::string help = read_file(dir.path / "help.txt");
  for (const char* key : {"--seed", "--workers", "--model_id", "--solver_theta",
                          "--solver_eps_p", "--solver_cap_p"}) {
    CHECK(help.find(key) != std::string::npos);
  }
  CHECK(help.find("pendulum") != std::string::npos);  // captured default

  CHECK(run("train --help", dir.path / "train_help.txt") == 0);
  const std::string train_help = read_file(dir.path / "train_help.txt");
  for (const char* key : {"--hidden", "--lr0", "--epochs", "--batch", "--dropout"}) {
    CHECK(train_help.find(key) != std::string::npos);
  }
  CHECK(train_help.find("8,32,64,64,32,16") != std::string::npos);
}

TEST_CASE("dataset command is reproducible byte for byte") {
  TempDir dir("osap_cli_dataset");
  const std::string common =
      "dataset --model_id scalar --x_step 1.5 --r_step 3.0 --seed 5";
  CHECK(run(common + " --out " + (dir.path / "a").string(), dir.path / "log_a.txt") == 0);
  CHECK(run(common + " --workers 3 --out " + (dir.path / "b").string(),
            dir.path / "log_b.txt") == 0);

  for (const char* name : {"dataset.bin", "dataset.csv", "dataset_manifest.json"}) {
    CAPTURE(name);
    CHECK(read_file(dir.path / "a" / name) == read_file(dir.path / "b" / name));
  }

  const TrainingDataset ds = load((dir.path / "a" / "dataset.bin").string());
  CHECK(ds.samples.size() == 5);  // [-3,3] step 1.5
  CHECK(ds.meta.model_id == "scalar");
}

TEST_CASE("train and simulate round trip through files") {
  TempDir dir("osap_cli_train");
  CHECK(run("dataset --model_id scalar --x_step 0.5 --r_step 0.5 --seed 3 --out " +
                (dir.path / "ds").string(),
            dir.path / "log1.txt") == 0);

  const std::string train_cmd = "train --dataset " + (dir.path / "ds" / "dataset.bin").string() +
                                " --hidden 6 --epochs 40 --batch 16 --dropout 0 --seed 3";
  CHECK(run(train_cmd + " --out " + (dir.path / "t1").string(), dir.path / "log2.txt") == 0);
  CHECK(run(train_cmd + " --out " + (dir.path / "t2").string(), dir.path / "log3.txt") == 0);
  CHECK(read_file(dir.path / "t1" / "checkpoint.bin") ==
        read_file(dir.path / "t2" / "checkpoint.bin"));
  CHECK(read_file(dir.path / "t1" / "loss.csv") == read_file(dir.path / "t2" / "loss.csv"));

  const MlpParameters params = load_checkpoint((dir.path / "t1" / "checkpoint.bin").string());
  CHECK(params.n == 1);
  CHECK(params.p == 1);

  // the trained checkpoint drives the nn controller from the CLI
  CHECK(run("simulate --model_id scalar --controller nn --checkpoint " +
                (dir.path / "t1" / "checkpoint.bin").string() +
                " --x0 0.4 --steps 10 --out " + (dir.path / "sim").string(),
            dir.path / "log4.txt") == 0);
  CHECK(fs::exists(dir.path / "sim" / "trace.csv"));
  CHECK(fs::exists(dir.path / "sim" / "trace.jsonl"));
}

TEST_CASE("growing sweep keeps the smallest adequate network") {
  TempDir dir("osap_cli_grow");
  CHECK(run("dataset --model_id scalar --x_step 0.25 --r_step 0.5 --seed 3 --out " +
                (dir.path / "ds").string(),
            dir.path / "log1.txt") == 0);
  CHECK(run("train --dataset " + (dir.path / "ds" / "dataset.bin").string() +
                " --grow --grow_threshold 0.5 --epochs 300 --batch 16 --dropout 0 --seed 3"
                " --out " + (dir.path / "t").string(),
            dir.path / "log2.txt") == 0);
  const std::string log = read_file(dir.path / "log2.txt");
  CHECK(log.find("ladder 8:") != std::string::npos);
  // the sweep stops at the first rung under the threshold (the third here)
  const MlpParameters params = load_checkpoint((dir.path / "t" / "checkpoint.bin").string());
  REQUIRE(params.arch.hidden.size() == 3);
  CHECK(params.arch.hidden[0] == 8);
  CHECK(params.arch.hidden[1] == 32);
  CHECK(params.arch.hidden[2] == 16);
}

TEST_CASE("simulate emits identical traces on reruns") {
  TempDir dir("osap_cli_sim");
  const std::string cmd = "simulate --model_id scalar --x0 0.7 --steps 15 --seed 1";
  CHECK(run(cmd + " --out " + (dir.path / "a").string(), dir.path / "la.txt") == 0);
  CHECK(run(cmd + " --out " + (dir.path / "b").string(), dir.path / "lb.txt") == 0);
  for (const char* name : {"trace.csv", "trace.jsonl", "phase.csv", "dv.csv",
                           "simulate_manifest.json"}) {
    CAPTURE(name);
    CHECK(read_file(dir.path / "a" / name) == read_file(dir.path / "b" / name));
  }
}

TEST_CASE("bench writes the theta table and the trend gate passes on the scalar model") {
  TempDir dir("osap_cli_bench");
  CHECK(run("bench --model_id scalar --controllers osap --thetas 0.02,0.1 --count 4 "
            "--steps 10 --box 0.8 --check --out " +
                dir.path.string(),
            dir.path / "log.txt") == 0);
  const std::string csv = read_file(dir.path / "bench.csv");
  CHECK(csv.find("theta,mean_pi_osap") != std::string::npos);
  CHECK(read_file(dir.path / "log.txt").find("PI trend holds") != std::string::npos);
}

TEST_CASE("roa and bounds commands produce their reports") {
  TempDir dir("osap_cli_roa");
  CHECK(run("roa --model_id scalar --controller osap --step 1.5 --horizon 15 --radius 0.1 "
            "--out " +
                dir.path.string(),
            dir.path / "log.txt") == 0);
  CHECK(fs::exists(dir.path / "roa.csv"));
  CHECK(fs::exists(dir.path / "roa.bin"));

  CHECK(run("dataset --model_id scalar --x_step 1.0 --r_step 1.0 --out " +
                (dir.path / "ds").string(),
            dir.path / "log2.txt") == 0);
  CHECK(run("bounds --model_id scalar --density 11 --dataset " +
                (dir.path / "ds" / "dataset.bin").string() + " --out " + dir.path.string(),
            dir.path / "log3.txt") == 0);
  const std::string bounds = read_file(dir.path / "bounds.json");
  CHECK(bounds.find("\"sigma\"") != std::string::npos);
  CHECK(bounds.find("\"theta_min\"") != std::string::npos);
}

TEST_CASE("compare emits the per-axis effort table") {
  TempDir dir("osap_cli_compare");
  CHECK(run("compare --steps 25 --out " + dir.path.string(), dir.path / "log.txt") == 0);
  const std::string csv = read_file(dir.path / "compare.csv");
  CHECK(csv.find("method,X,Y,Z") != std::string::npos);
  CHECK(csv.find("proposed") != std::string::npos);
  CHECK(csv.find("lqr") != std::string::npos);
}

TEST_CASE("config errors exit with code 2 and name the offender") {
  TempDir dir("osap_cli_err");
  CHECK(run("simulate --model_id no-such-model --x0 0 --out " + dir.path.string(),
            dir.path / "log1.txt") == 2);
  CHECK(read_file(dir.path / "log1.txt").find("no-such-model") != std::string::npos);

  {
    std::ofstream cfg(dir.path / "bad.ini");
    cfg << "definitely_not_a_key=1\n";
  }
  CHECK(run("--config " + (dir.path / "bad.ini").string() + " simulate --model_id scalar"
            " --x0 0.1 --out " + dir.path.string(),
            dir.path / "log2.txt") == 2);
  CHECK(read_file(dir.path / "log2.txt").find("definitely_not_a_key") != std::string::npos);

  // numeric failures exit 3: an inadmissible reference has no equilibrium
  CHECK(run("simulate --model_id scalar --x0 0.1 --r 9.0 --out " + dir.path.string(),
            dir.path / "log3.txt") == 3);
}

TEST_CASE("bundled experiment fixtures parse") {
  TempDir dir("osap_cli_fixtures");
  const fs::path configs(OSAP_CONFIG_DIR);
  CHECK(run("--config " + (configs / "scalar-toy.cfg").string() + " dataset --out " +
                dir.path.string(),
            dir.path / "log.txt") == 0);
  const TrainingDataset ds = load((dir.path / "dataset.bin").string());
  CHECK(ds.samples.size() == 9);

  CHECK(run("--config " + (configs / "pendulum-fig5.cfg").string() +
                " simulate --steps 5 --out " + (dir.path / "fig5").string(),
            dir.path / "log2.txt") == 0);
  CHECK(fs::exists(dir.path / "fig5" / "dv.csv"));
}

TEST_SUITE_END();
