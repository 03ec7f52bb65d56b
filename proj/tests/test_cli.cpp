#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mecshield/mecshield.hpp"

using namespace mecshield;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mecshield_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int cli(const std::string& args) const {
    const std::string cmd = std::string(MECSHIELD_CLI) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // Two tight clusters: benign near 0.05, malicious near 0.95.
  void write_clusters(const std::string& name, std::size_t n, std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<TrainingSample> samples;
    for (std::size_t i = 0; i < n; ++i) {
      const bool bad = i % 2 == 1;
      std::vector<double> v(5);
      for (double& x : v) x = (bad ? 0.95 : 0.05) + rng.uniform(-0.03, 0.03);
      samples.push_back({std::move(v), bad ? Label::Malicious : Label::Benign});
    }
    std::ofstream os(path(name));
    write_vector_csv(os, samples);
  }

  void write_small_config(const std::string& name) const {
    std::ifstream in(std::string(MECSHIELD_SOURCE_DIR) + "/configs/reference.json");
    auto doc = nlohmann::json::parse(in);
    doc["duration"] = 20;
    doc["attack_levels"] = {100};
    doc["training"]["samples_per_agent"] = 2000;
    doc["som"]["width"] = 8;
    doc["som"]["height"] = 8;
    doc["output_dir"] = path("unused");
    for (auto& at : doc["attacks"]) {
      at["start"] = 5;
      at["duration"] = 5;
    }
    std::ofstream os(path(name));
    os << doc.dump(2);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, UsageErrorsAreConfigErrors) {
  EXPECT_EQ(cli(""), 1);
  EXPECT_EQ(cli("frobnicate"), 1);
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli("run"), 1);
  EXPECT_EQ(cli("run --config " + path("missing.json")), 1);
  std::ofstream(path("bad.json")) << "{\"schema_version\": 1, \"bogus\": true}";
  EXPECT_EQ(cli("run --config " + path("bad.json")), 1);
  EXPECT_NE(slurp(path("stderr.txt")).find("bogus"), std::string::npos);
}

TEST_F(Cli, TrainCountsEverySample) {
  write_clusters("train.csv", 10000, 1);
  ASSERT_EQ(cli("train --data " + path("train.csv") + " --out " + path("a")), 0);
  const auto summary = nlohmann::json::parse(slurp(path("a/training_summary.json")));
  EXPECT_EQ(summary["epoch"], 10000);
  EXPECT_EQ(summary["samples"], 10000);
  EXPECT_EQ(summary["dimension"], 5);
  std::ifstream in(path("a/som.json"));
  const auto saved = load_som(in);
  EXPECT_EQ(saved.map.epoch(), 10000u);
}

TEST_F(Cli, TrainIsReproducible) {
  write_clusters("train.csv", 3000, 2);
  ASSERT_EQ(cli("train --seed 5 --data " + path("train.csv") + " --out " + path("a")), 0);
  ASSERT_EQ(cli("train --seed 5 --data " + path("train.csv") + " --out " + path("b")), 0);
  ASSERT_EQ(cli("train --seed 6 --data " + path("train.csv") + " --out " + path("c")), 0);
  EXPECT_EQ(slurp(path("a/som.json")), slurp(path("b/som.json")));
  EXPECT_NE(slurp(path("a/som.json")), slurp(path("c/som.json")));
}

TEST_F(Cli, EmptyDatasetWritesNothing) {
  std::ofstream(path("empty.csv")) << "f0,f1,f2,f3,f4,label\n";
  EXPECT_EQ(cli("train --data " + path("empty.csv") + " --out " + path("a")), 2);
  EXPECT_FALSE(fs::exists(path("a/som.json")));
  EXPECT_NE(slurp(path("stderr.txt")).find("empty"), std::string::npos);
}

TEST_F(Cli, MalformedDataIsDataError) {
  std::ofstream(path("bad.csv")) << "f0,f1,label\n0.1,0.2,benign\n0.3,oops,malicious\n";
  EXPECT_EQ(cli("train --data " + path("bad.csv") + " --out " + path("a")), 2);
  EXPECT_NE(slurp(path("stderr.txt")).find("line 3"), std::string::npos);
  EXPECT_EQ(cli("train --data " + path("nope.csv") + " --out " + path("a")), 2);
}

TEST_F(Cli, EvalSeparableClusters) {
  write_clusters("train.csv", 4000, 3);
  write_clusters("test.csv", 1000, 4);
  ASSERT_EQ(cli("train --data " + path("train.csv") + " --out " + path("m")), 0);
  ASSERT_EQ(cli("eval --map " + path("m/som.json") + " --data " + path("test.csv") + " --out " + path("e")), 0);
  const auto j = nlohmann::json::parse(slurp(path("e/eval.json")));
  EXPECT_EQ(j["tp"], 500);
  EXPECT_EQ(j["tn"], 500);
  EXPECT_EQ(j["detection_rate"], 1.0);
  EXPECT_EQ(j["accuracy"], 1.0);

  std::ofstream(path("broken.json")) << "{\"format\": 1";
  EXPECT_EQ(cli("eval --map " + path("broken.json") + " --data " + path("test.csv")), 2);
}

TEST_F(Cli, RunIsDeterministic) {
  write_small_config("cfg.json");
  ASSERT_EQ(cli("run --config " + path("cfg.json") + " --out " + path("r1")), 0);
  ASSERT_EQ(cli("run --config " + path("cfg.json") + " --out " + path("r2")), 0);
  ASSERT_EQ(cli("run --config " + path("cfg.json") + " --seed 2 --scheme mecshield --out " + path("r3")), 0);
  const auto m1 = slurp(path("r1/metrics.csv"));
  EXPECT_EQ(m1, slurp(path("r2/metrics.csv")));
  EXPECT_EQ(slurp(path("r1/events.jsonl")), slurp(path("r2/events.jsonl")));
  std::size_t lines = 0;
  for (char c : m1) lines += c == '\n';
  EXPECT_EQ(lines, 4u);  // header + 3 schemes x 1 level
  const auto summary = nlohmann::json::parse(slurp(path("r1/summary.json")));
  EXPECT_EQ(summary["metrics_digest"], sha256_hex(m1));
  EXPECT_NE(slurp(path("r3/metrics.csv")), m1);
  EXPECT_EQ(cli("run --config " + path("cfg.json") + " --scheme warp --out " + path("r4")), 1);
}

TEST_F(Cli, GenWritesReadableTraffic) {
  write_small_config("cfg.json");
  ASSERT_EQ(cli("gen --config " + path("cfg.json") + " --level 50 --out " + path("g")), 0);
  const auto flows = load_flow_csv(path("g/traffic.csv"));
  EXPECT_FALSE(flows.empty());
  std::size_t malicious = 0;
  for (const auto& f : flows) malicious += f.truth_label == Label::Malicious;
  EXPECT_GT(malicious, 0u);
  EXPECT_LT(malicious, flows.size());
}
