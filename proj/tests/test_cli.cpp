// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Drives the forgeloc executable end to end through a shell.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "forgeloc/config.hpp"
#include "forgeloc/errors.hpp"
#include "forgeloc/image_io.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

CliRun cli(const std::string& args, const fs::path& scratch) {
  const auto so = scratch / "stdout.txt";
  const auto se = scratch / "stderr.txt";
  const std::string cmd = std::string("'") + FORGELOC_CLI + "' " + args + " >'" + so.string() + "' 2>'" + se.string() + "'";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(so);
  r.err = slurp(se);
  return r;
}

std::vector<json> read_lines(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new testutil::TempDir("cli");
    auto r = cli("datagen --out '" + corpus().string() + "' --seed 5", root_->path());
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { delete root_; }
  static fs::path corpus() { return root_->path() / "corpus"; }
  static fs::path path(const std::string& name) { return root_->path() / name; }
  static std::string q(const fs::path& p) { return "'" + p.string() + "'"; }
  static CliRun run(const std::string& args) { return cli(args, root_->path()); }
  static testutil::TempDir* root_;
};
testutil::TempDir* Cli::root_ = nullptr;

}  // namespace

TEST_F(Cli, DatagenDeskDefaults) {
  auto records = read_lines(corpus() / "manifest.jsonl");
  ASSERT_EQ(records.size(), 6u * 16u);
  std::map<std::string, int> per_dataset;
  for (const auto& r : records) {
    ++per_dataset[r["dataset"].get<std::string>()];
    const auto ds = r["dataset"].get<std::string>();
    const std::size_t frames = ds[0] == 'V' ? 4u : 1u;
    EXPECT_EQ(r["frame_paths"].size(), frames) << r["id"];
    for (const char* key : {"id", "split", "kind", "recipe", "mask_path", "frame_paths", "encode_settings", "seed"})
      EXPECT_TRUE(r.contains(key)) << key;
  }
  for (const auto& [ds, n] : per_dataset) EXPECT_EQ(n, 16) << ds;
  auto rec = read_json(corpus() / "run_datagen.json");
  EXPECT_EQ(rec["seed"], 5);
  EXPECT_EQ(rec["profile"], "desk");
  for (const char* key : {"argv", "code_version", "torch_version", "created_utc", "config"})
    EXPECT_TRUE(rec.contains(key)) << key;
}

TEST_F(Cli, DatagenSameSeedSameManifest) {
  auto r = run("datagen --out " + q(path("again")) + " --seed 5 --datasets VPIM,ICMS");
  ASSERT_EQ(r.code, 0) << r.err;
  auto a = read_lines(corpus() / "manifest.jsonl");
  auto b = read_lines(path("again") / "manifest.jsonl");
  std::map<std::string, json> by_id;
  for (const auto& x : a) by_id[x["id"]] = x;
  ASSERT_EQ(b.size(), 32u);
  for (const auto& x : b) EXPECT_EQ(x, by_id[x["id"]]);
  for (const auto& x : b)
    for (const auto& f : x["frame_paths"])
      EXPECT_EQ(slurp(path("again") / f.get<std::string>()), slurp(corpus() / f.get<std::string>()));
}

TEST(CliConfig, FullProfileCounts) {
  auto full = forgeloc::RunConfig::for_profile("full");
  EXPECT_EQ(full.datagen.items.train, 3200);
  EXPECT_EQ(full.datagen.items.val, 520);
  EXPECT_EQ(full.datagen.items.test, 280);
  EXPECT_EQ(full.model.frame_height, 1080);
  auto desk = forgeloc::RunConfig::for_profile("desk");
  EXPECT_EQ(desk.datagen.items.total(), 16);
  EXPECT_EQ(desk.datagen.frames_per_video, 4);
  EXPECT_THROW(forgeloc::RunConfig::for_profile("laptop"), forgeloc::ConfigError);
  EXPECT_THROW(forgeloc::run_config_from_json(json{{"bogus", 1}}, "desk"), forgeloc::ConfigError);
  auto tuned = forgeloc::run_config_from_json(json{{"alpha", 0.3}, {"L", 5}}, "desk");
  EXPECT_DOUBLE_EQ(tuned.stage(1).weights.alpha, 0.3);
  EXPECT_EQ(tuned.model.variant.num_maps, 5);
}

TEST_F(Cli, TrainInferEvalBench) {
  auto r = run("train --corpus " + q(corpus()) + " --stage 1 --max-steps 2 --seed 3 --out " + q(path("train")));
  ASSERT_EQ(r.code, 0) << r.err;
  auto rec = read_json(path("train") / "run_train.json");
  EXPECT_EQ(rec["stage"], 1);
  EXPECT_EQ(rec["steps"], 2);
  const auto& s1 = rec["config"]["stages"]["1"];
  EXPECT_EQ(s1["epochs"], 6);
  EXPECT_EQ(s1["initial_lr"].get<double>(), 1e-4);
  EXPECT_EQ(s1["decay_rate"].get<double>(), 0.75);
  EXPECT_EQ(s1["decay_step"], 2);
  EXPECT_EQ(s1["datasets"], json{"VCMS"});
  ASSERT_TRUE(fs::exists(path("train") / "model.flck"));

  // infer on two authentic frames
  auto records = read_lines(corpus() / "manifest.jsonl");
  std::string inputs;
  int picked = 0;
  for (const auto& x : records)
    if (x["kind"] == "authentic" && x["dataset"] == "ICMS" && picked < 2) {
      inputs += " " + q(corpus() / x["frame_paths"][0].get<std::string>());
      ++picked;
    }
  r = run("infer --checkpoint " + q(path("train") / "model.flck") + " --input" + inputs + " --out " + q(path("infer")));
  ASSERT_EQ(r.code, 0) << r.err;
  auto results = read_lines(path("infer") / "results.jsonl");
  ASSERT_EQ(results.size(), 2u);
  for (const auto& x : results) {
    EXPECT_TRUE(x.contains("detection_score"));
    EXPECT_TRUE(x.contains("threshold_report"));
  }
  int masks = 0, maps = 0;
  for (const auto& e : fs::directory_iterator(path("infer") / "masks")) {
    ++masks;
    auto m = forgeloc::read_mask(e.path());
    EXPECT_EQ(m.height(), 256);
    EXPECT_EQ(m.width(), 384);
  }
  for (const auto& e : fs::directory_iterator(path("infer") / "maps")) maps += e.is_regular_file();
  EXPECT_EQ(masks, 2);
  EXPECT_EQ(maps, 2 * 3);

  r = run("eval --corpus " + q(corpus()) + " --predictor oracle --out " + q(path("eval")));
  ASSERT_EQ(r.code, 0) << r.err;
  auto metrics = read_json(path("eval") / "metrics.json");
  EXPECT_EQ(metrics["columns"], (json{"Det. mAP", "Det. ACC", "Loc. MCC", "Loc. F1"}));
  EXPECT_EQ(metrics["datasets"].size(), 6u);
  for (const auto& d : metrics["datasets"])
    for (const char* col : {"Det. mAP", "Det. ACC", "Loc. MCC", "Loc. F1"}) EXPECT_EQ(d[col].get<double>(), 1.0) << col;
  EXPECT_NE(r.out.find("Loc. F1"), std::string::npos);

  r = run("eval --corpus " + q(corpus()) + " --checkpoint " + q(path("train") / "model.flck") +
          " --split val --out " + q(path("eval-net")));
  ASSERT_EQ(r.code, 0) << r.err;

  r = run("bench --frames 100 --out " + q(path("bench")));
  ASSERT_EQ(r.code, 0) << r.err;
  auto bench = read_json(path("bench") / "bench.json");
  EXPECT_EQ(bench["frames"], 100);
  EXPECT_GT(bench["fps"].get<double>(), 0.0);
  EXPECT_FALSE(bench["hardware"].get<std::string>().empty());
}

TEST_F(Cli, ExitCodesAndErrorRecords) {
  auto r = run("infer --checkpoint " + q(path("missing.flck")) + " --input x.png --out " + q(path("e1")));
  EXPECT_EQ(r.code, 1);
  auto err = json::parse(r.err.substr(r.err.find('{')));
  EXPECT_EQ(err["exit_code"], 1);
  EXPECT_TRUE(err.contains("message"));

  EXPECT_EQ(run("frobnicate --out x").code, 1);
  EXPECT_EQ(run("train --corpus " + q(corpus()) + " --stage 9 --out " + q(path("e2"))).code, 1);

  // Invalid values are rejected before anything is written.
  r = run("train --corpus " + q(corpus()) + " --stage 1 --lr -1 --out " + q(path("e3")));
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("e3")));

  r = run("datagen --encode h264 --encoder /nonexistent/ffmpeg --out " + q(path("e4")));
  EXPECT_EQ(r.code, 3);
  err = json::parse(r.err.substr(r.err.find('{')));
  EXPECT_EQ(err["exit_code"], 3);
  EXPECT_FALSE(fs::exists(path("e4")));

  // A manifest whose files are gone is a runtime failure.
  fs::create_directories(path("hollow"));
  fs::copy_file(corpus() / "manifest.jsonl", path("hollow") / "manifest.jsonl");
  r = run("eval --corpus " + q(path("hollow")) + " --predictor oracle --out " + q(path("e5")));
  EXPECT_EQ(r.code, 2);
}
