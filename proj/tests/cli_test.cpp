#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rppg/csv.hpp"
#include "test_util.hpp"

using testutil::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run rppg_cli(const std::string& args, const TempDir& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("cd '") + dir.path().string() + "' && '" + RPPG_CLI_PATH + "' " + args + " >'" +
                          out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testutil::read_file(out);
  r.err = testutil::read_file(err);
  return r;
}

std::vector<std::vector<std::string>> rows(const std::filesystem::path& path) {
  std::istringstream in(testutil::read_file(path));
  std::vector<std::vector<std::string>> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(rppg::csv::split(line));
  }
  return out;
}

/// Shared fixture sessions rendered once for the whole suite.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    ASSERT_EQ(rppg_cli("synth --out s72 --hr 72", *dir_).code, 0);
    ASSERT_EQ(rppg_cli("synth --out s90 --hr 90 --duration 40", *dir_).code, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static TempDir* dir_;
};

TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, SynthWritesSession) {
  const auto& d = *dir_;
  for (const char* f : {"manifest.json", "frames.raw", "boxes.csv", "groundtruth.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(d / "s72" / f)) << f;
  }
  EXPECT_EQ(std::filesystem::file_size(d / "s72" / "frames.raw"), 64u * 64u * 3u * 1800u);
  const auto manifest = nlohmann::json::parse(testutil::read_file(d / "s72" / "manifest.json"));
  EXPECT_EQ(manifest["frame_count"], 1800);
  EXPECT_EQ(manifest["pixel_format"], "rgb8");

  ASSERT_EQ(rppg_cli("synth --out step --profile step:70,100,30", d).code, 0);
  const auto gt = rows(d / "step" / "groundtruth.csv");
  EXPECT_EQ(gt[30], (std::vector<std::string>{"29", "70.000"}));
  EXPECT_EQ(gt[31], (std::vector<std::string>{"30", "100.000"}));
}

TEST_F(Cli, SynthRejectsOutOfRangeRate) {
  const auto r = rppg_cli("synth --out bad --hr 500", *dir_);
  EXPECT_EQ(r.code, 1);
  const auto err = nlohmann::json::parse(r.err);
  EXPECT_EQ(err["error"], "InvalidConfig");
  EXPECT_NE(err["message"].get<std::string>().find("240"), std::string::npos);
  EXPECT_EQ(rppg_cli("synth --out bad --hr 72 --profile constant:72", *dir_).code, 1);
  EXPECT_EQ(rppg_cli("synth", *dir_).code, 1);
}

TEST_F(Cli, EstimateWindows) {
  const auto& d = *dir_;
  ASSERT_EQ(rppg_cli("estimate s72 --window 10 --out e10 --plot-data", d).code, 0);
  const auto est = rows(d / "e10" / "estimates.csv");
  ASSERT_EQ(est.size(), 7u);
  EXPECT_EQ(est[0], (std::vector<std::string>{"window_start_s", "window_end_s", "bpm"}));
  for (std::size_t i = 1; i < est.size(); ++i) EXPECT_NEAR(std::stod(est[i][2]), 72.0, 1.5);
  const auto summary = nlohmann::json::parse(testutil::read_file(d / "e10" / "summary.json"));
  EXPECT_EQ(summary["n_windows"], 6);
  EXPECT_EQ(summary["combine"], "chrom");
  EXPECT_NEAR(summary["session_mean_bpm"].get<double>(), 72.0, 1.5);
  EXPECT_EQ(rows(d / "e10" / "gt_vs_estimate.csv").size(), 7u);

  ASSERT_EQ(rppg_cli("estimate s72 --window 10 --hop 2 --out e2", d).code, 0);
  EXPECT_EQ(rows(d / "e2" / "estimates.csv").size(), 27u);

  EXPECT_EQ(rppg_cli("estimate s72 --window 1 --out bad", d).code, 1);
  EXPECT_EQ(rppg_cli("estimate s72 --window 10 --hop 20 --out bad", d).code, 1);
  EXPECT_EQ(rppg_cli("estimate s72 --band 2:1 --out bad", d).code, 1);
  EXPECT_EQ(rppg_cli("estimate s72 --combine sideways --out bad", d).code, 1);
  EXPECT_EQ(nlohmann::json::parse(rppg_cli("estimate s72 --window 90 --out bad", d).err)["error"], "SessionTooShort");
}

TEST_F(Cli, MissingInputs) {
  const auto& d = *dir_;
  ASSERT_EQ(rppg_cli("synth --out nobox --hr 72 --duration 20", d).code, 0);
  std::filesystem::remove(d / "nobox" / "boxes.csv");
  const auto r = rppg_cli("estimate nobox --out bad", d);
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "MissingFile");
  EXPECT_EQ(rppg_cli("estimate nowhere --out bad", d).code, 1);
}

TEST_F(Cli, EvaluatePerfectEstimates) {
  const auto& d = *dir_;
  testutil::write_file(d / "perfect.csv", "window_start_s,window_end_s,bpm\n0,10,72\n10,20,72\n20,30,72\n");
  ASSERT_EQ(rppg_cli("evaluate --estimates perfect.csv --groundtruth s72/groundtruth.csv --out ev0", d).code, 0);
  const auto report = nlohmann::json::parse(testutil::read_file(d / "ev0" / "report.json"));
  EXPECT_EQ(report["sessions"][0]["sub51_bpm"], 0.0);
  EXPECT_EQ(report["sessions"][0]["sub52_bpm"], 0.0);

  testutil::write_file(d / "short_gt.csv", "t,bpm\n0,72\n1,72\n");
  const auto r = rppg_cli("evaluate --estimates perfect.csv --groundtruth short_gt.csv --out ev1", d);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("EmptyWindowGt"), std::string::npos);
}

TEST_F(Cli, EvaluateSession) {
  const auto& d = *dir_;
  ASSERT_EQ(rppg_cli("evaluate s72 --window 10 --out ev", d).code, 0);
  const auto report = nlohmann::json::parse(testutil::read_file(d / "ev" / "report.json"));
  ASSERT_EQ(report["sessions"].size(), 1u);
  EXPECT_EQ(report["sessions"][0]["session"], "s72");
  EXPECT_EQ(report["sessions"][0]["channel"], "rgb");
  EXPECT_LE(report["sessions"][0]["sub52_bpm"].get<double>(), 1.5);
  EXPECT_TRUE(std::filesystem::exists(d / "ev" / "report.csv"));
}

TEST_F(Cli, SweepProtocols) {
  const auto& d = *dir_;
  ASSERT_EQ(rppg_cli("sweep s72 --protocol 5.1 --out sw1", d).code, 0);
  auto table = rows(d / "sw1" / "table_rgb.csv");
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[0], (std::vector<std::string>{"metric", "5", "10", "15", "20"}));

  ASSERT_EQ(rppg_cli("sweep s72 --protocol 5.2 --out sw2", d).code, 0);
  table = rows(d / "sw2" / "table_rgb.csv");
  EXPECT_EQ(table[0].size(), 10u);

  ASSERT_EQ(rppg_cli("sweep s72 s90 --lengths 10 --jobs 2 --out sw3", d).code, 0);
  const auto report = nlohmann::json::parse(testutil::read_file(d / "sw3" / "sweep.json"));
  ASSERT_EQ(report["sessions"].size(), 2u);
  const double a = report["sessions"][0]["sub52_bpm"], b = report["sessions"][1]["sub52_bpm"];
  EXPECT_DOUBLE_EQ(report["dataset"][0]["sub52_mae_bpm"].get<double>(), (a + b) / 2.0);
  EXPECT_EQ(report["dataset"][0]["n_sessions"], 2);
  EXPECT_EQ(rppg_cli("sweep s72 --protocol 7 --out bad", d).code, 1);
}

TEST_F(Cli, OutputsAreIdempotent) {
  const auto& d = *dir_;
  ASSERT_EQ(rppg_cli("estimate s72 --window 5 --out i1", d).code, 0);
  ASSERT_EQ(rppg_cli("estimate s72 --window 5 --out i2", d).code, 0);
  EXPECT_EQ(testutil::read_file(d / "i1" / "estimates.csv"), testutil::read_file(d / "i2" / "estimates.csv"));
  EXPECT_EQ(testutil::read_file(d / "i1" / "summary.json"), testutil::read_file(d / "i2" / "summary.json"));
  ASSERT_EQ(rppg_cli("sweep s72 s90 --lengths 5,10 --out j1", d).code, 0);
  ASSERT_EQ(rppg_cli("sweep s90 s72 --lengths 5,10 --jobs 2 --out j2", d).code, 0);
  for (const char* f : {"sweep.csv", "sweep.json", "table_rgb.csv"}) {
    EXPECT_EQ(testutil::read_file(d / "j1" / f), testutil::read_file(d / "j2" / f)) << f;
  }
  ASSERT_EQ(rppg_cli("synth --out r1 --hr 80 --noise 2 --seed 4 --duration 5", d).code, 0);
  ASSERT_EQ(rppg_cli("synth --out r2 --hr 80 --noise 2 --seed 4 --duration 5", d).code, 0);
  EXPECT_EQ(testutil::read_file(d / "r1" / "frames.raw"), testutil::read_file(d / "r2" / "frames.raw"));
}

TEST_F(Cli, MonoSessionUsesNirLabelAndIntensity) {
  const auto& d = *dir_;
  ASSERT_EQ(rppg_cli("synth --out mono --hr 72 --mono --duration 30", d).code, 0);
  ASSERT_EQ(rppg_cli("estimate mono --out m", d).code, 0);
  EXPECT_EQ(nlohmann::json::parse(testutil::read_file(d / "m" / "summary.json"))["combine"], "intensity");
  ASSERT_EQ(rppg_cli("evaluate mono --out mev", d).code, 0);
  EXPECT_EQ(nlohmann::json::parse(testutil::read_file(d / "mev" / "report.json"))["sessions"][0]["channel"], "nir");
}
