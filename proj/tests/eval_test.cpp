#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rppg/eval.hpp"
#include "synth_helpers.hpp"
#include "test_util.hpp"

using namespace rppg;
using testutil::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an rppg::Error";
  return ErrorCode::IoError;
}

GroundTruth gt_of(std::initializer_list<GtSample> s) { return {s}; }

HrSeries windows_of(std::initializer_list<HrEstimate> e, double length) { return {e, {length, length}}; }

}  // namespace

TEST(Align, HalfOpenWindows) {
  const auto gt = gt_of({{0, 70}, {1, 72}, {2, 74}, {3, 100}});
  const std::vector<TimeInterval> w{{0, 3}};
  EXPECT_DOUBLE_EQ(align_groundtruth(gt, w)[0], 72.0);
  const std::vector<TimeInterval> later{{3, 4}};
  EXPECT_DOUBLE_EQ(align_groundtruth(gt, later)[0], 100.0);
  const std::vector<TimeInterval> empty{{10, 20}};
  EXPECT_EQ(code_of([&] { align_groundtruth(gt, empty); }), ErrorCode::EmptyWindowGt);
}

TEST(Align, MatchesBruteForce) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> bpm(40, 200), start(0, 50);
  for (int trial = 0; trial < 200; ++trial) {
    GroundTruth gt;
    std::vector<std::pair<double, double>> pairs;
    for (int k = 0; k < 70; ++k) {
      gt.samples.push_back({double(k), bpm(rng)});
      pairs.emplace_back(k, gt.samples.back().bpm);
    }
    std::vector<TimeInterval> w;
    std::vector<std::pair<double, double>> wp;
    for (int j = 0; j < 5; ++j) {
      const double s = std::floor(start(rng) * 2) / 2;
      w.push_back({s, s + 10});
      wp.emplace_back(s, s + 10);
    }
    const auto got = align_groundtruth(gt, w);
    const auto ref = oracle::brute_align(pairs, wp);
    for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(got[j], ref[j], 1e-12 * ref[j]);
  }
}

TEST(Mae, Examples) {
  const std::vector<double> a{70, 75, 80}, b{72, 75, 78};
  EXPECT_DOUBLE_EQ(mae(a, b), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(mae(b, a), 4.0 / 3.0);
  const std::vector<double> shorter{1, 2}, none;
  EXPECT_EQ(code_of([&] { mae(a, shorter); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { mae(none, none); }), ErrorCode::EmptyInput);
}

TEST(SessionMetrics, Examples) {
  const auto gt = gt_of({{0, 72}, {5, 72}, {10, 78}, {15, 78}});
  const auto series = windows_of({{0, 10, 70}, {10, 20, 77}}, 10);
  // Session means 73.5 vs 75.
  EXPECT_DOUBLE_EQ(sub51_error(series, gt), 1.5);
  EXPECT_DOUBLE_EQ(sub52_mae(series, gt), 1.5);

  const auto gt2 = gt_of({{0, 72}, {10, 77}});
  const auto s2 = windows_of({{0, 10, 70}, {10, 20, 80}}, 10);
  EXPECT_DOUBLE_EQ(sub52_mae(s2, gt2), 2.5);
  EXPECT_DOUBLE_EQ(sub51_error(s2, gt2), 0.5);

  const auto gt3 = gt_of({{0, 70}, {10, 70}, {20, 70}});
  const auto s3 = windows_of({{0, 10, 72.5}, {10, 20, 73.5}, {20, 30, 74.5}}, 10);
  EXPECT_DOUBLE_EQ(sub51_error(s3, gt3), 3.5);
}

TEST(SessionMetrics, SessionErrorNeverExceedsWindowMae) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> bpm(40, 200);
  for (int trial = 0; trial < 500; ++trial) {
    GroundTruth gt;
    for (int k = 0; k < 60; ++k) gt.samples.push_back({double(k), bpm(rng)});
    HrSeries s{{}, {10, 10}};
    for (int w = 0; w < 6; ++w) s.estimates.push_back({10.0 * w, 10.0 * w + 10, bpm(rng)});
    EXPECT_LE(sub51_error(s, gt), sub52_mae(s, gt) + 1e-12);
  }
}

TEST(Dataset, Aggregate) {
  const std::vector<double> two{8, 10}, one{7.5}, none;
  EXPECT_DOUBLE_EQ(dataset_aggregate(two), 9.0);
  EXPECT_DOUBLE_EQ(dataset_aggregate(one), 7.5);
  EXPECT_EQ(code_of([&] { dataset_aggregate(none); }), ErrorCode::EmptyInput);
}

TEST(Metrics, MatchBruteForce) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> bpm(40, 200);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + rng() % 40;
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = bpm(rng);
    for (auto& v : b) v = bpm(rng);
    const double ref = oracle::brute_mae(a, b);
    EXPECT_NEAR(mae(a, b), ref, 1e-12 * std::max(ref, 1.0));
    EXPECT_NEAR(dataset_aggregate(a), oracle::naive_mean(a), 1e-12 * oracle::naive_mean(a));
  }
}

TEST(GroundTruthFile, LoadsAndRejects) {
  TempDir dir;
  testutil::write_file(dir / "gt.csv", "t,bpm\n0,72.000\n1,73.5\n");
  const auto gt = load_groundtruth(dir / "gt.csv");
  ASSERT_EQ(gt.samples.size(), 2u);
  EXPECT_DOUBLE_EQ(gt.samples[1].bpm, 73.5);

  auto code = [&](const std::string& text) {
    testutil::write_file(dir / "bad.csv", text);
    return code_of([&] { load_groundtruth(dir / "bad.csv"); });
  };
  EXPECT_EQ(code("t,bpm\n0,300\n"), ErrorCode::MalformedCsv);
  EXPECT_EQ(code("t,bpm\n0,abc\n"), ErrorCode::MalformedCsv);
  EXPECT_EQ(code("time,bpm\n0,72\n"), ErrorCode::MalformedCsv);
  EXPECT_EQ(code("t,bpm\n1,72\n1,72\n"), ErrorCode::NonMonotonicIndices);
  EXPECT_EQ(code_of([&] { load_groundtruth(dir / "missing.csv"); }), ErrorCode::MissingFile);
}

TEST(Protocols, Lengths) {
  EXPECT_EQ(protocol_lengths("5.1"), (std::vector<double>{5, 10, 15, 20}));
  EXPECT_EQ(protocol_lengths("5.2"), (std::vector<double>{5, 7, 9, 11, 13, 15, 17, 19, 20}));
  EXPECT_EQ(code_of([] { protocol_lengths("6"); }), ErrorCode::InvalidConfig);
}

namespace {

SweepSession make_session(const std::string& id, double bpm, double duration) {
  SynthConfig config;
  config.hr_profile = HrProfile::constant(bpm);
  config.duration = duration;
  LoadedSession s;
  s.id = id;
  s.trace = testutil::condition_synthetic(config);
  s.combine = CombineMethod::chrom;
  return {std::move(s), testutil::synthetic_groundtruth(config), "rgb"};
}

}  // namespace

TEST(Sweep, OneSessionOneLength) {
  const std::vector<SweepSession> sessions{make_session("a", 72, 30)};
  const std::vector<double> lengths{10};
  const auto report = sweep(sessions, lengths);
  ASSERT_EQ(report.per_session.size(), 1u);
  ASSERT_EQ(report.dataset.size(), 1u);
  EXPECT_EQ(report.per_session[0].n_windows, 3u);
  EXPECT_LE(report.per_session[0].sub52_bpm, 1.5);
  EXPECT_EQ(report.dataset[0].sub52_mae, report.per_session[0].sub52_bpm);
}

TEST(Sweep, FailuresAreExcludedAndReportIsDeterministic) {
  const std::vector<SweepSession> sessions{make_session("short", 72, 12), make_session("long", 90, 40)};
  const std::vector<double> lengths{5, 20};
  const auto report = sweep(sessions, lengths);
  ASSERT_EQ(report.failures.size(), 1u);
  EXPECT_EQ(report.failures[0].session, "short");
  EXPECT_EQ(report.failures[0].code, ErrorCode::SessionTooShort);
  ASSERT_EQ(report.per_session.size(), 3u);
  EXPECT_EQ(report.per_session[0].session, "long");
  for (const auto& d : report.dataset) {
    EXPECT_EQ(d.n_sessions, d.window_s == 20 ? 1u : 2u);
  }
  const auto again = sweep(sessions, lengths);
  EXPECT_EQ(report_csv(report), report_csv(again));
  EXPECT_EQ(report_json(report).dump(), report_json(again).dump());
  const std::vector<SweepSession> reversed{sessions[1], sessions[0]};
  EXPECT_EQ(report_csv(sweep(reversed, lengths)), report_csv(report));
  EXPECT_NE(report_csv(report).find("failed,channel"), std::string::npos);
}

TEST(Sweep, TablePivot) {
  const std::vector<SweepSession> sessions{make_session("a", 72, 30)};
  const std::vector<double> lengths{5, 10};
  const auto table = sweep_table_csv(sweep(sessions, lengths), "rgb", lengths);
  EXPECT_NE(table.find("metric,5,10\n"), std::string::npos);
  EXPECT_NE(table.find("sub51_mae_bpm,"), std::string::npos);
}
