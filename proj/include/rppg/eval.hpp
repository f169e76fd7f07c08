#pragma once

// Evaluation against 1 Hz reference heart rate: per-window alignment, the
// session-mean error and the per-window MAE protocols, dataset aggregation,
// and window-length sweeps.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rppg/csv.hpp"
#include "rppg/error.hpp"
#include "rppg/pipeline.hpp"
#include "rppg/spectral.hpp"

namespace rppg {

struct GtSample {
  double t = 0.0;    // seconds
  double bpm = 0.0;
};

struct GroundTruth {
  std::vector<GtSample> samples;
};

inline void validate(const GroundTruth& gt) {
  for (std::size_t i = 0; i < gt.samples.size(); ++i) {
    const auto& s = gt.samples[i];
    if (!(s.bpm > 20.0 && s.bpm < 250.0)) {
      throw Error(ErrorCode::MalformedCsv, "groundtruth bpm " + std::to_string(s.bpm) + " outside (20, 250)");
    }
    if (i > 0 && !(s.t > gt.samples[i - 1].t)) {
      throw Error(ErrorCode::NonMonotonicIndices, "groundtruth timestamps must strictly increase");
    }
  }
}

inline GroundTruth load_groundtruth(const std::filesystem::path& path) {
  const auto table = csv::read(path, {"t", "bpm"});
  GroundTruth gt;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = path.string() + ":" + std::to_string(table.line_numbers[i]);
    gt.samples.push_back({csv::to_double(table.rows[i][0], where), csv::to_double(table.rows[i][1], where)});
  }
  validate(gt);
  return gt;
}

struct TimeInterval {
  double start = 0.0;
  double end = 0.0;
};

inline std::vector<TimeInterval> window_intervals(const HrSeries& series) {
  std::vector<TimeInterval> out;
  out.reserve(series.estimates.size());
  for (const auto& e : series.estimates) out.push_back({e.window_start, e.window_end});
  return out;
}

namespace detail {

/// Mean that returns v exactly when every value is v.
inline double stable_mean(std::span<const double> values) {
  const double first = values.front();
  double offset = 0.0;
  for (const double v : values) offset += v - first;
  return first + offset / static_cast<double>(values.size());
}

}  // namespace detail

/// Mean reference bpm inside each half-open window [start, end).
inline std::vector<double> align_groundtruth(const GroundTruth& gt, std::span<const TimeInterval> windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    std::vector<double> inside;
    for (const auto& s : gt.samples) {
      if (s.t >= windows[w].start && s.t < windows[w].end) inside.push_back(s.bpm);
    }
    if (inside.empty()) {
      throw Error(ErrorCode::EmptyWindowGt, fmt::format("window {} [{}, {}) s has no groundtruth samples", w,
                                                        windows[w].start, windows[w].end));
    }
    out.push_back(detail::stable_mean(inside));
  }
  return out;
}

inline double mae(std::span<const double> estimated, std::span<const double> reference) {
  if (estimated.size() != reference.size()) {
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} estimates vs {} references", estimated.size(),
                                                       reference.size()));
  }
  if (estimated.empty()) throw Error(ErrorCode::EmptyInput, "mae of empty lists");
  double sum = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) sum += std::abs(estimated[i] - reference[i]);
  return sum / static_cast<double>(estimated.size());
}

/// |mean estimate - mean aligned reference| for one session.
inline double sub51_error(const HrSeries& series, const GroundTruth& gt) {
  const auto windows = window_intervals(series);
  const auto reference = align_groundtruth(gt, windows);
  return std::abs(session_mean(series) - detail::stable_mean(reference));
}

/// Mean over windows of |estimate - aligned reference|.
inline double sub52_mae(const HrSeries& series, const GroundTruth& gt) {
  const auto windows = window_intervals(series);
  const auto reference = align_groundtruth(gt, windows);
  std::vector<double> estimated;
  estimated.reserve(series.estimates.size());
  for (const auto& e : series.estimates) estimated.push_back(e.bpm);
  return mae(estimated, reference);
}

/// Unweighted mean across sessions.
inline double dataset_aggregate(std::span<const double> per_session) {
  if (per_session.empty()) throw Error(ErrorCode::EmptyInput, "no sessions to aggregate");
  return detail::stable_mean(per_session);
}

// ---------------------------------------------------------------------------
// Reports

struct SessionEval {
  std::string session;
  std::string channel;
  double window_s = 0.0;
  double sub51_bpm = 0.0;
  double sub52_bpm = 0.0;
  std::size_t n_windows = 0;
};

struct SessionFailure {
  std::string session;
  std::string channel;
  double window_s = 0.0;
  ErrorCode code = ErrorCode::IoError;
  std::string message;
};

struct DatasetEval {
  std::string channel;
  double window_s = 0.0;
  double sub51_mae = 0.0;
  double sub52_mae = 0.0;
  std::size_t n_sessions = 0;
};

struct EvalReport {
  std::vector<SessionEval> per_session;
  std::vector<SessionFailure> failures;
  std::vector<DatasetEval> dataset;
};

/// Sorts rows by (session, channel, window) and folds the per-(channel, window)
/// dataset means in that order.
inline EvalReport finalize_report(std::vector<SessionEval> rows, std::vector<SessionFailure> failures) {
  const auto key = [](const auto& r) { return std::tie(r.session, r.channel, r.window_s); };
  std::sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  std::sort(failures.begin(), failures.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });

  std::map<std::pair<std::string, double>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.channel, r.window_s}];
    g.first.push_back(r.sub51_bpm);
    g.second.push_back(r.sub52_bpm);
  }
  EvalReport report{std::move(rows), std::move(failures), {}};
  for (const auto& [k, g] : groups) {
    report.dataset.push_back({k.first, k.second, dataset_aggregate(g.first), dataset_aggregate(g.second),
                              g.first.size()});
  }
  return report;
}

inline std::string format_seconds(double s) { return fmt::format("{:g}", s); }

inline std::string report_csv(const EvalReport& report) {
  std::string out;
  out += "# dataset rows: unweighted mean of per-session values\n";
  out += "session,channel,window_s,sub51_bpm,sub52_bpm,n_windows\n";
  for (const auto& r : report.per_session) {
    out += fmt::format("{},{},{},{:.6f},{:.6f},{}\n", r.session, r.channel, format_seconds(r.window_s), r.sub51_bpm,
                       r.sub52_bpm, r.n_windows);
  }
  out += "\ndataset,channel,window_s,sub51_mae_bpm,sub52_mae_bpm,n_sessions\n";
  for (const auto& d : report.dataset) {
    out += fmt::format("dataset,{},{},{:.6f},{:.6f},{}\n", d.channel, format_seconds(d.window_s), d.sub51_mae,
                       d.sub52_mae, d.n_sessions);
  }
  if (!report.failures.empty()) {
    out += "\nfailed,channel,window_s,error,message\n";
    for (const auto& f : report.failures) {
      std::string message = f.message;
      std::replace(message.begin(), message.end(), ',', ';');
      out += fmt::format("{},{},{},{},{}\n", f.session, f.channel, format_seconds(f.window_s), to_string(f.code),
                         message);
    }
  }
  return out;
}

inline nlohmann::ordered_json report_json(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["aggregate"] = "unweighted mean of per-session values";
  doc["sessions"] = nlohmann::ordered_json::array();
  for (const auto& r : report.per_session) {
    doc["sessions"].push_back({{"session", r.session},
                               {"channel", r.channel},
                               {"window_s", r.window_s},
                               {"sub51_bpm", r.sub51_bpm},
                               {"sub52_bpm", r.sub52_bpm},
                               {"n_windows", r.n_windows}});
  }
  doc["dataset"] = nlohmann::ordered_json::array();
  for (const auto& d : report.dataset) {
    doc["dataset"].push_back({{"channel", d.channel},
                              {"window_s", d.window_s},
                              {"sub51_mae_bpm", d.sub51_mae},
                              {"sub52_mae_bpm", d.sub52_mae},
                              {"n_sessions", d.n_sessions}});
  }
  doc["failed"] = nlohmann::ordered_json::array();
  for (const auto& f : report.failures) {
    doc["failed"].push_back({{"session", f.session},
                             {"channel", f.channel},
                             {"window_s", f.window_s},
                             {"error", std::string(to_string(f.code))},
                             {"message", f.message}});
  }
  return doc;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
inline void write_report(const EvalReport& report, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  write_text(dir / (stem + ".csv"), report_csv(report));
  write_text(dir / (stem + ".json"), report_json(report).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Sweeps

inline const std::vector<double>& protocol_lengths(std::string_view protocol) {
  static const std::vector<double> session_mean_lengths{5, 10, 15, 20};
  static const std::vector<double> continuous_lengths{5, 7, 9, 11, 13, 15, 17, 19, 20};
  if (protocol == "5.1") return session_mean_lengths;
  if (protocol == "5.2") return continuous_lengths;
  throw Error(ErrorCode::InvalidConfig, "protocol must be 5.1 or 5.2, got " + std::string(protocol));
}

struct SweepSession {
  LoadedSession session;
  GroundTruth groundtruth;
  std::string channel;
};

/// Evaluates one session at one window length (non-overlapping unless `hop` is given).
inline SessionEval evaluate_session(const SweepSession& s, double length, std::optional<double> hop,
                                    const BandLimits& band) {
  const WindowSpec spec{length, hop.value_or(length)};
  const auto series = estimate_session(s.session.trace, spec, s.session.combine, band);
  return {s.session.id, s.channel, length, sub51_error(series, s.groundtruth), sub52_mae(series, s.groundtruth),
          series.estimates.size()};
}

/// Runs every length over every session. A session that fails at some length
/// is recorded as a failure for that length and excluded from its aggregate.
inline EvalReport sweep(std::span<const SweepSession> sessions, std::span<const double> lengths,
                        const BandLimits& band = {}, std::optional<double> hop = std::nullopt,
                        std::vector<SessionFailure> load_failures = {}) {
  std::vector<SessionEval> rows;
  auto failures = std::move(load_failures);
  for (const auto& s : sessions) {
    for (const double length : lengths) {
      try {
        rows.push_back(evaluate_session(s, length, hop, band));
      } catch (const Error& e) {
        failures.push_back({s.session.id, s.channel, length, e.code(), e.what()});
      }
    }
  }
  return finalize_report(std::move(rows), std::move(failures));
}

/// Pivot of dataset MAE with window lengths as columns, one row per metric.
inline std::string sweep_table_csv(const EvalReport& report, const std::string& channel,
                                   std::span<const double> lengths) {
  std::string header = "metric";
  std::string row51 = "sub51_mae_bpm";
  std::string row52 = "sub52_mae_bpm";
  for (const double length : lengths) {
    header += "," + format_seconds(length);
    const auto it = std::find_if(report.dataset.begin(), report.dataset.end(), [&](const DatasetEval& d) {
      return d.channel == channel && d.window_s == length;
    });
    row51 += it == report.dataset.end() ? "," : fmt::format(",{:.6f}", it->sub51_mae);
    row52 += it == report.dataset.end() ? "," : fmt::format(",{:.6f}", it->sub52_mae);
  }
  return "# channel " + channel + "\n" + header + "\n" + row51 + "\n" + row52 + "\n";
}

}  // namespace rppg
