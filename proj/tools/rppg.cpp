// rppg: command-line front end.
//
//   rppg synth     render a synthetic session with a known pulse
//   rppg estimate  windowed heart-rate series for one session
//   rppg evaluate  session-mean error and per-window MAE against groundtruth
//   rppg sweep     evaluate over a list of window lengths
//
// Exit codes: 0 success, 1 input/validation error, 2 processing error.
// Failures print one JSON line {"error": <code>, "message": ...} on stderr.

#include <algorithm>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rppg/rppg.hpp"

namespace fs = std::filesystem;
using namespace rppg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitProcessing = 2;

int report_error(ErrorCode code, const std::string& message) {
  nlohmann::ordered_json line;
  line["error"] = std::string(to_string(code));
  line["message"] = message;
  std::cerr << line.dump() << '\n';
  return is_input_error(code) ? kExitInput : kExitProcessing;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidConfig, what + ": not a number '" + text + "'");
}

BandLimits parse_band(const std::string& text) {
  const auto parts = split_list(text, ':');
  if (parts.size() != 2) throw Error(ErrorCode::InvalidConfig, "--band expects LO:HI in Hz, got '" + text + "'");
  return {parse_number(parts[0], "--band"), parse_number(parts[1], "--band")};
}

HrProfile parse_profile(const std::string& text) {
  const auto colon = text.find(':');
  const auto kind = text.substr(0, colon);
  const auto args = colon == std::string::npos ? std::vector<std::string>{} : split_list(text.substr(colon + 1), ',');
  if (kind == "constant" && args.size() == 1) return HrProfile::constant(parse_number(args[0], "--profile"));
  if (kind == "step" && args.size() == 3) {
    return HrProfile::step(parse_number(args[0], "--profile"), parse_number(args[1], "--profile"),
                           parse_number(args[2], "--profile"));
  }
  if (kind == "ramp" && args.size() == 2) {
    return HrProfile::ramp(parse_number(args[0], "--profile"), parse_number(args[1], "--profile"));
  }
  throw Error(ErrorCode::InvalidConfig,
              "--profile expects constant:BPM, step:A,B,T or ramp:A,B, got '" + text + "'");
}

std::vector<double> parse_lengths(const std::string& text) {
  std::vector<double> lengths;
  for (const auto& part : split_list(text, ',')) lengths.push_back(parse_number(part, "--lengths"));
  return lengths;
}

std::optional<CombineMethod> parse_combine(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (auto m = parse_combine_method(text)) return m;
  throw Error(ErrorCode::InvalidConfig, "--combine must be green, intensity or chrom, got '" + text + "'");
}

std::string channel_label(const SessionManifest& m, const std::string& requested) {
  if (!requested.empty()) return requested;
  return m.pixel_format == PixelFormat::gray8 ? "nir" : "rgb";
}

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

// --------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::optional<double> hr;
  std::string profile;
  double duration = 60.0;
  double fps = 30.0;
  int width = 64;
  int height = 64;
  double amplitude = 0.02;
  double noise = 0.0;
  double drift = 0.0;
  std::uint64_t seed = 1;
  bool mono = false;
  bool harmonic = false;
};

int cmd_synth(const SynthArgs& a) {
  SynthConfig config;
  config.width = a.width;
  config.height = a.height;
  config.fps = a.fps;
  config.duration = a.duration;
  config.pulse_amplitude = a.amplitude;
  config.noise_sigma = a.noise;
  config.illum_drift = a.drift;
  config.seed = a.seed;
  config.mono = a.mono;
  config.second_harmonic = a.harmonic;
  if (a.hr && !a.profile.empty()) throw Error(ErrorCode::InvalidConfig, "give either --hr or --profile, not both");
  if (a.hr) config.hr_profile = HrProfile::constant(*a.hr);
  if (!a.profile.empty()) config.hr_profile = parse_profile(a.profile);
  validate(config);
  const auto m = render_session(config, a.out);
  std::cout << fmt::format("wrote {} frames ({}x{} {}) to {}\n", m.frame_count, m.width, m.height,
                           manifest_name(m.pixel_format), a.out);
  return kExitOk;
}

struct PipelineArgs {
  double window = 10.0;
  std::optional<double> hop;
  std::string band = "0.7:4.0";
  std::string combine;
  std::string channel;
  std::string out = "rppg_out";
};

PipelineOptions pipeline_options(const PipelineArgs& a) {
  PipelineOptions options;
  options.band = parse_band(a.band);
  options.combine = parse_combine(a.combine);
  return options;
}

void check_window(const PipelineArgs& a, const BandLimits& band) {
  if (!a.channel.empty() && a.channel != "rgb" && a.channel != "nir") {
    throw Error(ErrorCode::InvalidConfig, "--channel must be rgb or nir");
  }
  if (!(a.window > 0.0) || (a.hop && !(*a.hop > 0.0 && *a.hop <= a.window))) {
    throw Error(ErrorCode::InvalidConfig, "need 0 < --hop <= --window");
  }
  if (a.window < 2.0 / band.f_lo) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("--window {} s is shorter than 2/f_lo = {:.3f} s", a.window,
                                                      2.0 / band.f_lo));
  }
}

int cmd_estimate(const std::string& session_path, bool plot_data, const PipelineArgs& a) {
  const auto options = pipeline_options(a);
  check_window(a, options.band);
  const auto session = load_session(session_path, options);
  const WindowSpec spec{a.window, a.hop.value_or(a.window)};
  const auto series = estimate_session(session.trace, spec, session.combine, options.band);

  const fs::path out(a.out);
  fs::create_directories(out);
  std::string rows = "window_start_s,window_end_s,bpm\n";
  for (const auto& e : series.estimates) {
    rows += fmt::format("{},{},{}\n", fixed(e.window_start), fixed(e.window_end), fixed(e.bpm));
  }
  write_text(out / "estimates.csv", rows);

  nlohmann::ordered_json summary;
  summary["session"] = session.id;
  summary["session_mean_bpm"] = session_mean(series);
  summary["n_windows"] = series.estimates.size();
  summary["window_s"] = spec.length;
  summary["hop_s"] = spec.hop;
  summary["combine"] = std::string(to_string(session.combine));
  write_text(out / "summary.json", summary.dump(2) + "\n");

  if (plot_data) {
    if (!session.manifest.groundtruth_path) {
      throw Error(ErrorCode::MissingFile, "--plot-data needs a groundtruth file in the manifest");
    }
    const auto gt = load_groundtruth(*session.manifest.groundtruth_path);
    const auto reference = align_groundtruth(gt, window_intervals(series));
    std::string plot = "window_start_s,window_end_s,groundtruth_bpm,estimate_bpm\n";
    for (std::size_t i = 0; i < series.estimates.size(); ++i) {
      const auto& e = series.estimates[i];
      plot += fmt::format("{},{},{},{}\n", fixed(e.window_start), fixed(e.window_end), fixed(reference[i]),
                          fixed(e.bpm));
    }
    write_text(out / "gt_vs_estimate.csv", plot);
  }
  std::cout << fmt::format("{}: {} windows, mean {:.2f} bpm\n", session.id, series.estimates.size(),
                           session_mean(series));
  return kExitOk;
}

HrSeries load_estimates(const fs::path& path, double window) {
  const auto table = csv::read(path, {"window_start_s", "window_end_s", "bpm"});
  HrSeries series;
  series.window_spec = WindowSpec::non_overlapping(window);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = path.string() + ":" + std::to_string(table.line_numbers[i]);
    series.estimates.push_back({csv::to_double(table.rows[i][0], where), csv::to_double(table.rows[i][1], where),
                                csv::to_double(table.rows[i][2], where)});
  }
  if (!series.estimates.empty()) {
    series.window_spec.length = series.estimates.front().window_end - series.estimates.front().window_start;
  }
  return series;
}

/// Loads sessions (optionally concurrently) and pairs each with its groundtruth.
/// Sessions that fail to load are returned as failures for every length.
std::pair<std::vector<SweepSession>, std::vector<SessionFailure>> load_for_eval(
    const std::vector<std::string>& paths, const PipelineOptions& options, const std::string& channel,
    const std::vector<double>& lengths, unsigned jobs) {
  struct Loaded {
    std::optional<SweepSession> session;
    std::optional<SessionFailure> failure;
  };
  auto load_one = [&](const std::string& path) -> Loaded {
    const auto id = session_id(path);
    std::string label = channel.empty() ? "unknown" : channel;
    try {
      auto loaded = load_session(path, options);
      label = channel_label(loaded.manifest, channel);
      if (!loaded.manifest.groundtruth_path) throw Error(ErrorCode::MissingFile, "manifest names no groundtruth file");
      auto gt = load_groundtruth(*loaded.manifest.groundtruth_path);
      return {SweepSession{std::move(loaded), std::move(gt), label}, std::nullopt};
    } catch (const Error& e) {
      return {std::nullopt, SessionFailure{id, label, 0.0, e.code(), e.what()}};
    }
  };

  std::vector<Loaded> loaded(paths.size());
  const std::size_t batch = std::max(1u, jobs);
  for (std::size_t first = 0; first < paths.size(); first += batch) {
    std::vector<std::future<Loaded>> pending;
    for (std::size_t i = first; i < std::min(paths.size(), first + batch); ++i) {
      pending.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, load_one, paths[i]));
    }
    for (std::size_t i = 0; i < pending.size(); ++i) loaded[first + i] = pending[i].get();
  }

  std::vector<SweepSession> sessions;
  std::vector<SessionFailure> failures;
  for (auto& l : loaded) {
    if (l.session) {
      sessions.push_back(std::move(*l.session));
      continue;
    }
    for (const double length : lengths) {
      auto f = *l.failure;
      f.window_s = length;
      failures.push_back(f);
    }
  }
  return {std::move(sessions), std::move(failures)};
}

int cmd_evaluate(const std::vector<std::string>& sessions, const std::string& estimates_path,
                 const std::string& groundtruth_path, const PipelineArgs& a) {
  const auto options = pipeline_options(a);
  check_window(a, options.band);
  EvalReport report;
  if (!estimates_path.empty()) {
    if (groundtruth_path.empty()) throw Error(ErrorCode::InvalidConfig, "--estimates needs --groundtruth");
    const auto series = load_estimates(estimates_path, a.window);
    const auto gt = load_groundtruth(groundtruth_path);
    const auto id = fs::path(estimates_path).stem().string();
    const auto label = a.channel.empty() ? std::string("rgb") : a.channel;
    try {
      report = finalize_report({SessionEval{id, label, series.window_spec.length, sub51_error(series, gt),
                                            sub52_mae(series, gt), series.estimates.size()}},
                               {});
    } catch (const Error& e) {
      report = finalize_report({}, {SessionFailure{id, label, series.window_spec.length, e.code(), e.what()}});
    }
  } else {
    if (sessions.empty()) throw Error(ErrorCode::InvalidConfig, "evaluate needs session paths or --estimates");
    const std::vector<double> lengths{a.window};
    auto [loaded, failures] = load_for_eval(sessions, options, a.channel, lengths, 1);
    report = sweep(loaded, lengths, options.band, a.hop, std::move(failures));
  }
  write_report(report, a.out, "report");
  for (const auto& f : report.failures) {
    std::cerr << fmt::format("{} (T={} s): {}\n", f.session, format_seconds(f.window_s), f.message);
  }
  return report.per_session.empty() ? report_error(report.failures.empty() ? ErrorCode::EmptyInput
                                                                            : report.failures.front().code,
                                                   "no session could be evaluated")
                                    : kExitOk;
}

int cmd_sweep(const std::vector<std::string>& sessions, const std::string& protocol, const std::string& lengths_text,
              unsigned jobs, const PipelineArgs& a) {
  const auto options = pipeline_options(a);
  if (!a.channel.empty() && a.channel != "rgb" && a.channel != "nir") {
    throw Error(ErrorCode::InvalidConfig, "--channel must be rgb or nir");
  }
  const auto lengths = lengths_text.empty() ? protocol_lengths(protocol) : parse_lengths(lengths_text);
  for (const double length : lengths) {
    PipelineArgs check = a;
    check.window = length;
    check.hop.reset();
    check_window(check, options.band);
  }
  auto [loaded, failures] = load_for_eval(sessions, options, a.channel, lengths, jobs);
  const auto report = sweep(loaded, lengths, options.band, std::nullopt, std::move(failures));

  const fs::path out(a.out);
  write_report(report, out, "sweep");
  std::set<std::string> channels;
  for (const auto& r : report.per_session) channels.insert(r.channel);
  for (const auto& channel : channels) {
    write_text(out / ("table_" + channel + ".csv"), sweep_table_csv(report, channel, lengths));
  }
  for (const auto& f : report.failures) {
    std::cerr << fmt::format("{} (T={} s): {}\n", f.session, format_seconds(f.window_s), f.message);
  }
  if (report.per_session.empty()) {
    return report_error(report.failures.empty() ? ErrorCode::EmptyInput : report.failures.front().code,
                        "no session could be evaluated");
  }
  std::cout << fmt::format("swept {} session(s) over {} window length(s) into {}\n",
                           report.per_session.size() / std::max<std::size_t>(1, lengths.size()), lengths.size(),
                           out.string());
  return kExitOk;
}

void add_pipeline_flags(CLI::App& cmd, PipelineArgs& a, bool with_window) {
  if (with_window) {
    cmd.add_option("--window", a.window, "Window length in seconds")->capture_default_str();
    cmd.add_option("--hop", a.hop, "Window hop in seconds (default: window length)");
  }
  cmd.add_option("--band", a.band, "Pulse band LO:HI in Hz")->capture_default_str();
  cmd.add_option("--combine", a.combine, "green, intensity or chrom (default: chrom for rgb8, intensity for gray8)");
  cmd.add_option("--channel", a.channel, "Channel label rgb or nir (default: from pixel format)");
  cmd.add_option("--out", a.out, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heart-rate estimation from face video by remote photoplethysmography"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Render a synthetic session with a known pulse");
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--hr", synth_args.hr, "Constant heart rate in bpm");
  synth->add_option("--profile", synth_args.profile, "constant:BPM | step:A,B,T | ramp:A,B");
  synth->add_option("--duration", synth_args.duration, "Seconds")->capture_default_str();
  synth->add_option("--fps", synth_args.fps)->capture_default_str();
  synth->add_option("--width", synth_args.width)->capture_default_str();
  synth->add_option("--height", synth_args.height)->capture_default_str();
  synth->add_option("--amplitude", synth_args.amplitude, "Pulse depth as a fraction of base green")
      ->capture_default_str();
  synth->add_option("--noise", synth_args.noise, "Gaussian pixel noise sigma")->capture_default_str();
  synth->add_option("--drift", synth_args.drift, "Peak fractional illumination drift")->capture_default_str();
  synth->add_option("--seed", synth_args.seed)->capture_default_str();
  synth->add_flag("--mono", synth_args.mono, "Emit gray8 frames");
  synth->add_flag("--harmonic", synth_args.harmonic, "Add a second harmonic at 0.3x amplitude");

  PipelineArgs estimate_args;
  std::string estimate_session_path;
  bool plot_data = false;
  auto* estimate = app.add_subcommand("estimate", "Windowed heart-rate series for one session");
  estimate->add_option("session", estimate_session_path, "Session directory or manifest")->required();
  estimate->add_flag("--plot-data", plot_data, "Also write groundtruth vs estimate per window");
  add_pipeline_flags(*estimate, estimate_args, true);

  PipelineArgs evaluate_args;
  std::vector<std::string> evaluate_sessions;
  std::string estimates_path, groundtruth_path;
  auto* evaluate = app.add_subcommand("evaluate", "Session-mean error and per-window MAE");
  evaluate->add_option("sessions", evaluate_sessions, "Session directories or manifests");
  evaluate->add_option("--estimates", estimates_path, "Evaluate an existing estimates CSV instead of sessions");
  evaluate->add_option("--groundtruth", groundtruth_path, "Groundtruth CSV for --estimates");
  add_pipeline_flags(*evaluate, evaluate_args, true);

  PipelineArgs sweep_args;
  std::vector<std::string> sweep_sessions;
  std::string protocol = "5.1";
  std::string lengths_text;
  unsigned jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate over a list of window lengths");
  sweep_cmd->add_option("sessions", sweep_sessions, "Session directories or manifests")->required();
  sweep_cmd->add_option("--protocol", protocol, "5.1 (lengths 5,10,15,20) or 5.2 (5,7,...,19,20)")
      ->check(CLI::IsMember({"5.1", "5.2"}))
      ->capture_default_str();
  sweep_cmd->add_option("--lengths", lengths_text, "Comma-separated window lengths in seconds");
  sweep_cmd->add_option("--jobs", jobs, "Sessions loaded concurrently")->capture_default_str();
  add_pipeline_flags(*sweep_cmd, sweep_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*synth) return cmd_synth(synth_args);
    if (*estimate) return cmd_estimate(estimate_session_path, plot_data, estimate_args);
    if (*evaluate) return cmd_evaluate(evaluate_sessions, estimates_path, groundtruth_path, evaluate_args);
    if (*sweep_cmd) return cmd_sweep(sweep_sessions, protocol, lengths_text, jobs, sweep_args);
  } catch (const Error& e) {
    return report_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorCode::IoError, e.what());
  }
  return kExitInput;
}
