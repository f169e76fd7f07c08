#pragma once

// End-to-end estimation for one session: ROI traces → conditioned channels
// (normalize, detrend, bandpass over the whole session) → per-window channel
// combination and ROI fusion → per-window spectral peak.

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rppg/error.hpp"
#include "rppg/frame_io.hpp"
#include "rppg/pulse_signal.hpp"
#include "rppg/roi.hpp"
#include "rppg/spectral.hpp"

namespace rppg {

struct PipelineOptions {
  BandLimits band;
  double detrend_window = 1.5;         // seconds
  std::optional<CombineMethod> combine;  // unset: chrom for rgb8, intensity for gray8
  RoiGeometry geometry;
};

/// Normalized, detrended, band-passed series indexed [roi][channel].
struct ConditionedTrace {
  double fps = 0.0;
  std::size_t frame_count = 0;
  std::array<std::array<std::vector<double>, kChannelCount>, kRoiCount> channels;
};

inline ConditionedTrace condition_trace(const RawTrace& raw, const PipelineOptions& options = {}) {
  validate(options.band, raw.fps);
  const auto taps = design_bandpass(raw.fps, options.band);
  ConditionedTrace out{raw.fps, raw.frame_count, {}};
  for (std::size_t r = 0; r < kRoiCount; ++r) {
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      const auto normalized = normalize_segment(raw.series(r, c));
      const auto flat = detrend(normalized, raw.fps, options.detrend_window);
      out.channels[r][c] = apply_zero_phase(flat, taps);
    }
  }
  return out;
}

/// Channel combination and ROI fusion over samples [range.begin, range.end).
/// chrom windows whose channels are degenerate fall back to intensity.
inline PulseSignal pulse_window(const ConditionedTrace& trace, const SampleRange& range, CombineMethod method) {
  if (range.end > trace.frame_count || range.begin >= range.end) {
    throw Error(ErrorCode::LengthMismatch, "window outside the conditioned trace");
  }
  std::vector<std::vector<double>> per_roi;
  per_roi.reserve(kRoiCount);
  for (std::size_t r = 0; r < kRoiCount; ++r) {
    const auto slice = [&](std::size_t c) {
      return std::span<const double>(trace.channels[r][c]).subspan(range.begin, range.size());
    };
    try {
      per_roi.push_back(combine_channels(slice(0), slice(1), slice(2), method));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
      per_roi.push_back(combine_channels(slice(0), slice(1), slice(2), CombineMethod::intensity));
    }
  }
  return fuse_rois(per_roi, trace.fps);
}

inline HrSeries estimate_session(const ConditionedTrace& trace, const WindowSpec& spec, CombineMethod method,
                                 const BandLimits& band = {}) {
  validate(band, trace.fps);
  validate(spec, trace.fps, band);
  HrSeries series{{}, spec};
  for (const auto& w : partition_windows(trace.frame_count, trace.fps, spec)) {
    const auto pulse = pulse_window(trace, w, method);
    series.estimates.push_back({static_cast<double>(w.begin) / trace.fps, static_cast<double>(w.end) / trace.fps,
                                estimate_window(pulse.samples, trace.fps, band)});
  }
  return series;
}

/// Accepts either a manifest file or a directory containing manifest.json.
inline std::filesystem::path resolve_manifest(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return path / "manifest.json";
  return path;
}

/// Session id: the directory name for `dir/manifest.json`, else the manifest's stem.
inline std::string session_id(const std::filesystem::path& manifest_path) {
  const auto resolved = resolve_manifest(manifest_path);
  if (resolved.filename() == "manifest.json" && resolved.has_parent_path()) {
    const auto dir = std::filesystem::absolute(resolved).parent_path().filename().string();
    if (!dir.empty()) return dir;
  }
  return resolved.stem().string();
}

/// A session read from disk and reduced to its conditioned trace.
struct LoadedSession {
  std::string id;
  SessionManifest manifest;
  ConditionedTrace trace;
  CombineMethod combine = CombineMethod::chrom;
};

inline LoadedSession load_session(const std::filesystem::path& path, const PipelineOptions& options = {}) {
  const auto manifest_path = resolve_manifest(path);
  auto stream = open_session(manifest_path);
  const auto& manifest = stream.manifest();
  if (!manifest.boxes_path) {
    throw Error(ErrorCode::MissingFile, manifest_path.string() + " names no boxes file");
  }
  if (!std::filesystem::exists(*manifest.boxes_path)) {
    throw Error(ErrorCode::MissingFile, "cannot open boxes file " + manifest.boxes_path->string());
  }
  validate(options.band, manifest.fps);
  const auto boxes = load_box_track(*manifest.boxes_path, manifest.frame_count);
  const auto raw = extract_traces(stream, boxes, manifest.fps, options.geometry);
  LoadedSession session;
  session.id = session_id(manifest_path);
  session.manifest = manifest;
  session.trace = condition_trace(raw, options);
  session.combine = options.combine.value_or(default_combine_method(manifest.pixel_format));
  return session;
}

}  // namespace rppg
