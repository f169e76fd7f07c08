#pragma once

// Raw ROI traces and the signal conditioning that turns them into a pulse
// signal: per-channel normalization, moving-average detrending, zero-phase FIR
// bandpass, colour-channel combination and ROI fusion.

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rppg/error.hpp"
#include "rppg/frame_io.hpp"
#include "rppg/roi.hpp"

namespace rppg {

inline constexpr std::size_t kChannelCount = 3;

struct BandLimits {
  double f_lo = 0.7;
  double f_hi = 4.0;
};

inline void validate(const BandLimits& band, double fps) {
  if (!(band.f_lo > 0.0) || !(band.f_lo < band.f_hi) || !(band.f_hi < fps / 2.0)) {
    throw Error(ErrorCode::InvalidConfig, "band must satisfy 0 < f_lo < f_hi < fps/2 (got " +
                                              std::to_string(band.f_lo) + ".." + std::to_string(band.f_hi) +
                                              " Hz at " + std::to_string(fps) + " fps)");
  }
}

/// Per-frame spatial means, laid out [frame][roi][channel].
struct RawTrace {
  double fps = 0.0;
  std::size_t frame_count = 0;
  std::vector<double> values;
  std::vector<bool> valid;

  RawTrace() = default;
  RawTrace(double fps_, std::size_t frames)
      : fps(fps_), frame_count(frames), values(frames * kRoiCount * kChannelCount, 0.0), valid(frames, false) {}

  double& at(std::size_t frame, std::size_t roi, std::size_t channel) noexcept {
    return values[(frame * kRoiCount + roi) * kChannelCount + channel];
  }
  double at(std::size_t frame, std::size_t roi, std::size_t channel) const noexcept {
    return values[(frame * kRoiCount + roi) * kChannelCount + channel];
  }
  std::vector<double> series(std::size_t roi, std::size_t channel) const {
    std::vector<double> out(frame_count);
    for (std::size_t f = 0; f < frame_count; ++f) out[f] = at(f, roi, channel);
    return out;
  }
};

struct PulseSignal {
  double fps = 0.0;
  std::vector<double> samples;
};

inline std::array<double, kChannelCount> spatial_mean(const Frame& frame, const Rect& roi) {
  if (roi.area() < kMinRoiArea || roi.x < 0 || roi.y < 0 || roi.x + roi.w > frame.width() ||
      roi.y + roi.h > frame.height()) {
    throw Error(ErrorCode::DegenerateRoi, "ROI outside frame or smaller than " + std::to_string(kMinRoiArea) + " px");
  }
  std::array<double, kChannelCount> means{};
  const auto count = static_cast<double>(roi.area());
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const auto& plane = frame.channels[c];
    std::uint64_t sum = 0;
    for (int y = roi.y; y < roi.y + roi.h; ++y) {
      const auto row = plane.row(y).subspan(static_cast<std::size_t>(roi.x), static_cast<std::size_t>(roi.w));
      for (const auto v : row) sum += v;
    }
    means[c] = static_cast<double>(sum) / count;
  }
  return means;
}

/// Anything that yields frames in order: FrameStream, or an in-memory synthetic source.
template <class Source>
concept FrameSource = requires(Source& s) {
  { s.next_frame() } -> std::same_as<std::optional<Frame>>;
  { s.size() } -> std::convertible_to<std::int64_t>;
};

namespace detail {

/// Replaces invalid entries by linear interpolation between valid neighbours
/// (nearest valid value at the ends).
inline void fill_invalid(RawTrace& trace) {
  const auto n = trace.frame_count;
  std::optional<std::size_t> prev;
  for (std::size_t f = 0; f < n; ++f) {
    if (!trace.valid[f]) continue;
    const std::size_t gap_begin = prev ? *prev + 1 : 0;
    for (std::size_t g = gap_begin; g < f; ++g) {
      for (std::size_t r = 0; r < kRoiCount; ++r) {
        for (std::size_t c = 0; c < kChannelCount; ++c) {
          if (!prev) {
            trace.at(g, r, c) = trace.at(f, r, c);
          } else {
            const double t = static_cast<double>(g - *prev) / static_cast<double>(f - *prev);
            trace.at(g, r, c) = trace.at(*prev, r, c) + t * (trace.at(f, r, c) - trace.at(*prev, r, c));
          }
        }
      }
    }
    prev = f;
  }
  for (std::size_t g = *prev + 1; g < n; ++g) {
    for (std::size_t r = 0; r < kRoiCount; ++r) {
      for (std::size_t c = 0; c < kChannelCount; ++c) trace.at(g, r, c) = trace.at(*prev, r, c);
    }
  }
}

}  // namespace detail

template <FrameSource Source>
RawTrace extract_traces(Source& source, std::span<const FaceBox> boxes, double fps,
                        const RoiGeometry& geometry = {}) {
  const auto frame_count = static_cast<std::size_t>(source.size());
  if (boxes.size() != frame_count) {
    throw Error(ErrorCode::LengthMismatch, "box track has " + std::to_string(boxes.size()) + " entries for " +
                                               std::to_string(frame_count) + " frames");
  }
  RawTrace trace(fps, frame_count);
  std::size_t valid_count = 0;
  std::size_t f = 0;
  while (auto frame = source.next_frame()) {
    try {
      const auto rois = derive_rois(boxes[f], frame->width(), frame->height(), geometry);
      for (std::size_t r = 0; r < kRoiCount; ++r) {
        const auto means = spatial_mean(*frame, rois[r]);
        for (std::size_t c = 0; c < kChannelCount; ++c) trace.at(f, r, c) = means[c];
      }
      trace.valid[f] = true;
      ++valid_count;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateRoi) throw;
    }
    ++f;
  }
  if (f != frame_count) {
    throw Error(ErrorCode::IoError, "source ended after " + std::to_string(f) + " of " +
                                        std::to_string(frame_count) + " frames");
  }
  if (valid_count == 0) throw Error(ErrorCode::AllFramesInvalid, "no frame produced a valid ROI set");
  detail::fill_invalid(trace);
  return trace;
}

/// x / mean(x) - 1.
inline std::vector<double> normalize_segment(std::span<const double> segment) {
  if (segment.size() < 2) throw Error(ErrorCode::SignalTooShort, "normalization needs at least 2 samples");
  const double mean = std::accumulate(segment.begin(), segment.end(), 0.0) / static_cast<double>(segment.size());
  if (!(mean > 0.0)) throw Error(ErrorCode::NonPositiveMean, "segment mean is " + std::to_string(mean));
  std::vector<double> out(segment.size());
  for (std::size_t i = 0; i < segment.size(); ++i) out[i] = segment[i] / mean - 1.0;
  return out;
}

/// Moving-average length for a detrending window, forced odd so the average is centred.
inline std::size_t detrend_length(double fps, double cutoff_window) {
  auto len = static_cast<std::size_t>(std::llround(cutoff_window * fps));
  if (len < 3) {
    throw Error(ErrorCode::WindowTooShort,
                "detrend window of " + std::to_string(cutoff_window) + " s is under 3 samples");
  }
  if (len % 2 == 0) ++len;
  return len;
}

/// Subtracts a centred moving average; near the edges the average covers only
/// the samples that exist.
inline std::vector<double> detrend(std::span<const double> signal, double fps, double cutoff_window) {
  const auto half = static_cast<std::ptrdiff_t>(detrend_length(fps, cutoff_window) / 2);
  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  std::vector<double> out(signal.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto lo = std::max<std::ptrdiff_t>(0, i - half);
    const auto hi = std::min<std::ptrdiff_t>(n, i + half + 1);
    double sum = 0.0;
    for (auto k = lo; k < hi; ++k) sum += signal[k];
    out[i] = signal[i] - sum / static_cast<double>(hi - lo);
  }
  return out;
}

/// Tap count of the bandpass FIR: round(4·fps/f_lo), forced odd.
inline std::size_t bandpass_length(double fps, const BandLimits& band) {
  auto len = static_cast<std::size_t>(std::llround(4.0 * fps / band.f_lo));
  if (len % 2 == 0) ++len;
  return len;
}

/// Hamming-windowed sinc bandpass: difference of two lowpass kernels.
inline std::vector<double> design_bandpass(double fps, const BandLimits& band) {
  validate(band, fps);
  const auto len = bandpass_length(fps, band);
  const double centre = static_cast<double>(len - 1) / 2.0;
  const double lo = band.f_lo / fps;
  const double hi = band.f_hi / fps;
  auto lowpass = [](double fc, double m) {
    if (m == 0.0) return 2.0 * fc;
    return std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
  };
  std::vector<double> taps(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double m = static_cast<double>(i) - centre;
    const double hamming = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                  static_cast<double>(len - 1));
    taps[i] = (lowpass(hi, m) - lowpass(lo, m)) * hamming;
  }
  return taps;
}

/// Zero-phase application of a symmetric odd-length FIR. The signal is mirrored
/// at both ends (x[-k] = x[k]) so the extension has no jump, then the centred
/// part of the convolution is kept and its residual mean removed.
inline std::vector<double> apply_zero_phase(std::span<const double> signal, std::span<const double> taps) {
  const auto n = signal.size();
  const auto half = taps.size() / 2;
  if (n < taps.size()) {
    throw Error(ErrorCode::SignalTooShort, "signal of " + std::to_string(n) + " samples is shorter than the " +
                                               std::to_string(taps.size()) + "-tap filter");
  }
  std::vector<double> ext(n + 2 * half);
  for (std::size_t k = 1; k <= half; ++k) {
    ext[half - k] = signal[k];
    ext[half + n - 1 + k] = signal[n - 1 - k];
  }
  std::copy(signal.begin(), signal.end(), ext.begin() + static_cast<std::ptrdiff_t>(half));

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* x = ext.data() + i;
    for (std::size_t k = 0; k < taps.size(); ++k) acc += taps[k] * x[k];
    out[i] = acc;
  }
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(n);
  for (auto& v : out) v -= mean;
  return out;
}

inline std::vector<double> bandpass(std::span<const double> signal, double fps, const BandLimits& band) {
  const auto taps = design_bandpass(fps, band);
  return apply_zero_phase(signal, taps);
}

enum class CombineMethod { green, intensity, chrom };

constexpr std::string_view to_string(CombineMethod method) noexcept {
  switch (method) {
    case CombineMethod::green: return "green";
    case CombineMethod::intensity: return "intensity";
    case CombineMethod::chrom: return "chrom";
  }
  return "unknown";
}

inline std::optional<CombineMethod> parse_combine_method(std::string_view name) noexcept {
  if (name == "green") return CombineMethod::green;
  if (name == "intensity") return CombineMethod::intensity;
  if (name == "chrom") return CombineMethod::chrom;
  return std::nullopt;
}

constexpr CombineMethod default_combine_method(PixelFormat format) noexcept {
  return format == PixelFormat::gray8 ? CombineMethod::intensity : CombineMethod::chrom;
}

namespace detail {

inline double stddev(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

}  // namespace detail

/// Combines normalized R, G, B series of one window into a single series.
///
/// chrom uses X = 3R - 2G and Y = 1.5R + G - 1.5B and returns X - (σX/σY)·Y.
/// It throws ZeroVariance when σY is zero or when X and Y are proportional so
/// that the result cancels to nothing (replicated mono input); callers fall
/// back to intensity.
inline std::vector<double> combine_channels(std::span<const double> r, std::span<const double> g,
                                            std::span<const double> b, CombineMethod method) {
  const auto n = r.size();
  if (g.size() != n || b.size() != n) throw Error(ErrorCode::LengthMismatch, "channel lengths differ");
  std::vector<double> out(n);
  switch (method) {
    case CombineMethod::green:
      std::copy(g.begin(), g.end(), out.begin());
      break;
    case CombineMethod::intensity:
      for (std::size_t i = 0; i < n; ++i) out[i] = (r[i] + g[i] + b[i]) / 3.0;
      break;
    case CombineMethod::chrom: {
      std::vector<double> x(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = 3.0 * r[i] - 2.0 * g[i];
        y[i] = 1.5 * r[i] + g[i] - 1.5 * b[i];
      }
      const double sx = detail::stddev(x);
      const double sy = detail::stddev(y);
      if (!(sy > 0.0)) throw Error(ErrorCode::ZeroVariance, "chrom: Y has zero variance");
      const double alpha = sx / sy;
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - alpha * y[i];
      if (detail::stddev(out) <= 1e-9 * std::max(sx, sy)) {
        throw Error(ErrorCode::ZeroVariance, "chrom: X and Y cancel (identical channels)");
      }
      break;
    }
  }
  return out;
}

/// Pointwise mean of the per-ROI signals, mean-subtracted.
inline PulseSignal fuse_rois(std::span<const std::vector<double>> signals, double fps) {
  if (signals.empty()) throw Error(ErrorCode::EmptyInput, "no ROI signals to fuse");
  const auto n = signals.front().size();
  for (const auto& s : signals) {
    if (s.size() != n) throw Error(ErrorCode::LengthMismatch, "ROI signals differ in length");
  }
  PulseSignal out{fps, std::vector<double>(n, 0.0)};
  const double k = static_cast<double>(signals.size());
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& s : signals) sum += s[i];
    out.samples[i] = sum / k;
  }
  if (n > 0) {
    const double mean = std::accumulate(out.samples.begin(), out.samples.end(), 0.0) / static_cast<double>(n);
    for (auto& v : out.samples) v -= mean;
  }
  return out;
}

}  // namespace rppg
