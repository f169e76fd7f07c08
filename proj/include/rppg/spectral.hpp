#pragma once

// Windowed heart-rate estimation: split a pulse signal into fixed-length
// windows, take a Hann-windowed zero-padded periodogram of each, and read the
// dominant in-band frequency off the spectrum.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "rppg/error.hpp"
#include "rppg/pulse_signal.hpp"

namespace rppg {

struct WindowSpec {
  double length = 10.0;  // seconds
  double hop = 10.0;     // seconds

  static WindowSpec non_overlapping(double length) { return {length, length}; }
};

inline void validate(const WindowSpec& spec, double fps, const BandLimits& band) {
  if (!(spec.length > 0.0) || !(spec.hop > 0.0) || spec.hop > spec.length) {
    throw Error(ErrorCode::InvalidConfig, "window spec needs 0 < hop <= length (got length " +
                                              std::to_string(spec.length) + " s, hop " + std::to_string(spec.hop) +
                                              " s)");
  }
  // At least two cycles of the slowest admissible pulse.
  if (spec.length * fps < 2.0 * fps / band.f_lo - 1e-9) {
    throw Error(ErrorCode::InvalidConfig, "window of " + std::to_string(spec.length) + " s is shorter than 2/f_lo = " +
                                              std::to_string(2.0 / band.f_lo) + " s");
  }
}

struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const SampleRange&, const SampleRange&) = default;
};

/// Windows [k·hop, k·hop + length) in samples, for every k whose window fits.
inline std::vector<SampleRange> partition_windows(std::size_t n_samples, double fps, const WindowSpec& spec) {
  const auto length = static_cast<std::size_t>(std::llround(spec.length * fps));
  const auto hop = static_cast<std::size_t>(std::llround(spec.hop * fps));
  if (length == 0 || hop == 0) throw Error(ErrorCode::InvalidConfig, "window or hop rounds to zero samples");
  if (n_samples < length) {
    throw Error(ErrorCode::SessionTooShort, "session of " + std::to_string(n_samples) + " samples holds no " +
                                                std::to_string(length) + "-sample window");
  }
  std::vector<SampleRange> windows;
  for (std::size_t start = 0; start + length <= n_samples; start += hop) windows.push_back({start, start + length});
  return windows;
}

struct Spectrum {
  double bin_hz = 0.0;
  std::vector<double> power;  // bins 0 .. padded/2

  double frequency(std::size_t bin) const noexcept { return bin_hz * static_cast<double>(bin); }
};

inline std::size_t padded_length(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return 8 * p;
}

namespace detail {

// FFTW's planner is not re-entrant; execution of a finished plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(double* p) const noexcept { fftw_free(p); }
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

inline std::vector<double> power_spectrum(std::span<const double> input, std::size_t padded) {
  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(padded));
  std::unique_ptr<fftw_complex, FftwDeleter> out(fftw_alloc_complex(padded / 2 + 1));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(padded), in.get(), out.get(), FFTW_ESTIMATE);
  }
  std::fill(in.get(), in.get() + padded, 0.0);
  std::copy(input.begin(), input.end(), in.get());
  fftw_execute(plan);
  std::vector<double> power(padded / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) {
    power[k] = out.get()[k][0] * out.get()[k][0] + out.get()[k][1] * out.get()[k][1];
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return power;
}

}  // namespace detail

/// Hann-windowed periodogram zero-padded to 8× the next power of two.
inline Spectrum periodogram(std::span<const double> samples, double fps) {
  const auto n = samples.size();
  if (n < 2) throw Error(ErrorCode::SignalTooShort, "periodogram needs at least 2 samples");
  const auto padded = padded_length(n);
  std::vector<double> tapered(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    tapered[i] = samples[i] * w;
  }
  return {fps / static_cast<double>(padded), detail::power_spectrum(tapered, padded)};
}

/// Dominant in-band frequency in bpm: argmax over [f_lo, f_hi] (lowest bin wins
/// ties), refined by a parabola through the peak and its neighbours.
inline double peak_bpm(const Spectrum& spectrum, const BandLimits& band) {
  const auto& p = spectrum.power;
  std::size_t best = p.size();
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double f = spectrum.frequency(k);
    if (f < band.f_lo || f > band.f_hi) continue;
    if (best == p.size() || p[k] > p[best]) best = k;
  }
  if (best == p.size()) {
    throw Error(ErrorCode::EmptyBand, "no spectrum bin inside " + std::to_string(band.f_lo) + ".." +
                                          std::to_string(band.f_hi) + " Hz");
  }
  double offset = 0.0;
  if (best > 0 && best + 1 < p.size()) {
    const double left = p[best - 1], centre = p[best], right = p[best + 1];
    const double curvature = left - 2.0 * centre + right;
    if (curvature < 0.0) offset = std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
  }
  const double f = std::clamp(spectrum.bin_hz * (static_cast<double>(best) + offset), band.f_lo, band.f_hi);
  return 60.0 * f;
}

struct HrEstimate {
  double window_start = 0.0;  // seconds
  double window_end = 0.0;    // seconds
  double bpm = 0.0;
};

struct HrSeries {
  std::vector<HrEstimate> estimates;
  WindowSpec window_spec;
};

/// bpm of one window of a pulse signal; the window's own mean is removed first.
inline double estimate_window(std::span<const double> window, double fps, const BandLimits& band) {
  const double mean = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(window.size());
  std::vector<double> centred(window.begin(), window.end());
  for (auto& v : centred) v -= mean;
  return peak_bpm(periodogram(centred, fps), band);
}

inline HrSeries estimate_series(const PulseSignal& signal, const WindowSpec& spec, const BandLimits& band = {}) {
  validate(band, signal.fps);
  validate(spec, signal.fps, band);
  HrSeries series{{}, spec};
  const std::span<const double> samples(signal.samples);
  for (const auto& w : partition_windows(samples.size(), signal.fps, spec)) {
    const double bpm = estimate_window(samples.subspan(w.begin, w.size()), signal.fps, band);
    series.estimates.push_back({static_cast<double>(w.begin) / signal.fps, static_cast<double>(w.end) / signal.fps, bpm});
  }
  return series;
}

inline double session_mean(const HrSeries& series) {
  if (series.estimates.empty()) throw Error(ErrorCode::EmptySeries, "no window estimates to average");
  // Accumulate offsets from the first value so a constant series averages to itself exactly.
  const double first = series.estimates.front().bpm;
  double offset = 0.0;
  for (const auto& e : series.estimates) offset += e.bpm - first;
  return first + offset / static_cast<double>(series.estimates.size());
}

}  // namespace rppg
