#pragma once

// Synthetic sessions with a known pulse: uniform "skin" frames whose colour is
// modulated by a sinusoidal pulse of prescribed heart-rate profile, plus
// optional Gaussian pixel noise and slow illumination drift.
//
// Reproducibility contract: noise comes from std::mt19937_64 (whose output
// sequence is fixed by the standard), one generator per frame seeded with
// splitmix64 of (seed, frame index), turned into normals by Box-Muller.
// Quantization rounds half-to-even after all modulation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rppg/error.hpp"
#include "rppg/frame_io.hpp"
#include "rppg/pulse_signal.hpp"
#include "rppg/roi.hpp"

namespace rppg {

struct HrProfile {
  enum class Kind { constant, step, ramp };
  Kind kind = Kind::constant;
  double bpm_a = 72.0;
  double bpm_b = 72.0;
  double t_switch = 0.0;  // step only

  static HrProfile constant(double bpm) { return {Kind::constant, bpm, bpm, 0.0}; }
  static HrProfile step(double a, double b, double t) { return {Kind::step, a, b, t}; }
  static HrProfile ramp(double a, double b) { return {Kind::ramp, a, b, 0.0}; }
};

struct SynthConfig {
  int width = 64;
  int height = 64;
  double fps = 30.0;
  double duration = 60.0;  // seconds
  std::array<double, 3> base_color{190.0, 140.0, 120.0};
  double pulse_amplitude = 0.02;  // fraction of base green
  HrProfile hr_profile = HrProfile::constant(72.0);
  double noise_sigma = 0.0;
  double illum_drift = 0.0;  // peak fractional drift
  double drift_hz = 0.1;
  bool second_harmonic = false;
  std::uint64_t seed = 1;
  bool mono = false;

  std::int64_t frame_count() const { return static_cast<std::int64_t>(std::llround(duration * fps)); }
};

/// Relative modulation depths of R and B against G.
inline constexpr double kRedDepth = 0.5;
inline constexpr double kBlueDepth = 0.3;
inline constexpr double kHarmonicAmplitude = 0.3;

inline void validate(const SynthConfig& c, const BandLimits& band = {}) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (c.width < 16 || c.height < 16) fail("width and height must be >= 16");
  if (!(c.fps > 0.0)) fail("fps must be > 0");
  if (!(c.duration > 0.0) || c.frame_count() < 1) fail("duration must cover at least one frame");
  for (const double v : c.base_color) {
    if (!(v >= 0.0 && v <= 255.0)) fail("base colour components must lie in [0, 255]");
  }
  if (!(c.pulse_amplitude > 0.0 && c.pulse_amplitude <= 0.1)) {
    fail(fmt::format("pulse amplitude {} outside (0, 0.1]", c.pulse_amplitude));
  }
  if (!(c.noise_sigma >= 0.0)) fail("noise sigma must be >= 0");
  if (!(c.illum_drift >= 0.0 && c.illum_drift < 1.0)) fail("illumination drift must lie in [0, 1)");
  if (!(c.drift_hz > 0.0 && c.drift_hz <= 0.2)) fail("drift frequency must lie in (0, 0.2] Hz");
  const double lo = 60.0 * band.f_lo, hi = 60.0 * band.f_hi;
  for (const double bpm : {c.hr_profile.bpm_a, c.hr_profile.bpm_b}) {
    if (!(bpm > lo && bpm < hi)) fail(fmt::format("hr {} bpm outside ({}, {})", bpm, lo, hi));
  }
  if (c.hr_profile.kind == HrProfile::Kind::step &&
      !(c.hr_profile.t_switch >= 0.0 && c.hr_profile.t_switch <= c.duration)) {
    fail(fmt::format("step time {} s outside [0, {}]", c.hr_profile.t_switch, c.duration));
  }
}

/// Instantaneous heart rate at time t. `duration` sets the ramp's end point.
inline double bpm_at(double t, const HrProfile& p, double duration) {
  switch (p.kind) {
    case HrProfile::Kind::constant: return p.bpm_a;
    case HrProfile::Kind::step: return t < p.t_switch ? p.bpm_a : p.bpm_b;
    case HrProfile::Kind::ramp: return p.bpm_a + (p.bpm_b - p.bpm_a) * t / duration;
  }
  return p.bpm_a;
}

/// 2π·∫₀ᵗ bpm(τ)/60 dτ in closed form.
inline double pulse_phase(double t, const HrProfile& p, double duration) {
  double cycles = 0.0;
  switch (p.kind) {
    case HrProfile::Kind::constant:
      cycles = p.bpm_a * t / 60.0;
      break;
    case HrProfile::Kind::step:
      cycles = t < p.t_switch ? p.bpm_a * t / 60.0 : (p.bpm_a * p.t_switch + p.bpm_b * (t - p.t_switch)) / 60.0;
      break;
    case HrProfile::Kind::ramp:
      cycles = (p.bpm_a * t + (p.bpm_b - p.bpm_a) * t * t / (2.0 * duration)) / 60.0;
      break;
  }
  return 2.0 * std::numbers::pi * cycles;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Standard normals via Box-Muller from raw 64-bit draws.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    constexpr double scale = 0x1.0p-53;
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * scale;  // (0, 1]
    const double u2 = static_cast<double>(engine_() >> 11) * scale;          // [0, 1)
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool cached_ = false;
};

inline std::uint8_t quantize(double v) noexcept {
  // nearbyint follows the current rounding mode; FE_TONEAREST is ties-to-even.
  const double r = std::nearbyint(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

}  // namespace detail

inline std::uint64_t frame_seed(std::uint64_t seed, std::int64_t frame_index) noexcept {
  return detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(frame_index)));
}

/// Noise-free colour of the skin at time t, before quantization.
inline std::array<double, 3> skin_color(const SynthConfig& c, double t) {
  const double phase = pulse_phase(t, c.hr_profile, c.duration);
  double wave = std::sin(phase);
  if (c.second_harmonic) wave += kHarmonicAmplitude * std::sin(2.0 * phase);
  const double drift = 1.0 + c.illum_drift * std::sin(2.0 * std::numbers::pi * c.drift_hz * t);
  const double a = c.pulse_amplitude;
  return {c.base_color[0] * drift * (1.0 + kRedDepth * a * wave), c.base_color[1] * drift * (1.0 + a * wave),
          c.base_color[2] * drift * (1.0 + kBlueDepth * a * wave)};
}

/// The static face box: the central 60% of the frame.
inline FaceBox synth_face_box(const SynthConfig& c) {
  return {0, 0.2 * c.width, 0.2 * c.height, 0.6 * c.width, 0.6 * c.height};
}

/// Frame-by-frame renderer usable directly as a frame source. Each frame
/// depends only on (config, index), so frames can be rendered in any order.
class SynthSource {
 public:
  explicit SynthSource(SynthConfig config) : config_(std::move(config)) { validate(config_); }

  const SynthConfig& config() const noexcept { return config_; }
  std::int64_t size() const { return config_.frame_count(); }
  PixelFormat pixel_format() const noexcept { return config_.mono ? PixelFormat::gray8 : PixelFormat::rgb8_interleaved; }

  /// Raw frame bytes as they appear in the frames file.
  std::vector<std::uint8_t> render_bytes(std::int64_t index) const {
    const double t = static_cast<double>(index) / config_.fps;
    const auto rgb = skin_color(config_, t);
    const auto pixels = static_cast<std::size_t>(config_.width) * static_cast<std::size_t>(config_.height);
    const std::size_t channels = config_.mono ? 1 : 3;
    std::vector<std::uint8_t> bytes(pixels * channels);
    std::array<double, 3> level = rgb;
    if (config_.mono) level[0] = (rgb[0] + rgb[1] + rgb[2]) / 3.0;

    if (config_.noise_sigma == 0.0) {
      std::array<std::uint8_t, 3> q{};
      for (std::size_t c = 0; c < channels; ++c) q[c] = detail::quantize(level[c]);
      for (std::size_t i = 0; i < pixels; ++i) {
        for (std::size_t c = 0; c < channels; ++c) bytes[i * channels + c] = q[c];
      }
      return bytes;
    }
    detail::GaussianSource noise(frame_seed(config_.seed, index));
    for (std::size_t i = 0; i < pixels; ++i) {
      for (std::size_t c = 0; c < channels; ++c) {
        bytes[i * channels + c] = detail::quantize(level[c] + config_.noise_sigma * noise.next());
      }
    }
    return bytes;
  }

  Frame render(std::int64_t index) const {
    const auto bytes = render_bytes(index);
    const double t = static_cast<double>(index) / config_.fps;
    if (config_.mono) return replicate_mono(Plane(config_.width, config_.height, bytes), index, t);
    return deinterleave_rgb(bytes, config_.width, config_.height, index, t);
  }

  std::optional<Frame> next_frame() {
    if (cursor_ >= size()) return std::nullopt;
    return render(cursor_++);
  }

 private:
  SynthConfig config_;
  std::int64_t cursor_ = 0;
};

/// Writes manifest.json, frames.raw, boxes.csv and groundtruth.csv into `out_dir`.
inline SessionManifest render_session(const SynthConfig& config, const std::filesystem::path& out_dir) {
  SynthSource source(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  SessionManifest m;
  m.width = config.width;
  m.height = config.height;
  m.fps = config.fps;
  m.pixel_format = source.pixel_format();
  m.frame_count = source.size();
  m.frames_path = out_dir / "frames.raw";
  m.boxes_path = out_dir / "boxes.csv";
  m.groundtruth_path = out_dir / "groundtruth.csv";

  {
    std::ofstream frames(m.frames_path, std::ios::binary | std::ios::trunc);
    if (!frames) throw Error(ErrorCode::IoError, "cannot write " + m.frames_path.string());
    for (std::int64_t i = 0; i < m.frame_count; ++i) {
      const auto bytes = source.render_bytes(i);
      frames.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    if (!frames) throw Error(ErrorCode::IoError, "short write to " + m.frames_path.string());
  }
  {
    const auto box = synth_face_box(config);
    std::ofstream boxes(*m.boxes_path, std::ios::trunc);
    boxes << "frame,x,y,w,h\n" << fmt::format("*,{},{},{},{}\n", box.x, box.y, box.w, box.h);
    if (!boxes) throw Error(ErrorCode::IoError, "cannot write " + m.boxes_path->string());
  }
  {
    std::ofstream gt(*m.groundtruth_path, std::ios::trunc);
    gt << "t,bpm\n";
    for (int k = 0; k < config.duration; ++k) {
      gt << fmt::format("{},{:.3f}\n", k, bpm_at(static_cast<double>(k), config.hr_profile, config.duration));
    }
    if (!gt) throw Error(ErrorCode::IoError, "cannot write " + m.groundtruth_path->string());
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace rppg
