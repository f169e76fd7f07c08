#pragma once

// Raw frame sessions: a JSON manifest next to a headerless file of
// concatenated 8-bit frames. Single-channel (NIR) input is expanded to
// three identical planes at ingest so downstream code always sees R, G, B.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rppg/error.hpp"

namespace rppg {

enum class PixelFormat { rgb8_interleaved, gray8 };

constexpr std::size_t bytes_per_pixel(PixelFormat format) noexcept {
  return format == PixelFormat::rgb8_interleaved ? 3 : 1;
}

constexpr std::string_view manifest_name(PixelFormat format) noexcept {
  return format == PixelFormat::rgb8_interleaved ? "rgb8" : "gray8";
}

struct SessionManifest {
  int width = 0;
  int height = 0;
  double fps = 0.0;
  PixelFormat pixel_format = PixelFormat::rgb8_interleaved;
  std::int64_t frame_count = 0;
  std::filesystem::path frames_path;
  std::optional<std::filesystem::path> boxes_path;
  std::optional<std::filesystem::path> groundtruth_path;

  std::size_t frame_bytes() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
           bytes_per_pixel(pixel_format);
  }
  double duration() const noexcept { return static_cast<double>(frame_count) / fps; }
};

/// One 8-bit image plane, row-major.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Plane() = default;
  Plane(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h) {}
  Plane(int w, int h, std::vector<std::uint8_t> pixels) : width(w), height(h), data(std::move(pixels)) {}

  std::uint8_t at(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
  std::span<const std::uint8_t> row(int y) const noexcept {
    return {data.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
  }
  friend bool operator==(const Plane&, const Plane&) = default;
};

struct Frame {
  std::int64_t index = 0;
  double timestamp = 0.0;
  std::array<Plane, 3> channels;  // R, G, B

  int width() const noexcept { return channels[0].width; }
  int height() const noexcept { return channels[0].height; }
};

inline Frame replicate_mono(Plane plane, std::int64_t index = 0, double timestamp = 0.0) {
  Frame frame;
  frame.index = index;
  frame.timestamp = timestamp;
  frame.channels[0] = plane;
  frame.channels[1] = plane;
  frame.channels[2] = std::move(plane);
  return frame;
}

/// Splits interleaved R,G,B bytes into three planes.
inline Frame deinterleave_rgb(std::span<const std::uint8_t> bytes, int width, int height,
                              std::int64_t index = 0, double timestamp = 0.0) {
  const auto pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() != pixels * 3) {
    throw Error(ErrorCode::SizeMismatch, "rgb8 frame needs " + std::to_string(pixels * 3) + " bytes, got " +
                                             std::to_string(bytes.size()));
  }
  Frame frame;
  frame.index = index;
  frame.timestamp = timestamp;
  for (auto& plane : frame.channels) plane = Plane(width, height);
  auto* r = frame.channels[0].data.data();
  auto* g = frame.channels[1].data.data();
  auto* b = frame.channels[2].data.data();
  const auto* src = bytes.data();
  for (std::size_t i = 0; i < pixels; ++i) {
    r[i] = src[3 * i];
    g[i] = src[3 * i + 1];
    b[i] = src[3 * i + 2];
  }
  return frame;
}

namespace detail {

inline double parse_fps(const nlohmann::json& value) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    // "30000/1001"
    const auto text = value.get<std::string>();
    const auto slash = text.find('/');
    try {
      if (slash == std::string::npos) return std::stod(text);
      const double num = std::stod(text.substr(0, slash));
      const double den = std::stod(text.substr(slash + 1));
      if (den <= 0) return 0.0;
      return num / den;
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedManifest, "fps is not a number or rational: " + text);
    }
  }
  throw Error(ErrorCode::MalformedManifest, "fps must be a number or \"num/den\" string");
}

}  // namespace detail

inline void validate(const SessionManifest& m) {
  if (m.width < 16 || m.height < 16) {
    throw Error(ErrorCode::MalformedManifest, "width and height must be >= 16");
  }
  if (!(m.fps > 0.0)) throw Error(ErrorCode::MalformedManifest, "fps must be > 0");
  if (m.frame_count < 1) throw Error(ErrorCode::MalformedManifest, "frame_count must be >= 1");
}

inline SessionManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedManifest, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedManifest, "manifest must be a JSON object");

  static const std::array<std::string_view, 8> known = {"width",       "height", "fps",   "pixel_format",
                                                        "frame_count", "frames", "boxes", "groundtruth"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::MalformedManifest, "unknown key '" + key + "'");
    }
  }
  for (const char* key : {"width", "height", "fps", "pixel_format", "frame_count", "frames"}) {
    if (!doc.contains(key)) throw Error(ErrorCode::MalformedManifest, std::string("missing key '") + key + "'");
  }

  SessionManifest m;
  try {
    if (!doc["width"].is_number_integer() || !doc["height"].is_number_integer() ||
        !doc["frame_count"].is_number_integer()) {
      throw Error(ErrorCode::MalformedManifest, "width, height and frame_count must be integers");
    }
    m.width = doc["width"].get<int>();
    m.height = doc["height"].get<int>();
    m.frame_count = doc["frame_count"].get<std::int64_t>();
    m.fps = detail::parse_fps(doc["fps"]);
    const auto format = doc["pixel_format"].get<std::string>();
    if (format == "rgb8") {
      m.pixel_format = PixelFormat::rgb8_interleaved;
    } else if (format == "gray8") {
      m.pixel_format = PixelFormat::gray8;
    } else {
      throw Error(ErrorCode::MalformedManifest, "pixel_format must be \"rgb8\" or \"gray8\", got \"" + format + "\"");
    }
    m.frames_path = base_dir / doc["frames"].get<std::string>();
    if (doc.contains("boxes")) m.boxes_path = base_dir / doc["boxes"].get<std::string>();
    if (doc.contains("groundtruth")) m.groundtruth_path = base_dir / doc["groundtruth"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedManifest, e.what());
  }
  validate(m);
  return m;
}

inline SessionManifest read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open manifest " + manifest_path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text, manifest_path.parent_path());
}

/// Writes `m` as JSON. File references are stored relative to the manifest's directory.
inline void write_manifest(const SessionManifest& m, const std::filesystem::path& manifest_path) {
  const auto base = manifest_path.parent_path();
  auto rel = [&](const std::filesystem::path& p) { return p.lexically_relative(base).generic_string(); };
  nlohmann::ordered_json doc;
  doc["width"] = m.width;
  doc["height"] = m.height;
  doc["fps"] = m.fps;
  doc["pixel_format"] = std::string(manifest_name(m.pixel_format));
  doc["frame_count"] = m.frame_count;
  doc["frames"] = rel(m.frames_path);
  if (m.boxes_path) doc["boxes"] = rel(*m.boxes_path);
  if (m.groundtruth_path) doc["groundtruth"] = rel(*m.groundtruth_path);
  std::ofstream out(manifest_path, std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + manifest_path.string());
}

/// Sequential reader over a session's frames. Not safe to share between threads;
/// open one stream per reader instead.
class FrameStream {
 public:
  explicit FrameStream(SessionManifest manifest) : manifest_(std::move(manifest)) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(manifest_.frames_path, ec);
    if (ec) throw Error(ErrorCode::MissingFile, "cannot open frames file " + manifest_.frames_path.string());
    const auto expected = manifest_.frame_bytes() * static_cast<std::uintmax_t>(manifest_.frame_count);
    if (size != expected) {
      throw Error(ErrorCode::SizeMismatch, "frames file " + manifest_.frames_path.string() + " has " +
                                               std::to_string(size) + " bytes, manifest implies " +
                                               std::to_string(expected));
    }
    in_.open(manifest_.frames_path, std::ios::binary);
    if (!in_) throw Error(ErrorCode::MissingFile, "cannot open frames file " + manifest_.frames_path.string());
    buffer_.resize(manifest_.frame_bytes());
  }

  const SessionManifest& manifest() const noexcept { return manifest_; }
  std::int64_t cursor() const noexcept { return cursor_; }
  std::int64_t size() const noexcept { return manifest_.frame_count; }

  std::optional<Frame> next_frame() {
    if (cursor_ >= manifest_.frame_count) return std::nullopt;
    in_.read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
    if (in_.gcount() != static_cast<std::streamsize>(buffer_.size())) {
      throw Error(ErrorCode::IoError, "short read at frame " + std::to_string(cursor_));
    }
    const std::int64_t index = cursor_++;
    const double timestamp = static_cast<double>(index) / manifest_.fps;
    if (manifest_.pixel_format == PixelFormat::gray8) {
      return replicate_mono(Plane(manifest_.width, manifest_.height, buffer_), index, timestamp);
    }
    return deinterleave_rgb(buffer_, manifest_.width, manifest_.height, index, timestamp);
  }

 private:
  SessionManifest manifest_;
  std::ifstream in_;
  std::vector<std::uint8_t> buffer_;
  std::int64_t cursor_ = 0;
};

inline FrameStream open_session(const std::filesystem::path& manifest_path) {
  return FrameStream(read_manifest(manifest_path));
}

}  // namespace rppg
