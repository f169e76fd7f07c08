#pragma once

// Forehead and cheek rectangles derived from a tracked face box.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rppg/csv.hpp"
#include "rppg/error.hpp"

namespace rppg {

struct FaceBox {
  std::int64_t frame_index = 0;
  double x = 0, y = 0, w = 0, h = 0;
};

/// Real-valued rectangle, before pixel snapping and clamping.
struct RectF {
  double x = 0, y = 0, w = 0, h = 0;
};

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
  long long area() const noexcept { return static_cast<long long>(w) * h; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

enum class RoiKind : std::size_t { forehead = 0, left_cheek = 1, right_cheek = 2 };
inline constexpr std::size_t kRoiCount = 3;

struct RoiSet {
  Rect forehead;
  Rect left_cheek;
  Rect right_cheek;

  const Rect& operator[](std::size_t i) const noexcept {
    return i == 0 ? forehead : (i == 1 ? left_cheek : right_cheek);
  }
  friend bool operator==(const RoiSet&, const RoiSet&) = default;
};

/// Placement of one ROI as fractions of the face box: offset (dx, dy) from the
/// box's top-left corner and size (w, h).
struct RoiRatio {
  double dx, dy, w, h;
};

struct RoiGeometry {
  RoiRatio forehead{0.25, 0.05, 0.50, 0.15};
  RoiRatio left_cheek{0.15, 0.50, 0.20, 0.20};
  RoiRatio right_cheek{0.65, 0.50, 0.20, 0.20};
};

inline constexpr long long kMinRoiArea = 4;

inline std::array<RectF, kRoiCount> roi_bounds(const FaceBox& box, const RoiGeometry& geometry = {}) {
  auto place = [&](const RoiRatio& r) {
    return RectF{box.x + r.dx * box.w, box.y + r.dy * box.h, r.w * box.w, r.h * box.h};
  };
  return {place(geometry.forehead), place(geometry.left_cheek), place(geometry.right_cheek)};
}

/// Snaps to whole pixels, then moves the rectangle inside [0,width)×[0,height),
/// shrinking it only when it is larger than the frame.
inline Rect clamp_to_frame(const RectF& r, int width, int height) {
  const auto snap = [](double v) { return static_cast<int>(std::floor(v + 0.5)); };
  const int x0 = snap(r.x), x1 = snap(r.x + r.w);
  const int y0 = snap(r.y), y1 = snap(r.y + r.h);
  Rect out;
  out.w = std::clamp(x1 - x0, 0, width);
  out.h = std::clamp(y1 - y0, 0, height);
  out.x = std::clamp(x0, 0, width - out.w);
  out.y = std::clamp(y0, 0, height - out.h);
  return out;
}

inline RoiSet derive_rois(const FaceBox& box, int frame_width, int frame_height, const RoiGeometry& geometry = {}) {
  if (!(box.w > 0) || !(box.h > 0)) {
    throw Error(ErrorCode::DegenerateRoi, "face box at frame " + std::to_string(box.frame_index) +
                                              " has non-positive size");
  }
  if (box.x >= frame_width || box.y >= frame_height || box.x + box.w <= 0 || box.y + box.h <= 0) {
    throw Error(ErrorCode::DegenerateRoi, "face box at frame " + std::to_string(box.frame_index) +
                                              " lies outside the frame");
  }
  const auto bounds = roi_bounds(box, geometry);
  std::array<Rect, kRoiCount> rects;
  for (std::size_t i = 0; i < kRoiCount; ++i) {
    rects[i] = clamp_to_frame(bounds[i], frame_width, frame_height);
    if (rects[i].area() < kMinRoiArea) {
      throw Error(ErrorCode::DegenerateRoi, "ROI " + std::to_string(i) + " at frame " +
                                                std::to_string(box.frame_index) + " has area " +
                                                std::to_string(rects[i].area()));
    }
  }
  return {rects[0], rects[1], rects[2]};
}

/// One box per frame from sparse annotations: gaps are linearly interpolated,
/// ends copy the nearest annotation.
inline std::vector<FaceBox> fill_box_track(const std::vector<FaceBox>& annotated, std::int64_t frame_count) {
  if (annotated.empty()) throw Error(ErrorCode::EmptyTrack, "box track has no rows");
  for (std::size_t i = 1; i < annotated.size(); ++i) {
    if (annotated[i].frame_index <= annotated[i - 1].frame_index) {
      throw Error(ErrorCode::NonMonotonicIndices,
                  "frame index " + std::to_string(annotated[i].frame_index) + " follows " +
                      std::to_string(annotated[i - 1].frame_index));
    }
  }
  std::vector<FaceBox> track(static_cast<std::size_t>(frame_count));
  std::size_t next = 0;  // first annotation with frame_index >= f
  for (std::int64_t f = 0; f < frame_count; ++f) {
    while (next < annotated.size() && annotated[next].frame_index < f) ++next;
    FaceBox box;
    if (next < annotated.size() && annotated[next].frame_index == f) {
      box = annotated[next];
    } else if (next == 0) {
      box = annotated.front();
    } else if (next == annotated.size()) {
      box = annotated.back();
    } else {
      const auto& a = annotated[next - 1];
      const auto& b = annotated[next];
      const double t = static_cast<double>(f - a.frame_index) / static_cast<double>(b.frame_index - a.frame_index);
      box.x = a.x + t * (b.x - a.x);
      box.y = a.y + t * (b.y - a.y);
      box.w = a.w + t * (b.w - a.w);
      box.h = a.h + t * (b.h - a.h);
    }
    box.frame_index = f;
    track[static_cast<std::size_t>(f)] = box;
  }
  return track;
}

/// Reads a `frame,x,y,w,h` CSV. A single row with frame `*` applies to every frame.
inline std::vector<FaceBox> load_box_track(const std::filesystem::path& boxes_path, std::int64_t frame_count) {
  const auto table = csv::read(boxes_path, {"frame", "x", "y", "w", "h"});
  if (table.rows.empty()) throw Error(ErrorCode::EmptyTrack, boxes_path.string() + " has no rows");

  std::vector<FaceBox> annotated;
  bool broadcast = false;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = boxes_path.string() + ":" + std::to_string(table.line_numbers[i]);
    FaceBox box;
    if (row[0] == "*") {
      if (table.rows.size() != 1) throw Error(ErrorCode::MalformedCsv, where + ": '*' row must be the only row");
      broadcast = true;
    } else {
      box.frame_index = csv::to_integer(row[0], where);
      if (box.frame_index < 0 || box.frame_index >= frame_count) {
        throw Error(ErrorCode::MalformedCsv, where + ": frame index outside [0, " + std::to_string(frame_count) + ")");
      }
    }
    box.x = csv::to_double(row[1], where);
    box.y = csv::to_double(row[2], where);
    box.w = csv::to_double(row[3], where);
    box.h = csv::to_double(row[4], where);
    if (!(box.w > 0) || !(box.h > 0)) throw Error(ErrorCode::MalformedCsv, where + ": box size must be positive");
    annotated.push_back(box);
  }
  if (broadcast) {
    std::vector<FaceBox> track(static_cast<std::size_t>(frame_count), annotated.front());
    for (std::int64_t f = 0; f < frame_count; ++f) track[static_cast<std::size_t>(f)].frame_index = f;
    return track;
  }
  return fill_box_track(annotated, frame_count);
}

}  // namespace rppg
