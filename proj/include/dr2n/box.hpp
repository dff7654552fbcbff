#pragma once

#include <algorithm>

namespace dr2n {

/// Axis-aligned box in center-size form, unit-square coordinates.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;
};

inline double iou(const Box& a, const Box& b) {
  const double ax0 = a.cx - 0.5 * a.w, ax1 = a.cx + 0.5 * a.w;
  const double ay0 = a.cy - 0.5 * a.h, ay1 = a.cy + 0.5 * a.h;
  const double bx0 = b.cx - 0.5 * b.w, bx1 = b.cx + 0.5 * b.w;
  const double by0 = b.cy - 0.5 * b.h, by1 = b.cy + 0.5 * b.h;
  const double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double iy = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

} // namespace dr2n
