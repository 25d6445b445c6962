// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>

namespace spdet {

/// Axis-aligned box as centre and extent, in normalised image coordinates.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x1() const { return cx - 0.5 * w; }
  double y1() const { return cy - 0.5 * h; }
  double x2() const { return cx + 0.5 * w; }
  double y2() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  static BBox from_corners(double x1, double y1, double x2, double y2) {
    return {0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1};
  }
  bool operator==(const BBox&) const = default;
};

inline double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  return iw > 0.0 && ih > 0.0 ? iw * ih : 0.0;
}

/// Intersection over union; 0 when the union is empty.
inline double iou(const BBox& a, const BBox& b) {
  // Extents from corners so that iou(b, b) is exactly 1.
  const double inter = intersection_area(a, b);
  const double uni = (a.x2() - a.x1()) * (a.y2() - a.y1()) + (b.x2() - b.x1()) * (b.y2() - b.y1()) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace spdet
