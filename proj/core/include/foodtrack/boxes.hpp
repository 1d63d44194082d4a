#pragma once

#include <string>
#include <vector>

namespace foodtrack {

// Center-format box in normalized image coordinates.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x_min() const { return cx - 0.5 * w; }
  double x_max() const { return cx + 0.5 * w; }
  double y_min() const { return cy - 0.5 * h; }
  double y_max() const { return cy + 0.5 * h; }
  double area() const { return w > 0.0 && h > 0.0 ? w * h : 0.0; }

  static BBox from_corners(double x_min, double y_min, double x_max, double y_max);

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Prior box shape in grid-cell units.
struct Anchor {
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

struct Detection {
  BBox box;
  int class_id = 0;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthItem {
  BBox box;
  int class_id = 0;

  friend bool operator==(const GroundTruthItem&, const GroundTruthItem&) = default;
};

struct GroundTruth {
  std::string image_id;
  std::vector<GroundTruthItem> items;
};

// True when 0 <= cx, cy <= 1 and 0 < w, h <= 1.
bool is_valid(const BBox& box);

// Corners clipped to [0, 1].
BBox clamp_to_image(const BBox& box);

// Intersection over union. Zero-area boxes score 0 against everything,
// themselves included.
double iou(const BBox& a, const BBox& b);

// IoU of two co-centered shapes: min(w) * min(h) / union.
double shape_iou(const Anchor& a, const Anchor& b);

}  // namespace foodtrack
