#include "foodtrack/boxes.hpp"

#include <algorithm>

namespace foodtrack {

BBox BBox::from_corners(double x_min, double y_min, double x_max, double y_max) {
  return BBox{0.5 * (x_min + x_max), 0.5 * (y_min + y_max), x_max - x_min, y_max - y_min};
}

bool is_valid(const BBox& box) {
  return box.cx >= 0.0 && box.cx <= 1.0 && box.cy >= 0.0 && box.cy <= 1.0 && box.w > 0.0 &&
         box.w <= 1.0 && box.h > 0.0 && box.h <= 1.0;
}

BBox clamp_to_image(const BBox& box) {
  return BBox::from_corners(std::clamp(box.x_min(), 0.0, 1.0), std::clamp(box.y_min(), 0.0, 1.0),
                            std::clamp(box.x_max(), 0.0, 1.0), std::clamp(box.y_max(), 0.0, 1.0));
}

double iou(const BBox& a, const BBox& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return std::clamp(inter / (area_a + area_b - inter), 0.0, 1.0);
}

double shape_iou(const Anchor& a, const Anchor& b) {
  if (a.w <= 0.0 || a.h <= 0.0 || b.w <= 0.0 || b.h <= 0.0) return 0.0;
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  return inter / (a.w * a.h + b.w * b.h - inter);
}

}  // namespace foodtrack
