#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "foodtrack/boxes.hpp"

namespace foodtrack {

inline constexpr int kDefaultRestarts = 10;
inline constexpr int kMaxKMeansIterations = 300;

struct KMeansResult {
  std::vector<Anchor> anchors;  // ascending area
  double avg_iou = 0.0;
};

struct CurvePoint {
  int k = 0;
  double avg_iou = 0.0;
  std::vector<Anchor> anchors;
};

// Mean over boxes of the best shape IoU against any anchor.
double mean_best_iou(std::span<const Anchor> boxes, std::span<const Anchor> anchors);

// k-means over box shapes with distance 1 - shape_iou. Each run starts from
// k distinct shapes drawn with a seeded generator; centroids move to the
// per-dimension median of their members; an emptied cluster is re-seeded
// with the worst-covered box. Runs stop when assignments repeat or after
// 300 iterations. The best of `restarts` runs by mean IoU is returned.
// Throws DegenerateError when k exceeds the number of distinct shapes.
KMeansResult kmeans_anchors(std::span<const Anchor> boxes, int k, std::uint64_t seed,
                            int restarts = kDefaultRestarts);

// Mean IoU for k = 1..k_max. For k > 1 the search also considers the k-1
// solution extended by the worst-covered box (both as-is and after running
// k-means from it), so the curve never decreases.
std::vector<CurvePoint> avg_iou_curve(std::span<const Anchor> boxes, int k_max, std::uint64_t seed,
                                      int restarts = kDefaultRestarts);

}  // namespace foodtrack
