#pragma once

#include <map>
#include <span>
#include <vector>

#include "foodtrack/annotations.hpp"
#include "foodtrack/boxes.hpp"

namespace foodtrack {

inline constexpr double kDefaultMatchIou = 0.5;

struct MatchResult {
  std::size_t detection = 0;  // index into the input list
  int class_id = 0;
  double confidence = 0.0;
  bool true_positive = false;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct EvalReport {
  std::map<int, double> per_class_ap;       // classes with >= 1 ground truth
  std::map<int, int> num_ground_truth;
  std::map<int, std::vector<PrPoint>> pr_points;
  double map_score = 0.0;
};

// Walks detections by confidence (ties by input index). Within its image
// and class, a detection is a true positive when the unmatched ground truth
// it overlaps most reaches iou_threshold; that ground truth is then used
// up. Output is in walk order. Throws ValueError for an image id absent
// from the ground truth.
std::vector<MatchResult> match_detections(std::span<const ImageDetection> detections,
                                          std::span<const GroundTruth> ground_truth,
                                          double iou_threshold = kDefaultMatchIou);

// Precision/recall after each ranked detection.
std::vector<PrPoint> pr_curve(const std::vector<bool>& ranked_true_positive, int num_gt);

// All-points interpolated AP: precision made monotone non-increasing from
// the right, summed over recall increments. Zero when num_gt == 0.
double average_precision(const std::vector<bool>& ranked_true_positive, int num_gt);
double average_precision(std::span<const MatchResult> ranked, int num_gt);

// Unweighted mean of per-class AP over classes present in the ground truth.
EvalReport mean_average_precision(std::span<const ImageDetection> detections,
                                  std::span<const GroundTruth> ground_truth,
                                  double iou_threshold = kDefaultMatchIou);

}  // namespace foodtrack
