#include "foodtrack/eval.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>

#include "foodtrack/error.hpp"

namespace foodtrack {

namespace {

struct ImageTruth {
  std::vector<GroundTruthItem> items;
  std::vector<bool> used;
};

std::unordered_map<std::string, ImageTruth> index_truth(std::span<const GroundTruth> ground_truth) {
  std::unordered_map<std::string, ImageTruth> by_image;
  for (const GroundTruth& gt : ground_truth) {
    ImageTruth& t = by_image[gt.image_id];
    t.items.insert(t.items.end(), gt.items.begin(), gt.items.end());
  }
  for (auto& [id, t] : by_image) t.used.assign(t.items.size(), false);
  return by_image;
}

std::vector<bool> true_positive_flags(std::span<const MatchResult> ranked) {
  std::vector<bool> flags;
  flags.reserve(ranked.size());
  for (const MatchResult& m : ranked) flags.push_back(m.true_positive);
  return flags;
}

}  // namespace

std::vector<MatchResult> match_detections(std::span<const ImageDetection> detections,
                                          std::span<const GroundTruth> ground_truth, double iou_threshold) {
  auto by_image = index_truth(ground_truth);
  for (const ImageDetection& d : detections) {
    if (!by_image.contains(d.image_id)) {
      throw ValueError("match_detections: detection refers to unknown image '" + d.image_id + "'");
    }
  }

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].detection.confidence > detections[b].detection.confidence;
  });

  std::vector<MatchResult> out;
  out.reserve(order.size());
  for (std::size_t i : order) {
    const Detection& det = detections[i].detection;
    ImageTruth& truth = by_image.at(detections[i].image_id);
    std::size_t best = truth.items.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < truth.items.size(); ++g) {
      if (truth.used[g] || truth.items[g].class_id != det.class_id) continue;
      const double v = iou(det.box, truth.items[g].box);
      if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    const bool tp = best < truth.items.size() && best_iou >= iou_threshold;
    if (tp) truth.used[best] = true;
    out.push_back(MatchResult{i, det.class_id, det.confidence, tp});
  }
  return out;
}

std::vector<PrPoint> pr_curve(const std::vector<bool>& ranked_true_positive, int num_gt) {
  std::vector<PrPoint> points;
  points.reserve(ranked_true_positive.size());
  int tp = 0;
  for (std::size_t i = 0; i < ranked_true_positive.size(); ++i) {
    if (ranked_true_positive[i]) ++tp;
    const double recall = num_gt > 0 ? static_cast<double>(tp) / num_gt : 0.0;
    points.push_back(PrPoint{recall, static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  return points;
}

double average_precision(const std::vector<bool>& ranked_true_positive, int num_gt) {
  if (num_gt < 0) throw ValueError("average_precision: num_gt must be >= 0");
  if (num_gt == 0) return 0.0;
  const std::vector<PrPoint> points = pr_curve(ranked_true_positive, num_gt);
  std::vector<double> envelope(points.size());
  double running = 0.0;
  for (std::size_t i = points.size(); i-- > 0;) {
    running = std::max(running, points[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double previous_recall = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!ranked_true_positive[i]) continue;
    ap += (points[i].recall - previous_recall) * envelope[i];
    previous_recall = points[i].recall;
  }
  return std::clamp(ap, 0.0, 1.0);
}

double average_precision(std::span<const MatchResult> ranked, int num_gt) {
  return average_precision(true_positive_flags(ranked), num_gt);
}

EvalReport mean_average_precision(std::span<const ImageDetection> detections,
                                  std::span<const GroundTruth> ground_truth, double iou_threshold) {
  EvalReport report;
  for (const GroundTruth& gt : ground_truth) {
    for (const GroundTruthItem& item : gt.items) ++report.num_ground_truth[item.class_id];
  }
  const std::vector<MatchResult> matches = match_detections(detections, ground_truth, iou_threshold);

  double sum = 0.0;
  for (const auto& [class_id, count] : report.num_ground_truth) {
    std::vector<MatchResult> ranked;
    for (const MatchResult& m : matches) {
      if (m.class_id == class_id) ranked.push_back(m);
    }
    const double ap = average_precision(ranked, count);
    report.per_class_ap[class_id] = ap;
    report.pr_points[class_id] = pr_curve(true_positive_flags(ranked), count);
    sum += ap;
  }
  if (!report.per_class_ap.empty()) report.map_score = sum / static_cast<double>(report.per_class_ap.size());
  return report;
}

}  // namespace foodtrack
