#include "foodtrack/anchors.hpp"

#include <algorithm>
#include <string>

#include "foodtrack/error.hpp"
#include "foodtrack/rng.hpp"

namespace foodtrack {

namespace {

struct Assignment {
  std::vector<int> cluster;
  std::vector<double> best_iou;
};

Assignment assign(std::span<const Anchor> boxes, std::span<const Anchor> centroids) {
  Assignment a;
  a.cluster.resize(boxes.size());
  a.best_iou.resize(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    int best = 0;
    double best_iou = -1.0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double v = shape_iou(boxes[i], centroids[c]);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(c);
      }
    }
    a.cluster[i] = best;
    a.best_iou[i] = best_iou;
  }
  return a;
}

double median(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

std::vector<Anchor> distinct_shapes(std::span<const Anchor> boxes) {
  std::vector<Anchor> shapes(boxes.begin(), boxes.end());
  const auto less = [](const Anchor& a, const Anchor& b) { return a.w < b.w || (a.w == b.w && a.h < b.h); };
  std::sort(shapes.begin(), shapes.end(), less);
  shapes.erase(std::unique(shapes.begin(), shapes.end()), shapes.end());
  return shapes;
}

void sort_by_area(std::vector<Anchor>& anchors) {
  std::sort(anchors.begin(), anchors.end(), [](const Anchor& a, const Anchor& b) {
    const double aa = a.w * a.h, bb = b.w * b.h;
    return aa < bb || (aa == bb && a.w < b.w);
  });
}

KMeansResult lloyd(std::span<const Anchor> boxes, std::vector<Anchor> centroids) {
  const std::size_t k = centroids.size();
  std::vector<int> previous;
  for (int iter = 0; iter < kMaxKMeansIterations; ++iter) {
    Assignment a = assign(boxes, centroids);
    if (a.cluster == previous) break;

    std::vector<std::vector<double>> ws(k), hs(k);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      ws[a.cluster[i]].push_back(boxes[i].w);
      hs[a.cluster[i]].push_back(boxes[i].h);
    }
    std::vector<bool> reseeded(boxes.size(), false);
    for (std::size_t c = 0; c < k; ++c) {
      if (!ws[c].empty()) {
        centroids[c] = Anchor{median(ws[c]), median(hs[c])};
        continue;
      }
      std::size_t worst = boxes.size();
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (reseeded[i]) continue;
        if (worst == boxes.size() || a.best_iou[i] < a.best_iou[worst]) worst = i;
      }
      reseeded[worst] = true;
      centroids[c] = boxes[worst];
    }
    previous = std::move(a.cluster);
  }
  KMeansResult result{std::move(centroids), 0.0};
  result.avg_iou = mean_best_iou(boxes, result.anchors);
  sort_by_area(result.anchors);
  return result;
}

void check_args(std::span<const Anchor> boxes, int k) {
  if (k < 1) throw ValueError("k-means: k must be >= 1");
  if (boxes.size() < static_cast<std::size_t>(k)) {
    throw DegenerateError("k-means: " + std::to_string(boxes.size()) + " boxes cannot form " + std::to_string(k) +
                          " clusters");
  }
  for (const Anchor& b : boxes) {
    if (!(b.w > 0.0) || !(b.h > 0.0)) throw ValueError("k-means: box shapes must be positive");
  }
}

KMeansResult best_of_restarts(std::span<const Anchor> boxes, const std::vector<Anchor>& shapes, int k,
                              std::uint64_t seed, int restarts) {
  KMeansResult best;
  best.avg_iou = -1.0;
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::vector<Anchor> pool = shapes;
    // Partial Fisher-Yates: the first k entries become the initial centroids.
    for (int i = 0; i < k; ++i) {
      const std::size_t j = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    KMeansResult run = lloyd(boxes, std::move(pool));
    if (run.avg_iou > best.avg_iou) best = std::move(run);
  }
  return best;
}

}  // namespace

double mean_best_iou(std::span<const Anchor> boxes, std::span<const Anchor> anchors) {
  if (boxes.empty() || anchors.empty()) return 0.0;
  const Assignment a = assign(boxes, anchors);
  double sum = 0.0;
  for (double v : a.best_iou) sum += v;
  return sum / static_cast<double>(boxes.size());
}

KMeansResult kmeans_anchors(std::span<const Anchor> boxes, int k, std::uint64_t seed, int restarts) {
  check_args(boxes, k);
  const std::vector<Anchor> shapes = distinct_shapes(boxes);
  if (shapes.size() < static_cast<std::size_t>(k)) {
    throw DegenerateError("k-means: only " + std::to_string(shapes.size()) + " distinct shapes for k=" +
                          std::to_string(k));
  }
  return best_of_restarts(boxes, shapes, k, seed, restarts);
}

std::vector<CurvePoint> avg_iou_curve(std::span<const Anchor> boxes, int k_max, std::uint64_t seed,
                                      int restarts) {
  check_args(boxes, k_max);
  const std::vector<Anchor> shapes = distinct_shapes(boxes);
  if (shapes.size() < static_cast<std::size_t>(k_max)) {
    throw DegenerateError("k-means: only " + std::to_string(shapes.size()) + " distinct shapes for k=" +
                          std::to_string(k_max));
  }

  std::vector<CurvePoint> curve;
  for (int k = 1; k <= k_max; ++k) {
    KMeansResult best = best_of_restarts(boxes, shapes, k, seed, restarts);
    if (k > 1) {
      // Extend the previous solution by the worst-covered shape not already used.
      std::vector<Anchor> extended = curve.back().anchors;
      const Assignment a = assign(boxes, extended);
      std::size_t worst = boxes.size();
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (std::find(extended.begin(), extended.end(), boxes[i]) != extended.end()) continue;
        if (worst == boxes.size() || a.best_iou[i] < a.best_iou[worst]) worst = i;
      }
      extended.push_back(boxes[worst]);

      KMeansResult as_is{extended, mean_best_iou(boxes, extended)};
      sort_by_area(as_is.anchors);
      KMeansResult refined = lloyd(boxes, extended);
      if (refined.avg_iou > best.avg_iou) best = std::move(refined);
      if (as_is.avg_iou > best.avg_iou) best = std::move(as_is);
    }
    curve.push_back(CurvePoint{k, best.avg_iou, std::move(best.anchors)});
  }
  return curve;
}

}  // namespace foodtrack
