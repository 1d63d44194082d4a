#include "foodtrack/yolo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "foodtrack/error.hpp"

namespace foodtrack {

namespace {

// Keeps logit() finite for centers on a cell edge.
constexpr double kOffsetEpsilon = 1e-9;

struct SlotAssignment {
  int cell_x;
  int cell_y;
  int anchor;
};

void check_codec_args(std::span<const Anchor> anchors, int grid, int num_classes) {
  if (anchors.empty()) throw ValueError("YOLO codec: anchor list is empty");
  if (grid < 1) throw ValueError("YOLO codec: grid size must be >= 1");
  if (num_classes < 1) throw ValueError("YOLO codec: num_classes must be >= 1");
  for (const Anchor& a : anchors) {
    if (!(a.w > 0.0) || !(a.h > 0.0)) throw ValueError("YOLO codec: anchors must have positive dimensions");
  }
}

SlotAssignment assign(const BBox& box, std::span<const Anchor> anchors, int grid) {
  SlotAssignment s;
  s.cell_x = std::min(static_cast<int>(std::floor(box.cx * grid)), grid - 1);
  s.cell_y = std::min(static_cast<int>(std::floor(box.cy * grid)), grid - 1);
  const Anchor shape{box.w * grid, box.h * grid};
  s.anchor = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double v = shape_iou(shape, anchors[i]);
    if (v > best) {
      best = v;
      s.anchor = static_cast<int>(i);
    }
  }
  return s;
}

double logit(double p) {
  p = std::clamp(p, kOffsetEpsilon, 1.0 - kOffsetEpsilon);
  return std::log(p / (1.0 - p));
}

std::vector<float> encode_impl(const GroundTruth& gt, std::span<const Anchor> anchors, int grid,
                               int num_classes, bool logits) {
  check_codec_args(anchors, grid, num_classes);
  const int num_anchors = static_cast<int>(anchors.size());
  const int stride = 5 + num_classes;
  std::vector<float> target(static_cast<std::size_t>(grid) * grid * num_anchors * stride, 0.0f);
  if (logits) {
    for (std::size_t i = kObjectness; i < target.size(); i += stride) target[i] = -kSaturatedLogit;
  }

  std::vector<int> owner(static_cast<std::size_t>(grid) * grid * num_anchors, -1);
  for (std::size_t n = 0; n < gt.items.size(); ++n) {
    const GroundTruthItem& item = gt.items[n];
    if (!is_valid(item.box)) {
      throw ValueError("encode: invalid box for item " + std::to_string(n) + " of image '" + gt.image_id + "'");
    }
    if (item.class_id < 0 || item.class_id >= num_classes) {
      throw ValueError("encode: class id " + std::to_string(item.class_id) + " out of range");
    }
    const SlotAssignment s = assign(item.box, anchors, grid);
    const std::size_t slot = (static_cast<std::size_t>(s.cell_y) * grid + s.cell_x) * num_anchors + s.anchor;
    if (owner[slot] >= 0) {
      std::ostringstream os;
      os << "encode: items " << owner[slot] << " and " << n << " of image '" << gt.image_id
         << "' both map to cell (" << s.cell_x << "," << s.cell_y << ") anchor " << s.anchor;
      throw CollisionError(os.str());
    }
    owner[slot] = static_cast<int>(n);

    const Anchor& a = anchors[s.anchor];
    float* dst = &target[slot * stride];
    dst[kTx] = static_cast<float>(logit(item.box.cx * grid - s.cell_x));
    dst[kTy] = static_cast<float>(logit(item.box.cy * grid - s.cell_y));
    dst[kTw] = static_cast<float>(std::log(item.box.w * grid / a.w));
    dst[kTh] = static_cast<float>(std::log(item.box.h * grid / a.h));
    if (logits) {
      dst[kObjectness] = kSaturatedLogit;
      for (int c = 0; c < num_classes; ++c) {
        dst[kFirstClass + c] = c == item.class_id ? kSaturatedLogit : -kSaturatedLogit;
      }
    } else {
      dst[kObjectness] = 1.0f;
      dst[kFirstClass + item.class_id] = 1.0f;
    }
  }
  return target;
}

}  // namespace

std::size_t yolo_index(int grid, int num_anchors, int num_classes, int cell_y, int cell_x, int anchor,
                       int field) {
  return ((static_cast<std::size_t>(cell_y) * grid + cell_x) * num_anchors + anchor) * (5 + num_classes) + field;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<float> encode(const GroundTruth& gt, std::span<const Anchor> anchors, int grid, int num_classes) {
  return encode_impl(gt, anchors, grid, num_classes, false);
}

std::vector<float> encode_logits(const GroundTruth& gt, std::span<const Anchor> anchors, int grid,
                                 int num_classes) {
  return encode_impl(gt, anchors, grid, num_classes, true);
}

std::vector<Detection> decode(std::span<const float> raw, std::span<const Anchor> anchors, int grid,
                              int num_classes, double conf_threshold) {
  check_codec_args(anchors, grid, num_classes);
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw ValueError("decode: confidence threshold must lie in [0, 1]");
  }
  const int num_anchors = static_cast<int>(anchors.size());
  const int stride = 5 + num_classes;
  const std::size_t expected = static_cast<std::size_t>(grid) * grid * num_anchors * stride;
  if (raw.size() != expected) {
    throw ShapeError("decode: raw output has " + std::to_string(raw.size()) + " values, expected " +
                     std::to_string(expected) + " (S=" + std::to_string(grid) + ", anchors=" +
                     std::to_string(num_anchors) + ", classes=" + std::to_string(num_classes) + ")");
  }

  std::vector<Detection> out;
  for (int cy = 0; cy < grid; ++cy) {
    for (int cx = 0; cx < grid; ++cx) {
      for (int a = 0; a < num_anchors; ++a) {
        const float* v = &raw[yolo_index(grid, num_anchors, num_classes, cy, cx, a, 0)];
        const double objectness = sigmoid(v[kObjectness]);
        if (!(objectness > conf_threshold)) continue;  // class prob <= 1 cannot lift it

        int best = 0;
        double max_logit = v[kFirstClass];
        for (int c = 1; c < num_classes; ++c) {
          if (v[kFirstClass + c] > max_logit) {
            max_logit = v[kFirstClass + c];
            best = c;
          }
        }
        double denom = 0.0;
        for (int c = 0; c < num_classes; ++c) denom += std::exp(static_cast<double>(v[kFirstClass + c]) - max_logit);
        const double confidence = objectness / denom;
        if (!std::isfinite(confidence)) throw ValueError("decode: non-finite values in raw output");
        if (!(confidence > conf_threshold)) continue;

        BBox box;
        box.cx = (cx + sigmoid(v[kTx])) / grid;
        box.cy = (cy + sigmoid(v[kTy])) / grid;
        box.w = anchors[a].w * std::exp(static_cast<double>(v[kTw])) / grid;
        box.h = anchors[a].h * std::exp(static_cast<double>(v[kTh])) / grid;
        if (!std::isfinite(box.cx) || !std::isfinite(box.cy) || std::isnan(box.w) || std::isnan(box.h)) {
          throw ValueError("decode: non-finite values in raw output");
        }
        out.push_back(Detection{clamp_to_image(box), best, std::clamp(confidence, 0.0, 1.0)});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
  return out;
}

std::vector<Detection> nms(std::span<const Detection> detections, double overlap_threshold) {
  if (!(overlap_threshold >= 0.0 && overlap_threshold <= 1.0)) {
    throw ValueError("nms: overlap threshold must lie in [0, 1]");
  }
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::vector<Detection> kept;
  for (std::size_t i : order) {
    const Detection& d = detections[i];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.class_id == d.class_id && iou(k.box, d.box) > overlap_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace foodtrack
