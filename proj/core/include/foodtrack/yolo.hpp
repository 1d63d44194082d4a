#pragma once

#include <span>
#include <vector>

#include "foodtrack/boxes.hpp"

namespace foodtrack {

inline constexpr double kDefaultConfidenceThreshold = 0.4;
inline constexpr double kDefaultNmsThreshold = 0.3;

// Per-box field order inside the raw output and the training target.
enum BoxField : int { kTx = 0, kTy = 1, kTw = 2, kTh = 3, kObjectness = 4, kFirstClass = 5 };

// Logit written by encode_logits() for certain presence/absence; large
// enough that sigmoid and softmax saturate to exactly 0 and 1 in double.
inline constexpr float kSaturatedLogit = 1000.0f;

// Flat position of (cell, anchor, field) in an S*S*anchors*(5+classes) vector.
std::size_t yolo_index(int grid, int num_anchors, int num_classes, int cell_y, int cell_x, int anchor,
                       int field);

double sigmoid(double x);

// Training target: each ground-truth box goes to the cell holding its
// center and the anchor of highest shape IoU (lowest index on ties), with
// t_x, t_y, t_w, t_h the inverse of decode(), objectness 1 and a one-hot
// class. Every other slot is zero. Throws CollisionError when two boxes
// claim one slot and ValueError on invalid boxes or class ids.
std::vector<float> encode(const GroundTruth& gt, std::span<const Anchor> anchors, int grid, int num_classes);

// Same assignment, but objectness and class channels hold saturated logits
// so decode() reproduces the ground truth exactly at any threshold < 1.
std::vector<float> encode_logits(const GroundTruth& gt, std::span<const Anchor> anchors, int grid,
                                 int num_classes);

// Raw network output to detections:
//   cx = (cell_x + sigmoid(t_x)) / S, cy likewise,
//   w = anchor_w * exp(t_w) / S, h likewise,
//   confidence = sigmoid(objectness) * max softmax(class logits).
// Boxes are clamped to the image; detections with confidence strictly above
// the threshold come back sorted by confidence, ties by slot order.
// Thresholds outside [0, 1] (or NaN) throw ValueError, here and in nms().
std::vector<Detection> decode(std::span<const float> raw, std::span<const Anchor> anchors, int grid,
                              int num_classes, double conf_threshold = kDefaultConfidenceThreshold);

// Greedy per-class suppression: walk detections by confidence (ties by input
// index), dropping any whose IoU with an already kept same-class box exceeds
// the threshold. Output is in that walk order.
std::vector<Detection> nms(std::span<const Detection> detections,
                           double overlap_threshold = kDefaultNmsThreshold);

}  // namespace foodtrack
