#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "foodtrack/boxes.hpp"
#include "foodtrack/error.hpp"
#include "foodtrack/rng.hpp"
#include "foodtrack/yolo.hpp"
#include "oracles.hpp"

using namespace foodtrack;

namespace {

BBox random_box(SplitMix64& rng) {
  const double w = rng.uniform(0.02, 0.6), h = rng.uniform(0.02, 0.6);
  return {rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h};
}

std::vector<Detection> random_detections(SplitMix64& rng, int n, int classes) {
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    // coarse confidences so ties actually happen
    dets.push_back({random_box(rng), static_cast<int>(rng.below(classes)), std::round(rng.uniform() * 20) / 20});
  }
  return dets;
}

const std::vector<Anchor> kAnchors{{0.6, 0.7}, {1.5, 1.2}, {2.8, 3.5}, {4.5, 2.2}, {5.5, 6.0}};

}  // namespace

TEST(Geometry, IouHandCases) {
  const BBox a = BBox::from_corners(0.0, 0.0, 0.2, 0.2);
  const BBox b = BBox::from_corners(0.1, 0.1, 0.3, 0.3);
  EXPECT_NEAR(iou(a, b), 1.0 / 7.0, 1e-12);
  EXPECT_NEAR(iou(a, a), 1.0, 1e-12);
  EXPECT_EQ(iou(a, BBox::from_corners(0.5, 0.5, 0.6, 0.6)), 0.0);
  // touching edges share no area
  EXPECT_EQ(iou(a, BBox::from_corners(0.2, 0.0, 0.4, 0.2)), 0.0);
  const BBox flat{0.5, 0.5, 0.0, 0.3};
  EXPECT_EQ(iou(flat, flat), 0.0);
  EXPECT_EQ(iou(flat, a), 0.0);
}

TEST(Geometry, IouInvariances) {
  SplitMix64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const BBox a = random_box(rng), b = random_box(rng);
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, oracle::box_iou(a, b), 1e-12);
    const double s = rng.uniform(0.2, 3.0), dx = rng.uniform(-1, 1), dy = rng.uniform(-1, 1);
    const BBox as{a.cx * s + dx, a.cy * s + dy, a.w * s, a.h * s};
    const BBox bs{b.cx * s + dx, b.cy * s + dy, b.w * s, b.h * s};
    EXPECT_NEAR(iou(as, bs), v, 1e-9);
  }
}

TEST(Geometry, ShapeIou) {
  EXPECT_NEAR(shape_iou({1, 1}, {2, 2}), 0.25, 1e-12);
  EXPECT_NEAR(shape_iou({2, 1}, {1, 2}), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(shape_iou({4, 1}, {1, 1}), 0.25, 1e-12);
  EXPECT_EQ(shape_iou({3, 5}, {3, 5}), 1.0);
  SplitMix64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const Anchor a{rng.uniform(0.1, 7), rng.uniform(0.1, 7)}, b{rng.uniform(0.1, 7), rng.uniform(0.1, 7)};
    EXPECT_NEAR(shape_iou(a, b), oracle::shape_overlap(a.w, a.h, b.w, b.h), 1e-12);
    EXPECT_EQ(shape_iou(a, b), shape_iou(b, a));
  }
}

TEST(Geometry, ValidityAndClamp) {
  EXPECT_TRUE(is_valid({0.5, 0.5, 1.0, 1.0}));
  EXPECT_FALSE(is_valid({0.5, 0.5, 0.0, 0.2}));
  EXPECT_FALSE(is_valid({1.2, 0.5, 0.1, 0.2}));
  EXPECT_FALSE(is_valid({0.5, 0.5, std::nan(""), 0.2}));
  const BBox c = clamp_to_image(BBox::from_corners(-0.2, 0.5, 0.4, 1.3));
  EXPECT_NEAR(c.x_min(), 0.0, 1e-12);
  EXPECT_NEAR(c.x_max(), 0.4, 1e-12);
  EXPECT_NEAR(c.y_max(), 1.0, 1e-12);
}

TEST(Codec, CenterCellDecodesToMiddle) {
  const int S = 7, C = 3;
  std::vector<float> raw(static_cast<std::size_t>(S * S * 5 * (5 + C)), 0.0f);
  raw[yolo_index(S, 5, C, 3, 3, 1, kObjectness)] = 20.0f;
  raw[yolo_index(S, 5, C, 3, 3, 1, kFirstClass + 2)] = 20.0f;
  const auto dets = decode(raw, kAnchors, S, C, 0.5);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_NEAR(dets[0].box.cx, 0.5, 1e-12);
  EXPECT_NEAR(dets[0].box.cy, 0.5, 1e-12);
  // t_w = t_h = 0 leaves the anchor's own size
  EXPECT_NEAR(dets[0].box.w, 1.5 / 7, 1e-12);
  EXPECT_NEAR(dets[0].box.h, 1.2 / 7, 1e-12);
  EXPECT_EQ(dets[0].class_id, 2);
  const double obj = 1.0 / (1.0 + std::exp(-20.0));
  const double cls = std::exp(20.0) / (std::exp(20.0) + 2.0);
  EXPECT_NEAR(dets[0].confidence, obj * cls, 1e-12);
}

TEST(Codec, ThresholdIsStrict) {
  const int S = 2, C = 1;
  std::vector<float> raw(static_cast<std::size_t>(S * S * 1 * 6), -50.0f);
  raw[yolo_index(S, 1, C, 0, 0, 0, kObjectness)] = 0.0f;  // sigmoid 0.5, one class
  raw[yolo_index(S, 1, C, 0, 0, 0, kFirstClass)] = 0.0f;
  const std::vector<Anchor> one{{1.0, 1.0}};
  EXPECT_EQ(decode(raw, one, S, C, 0.5).size(), 0u);
  EXPECT_EQ(decode(raw, one, S, C, 0.4999).size(), 1u);
  for (const Detection& d : decode(raw, one, S, C, 0.0)) EXPECT_GT(d.confidence, 0.0);
}

TEST(Codec, RoundTripRandomSets) {
  SplitMix64 rng(3);
  const int S = 7, C = 10;
  for (int trial = 0; trial < 200; ++trial) {
    GroundTruth gt;
    std::set<std::pair<int, int>> used;
    const int n = 1 + static_cast<int>(rng.below(6));
    while (static_cast<int>(gt.items.size()) < n) {
      const BBox b = random_box(rng);
      const auto cell = std::pair{static_cast<int>(b.cy * S), static_cast<int>(b.cx * S)};
      if (!used.insert(cell).second) continue;
      gt.items.push_back({b, static_cast<int>(rng.below(C))});
    }
    const auto raw = encode_logits(gt, kAnchors, S, C);
    const auto dets = decode(raw, kAnchors, S, C, 0.0);
    ASSERT_EQ(dets.size(), gt.items.size());
    for (const GroundTruthItem& item : gt.items) {
      const auto it = std::find_if(dets.begin(), dets.end(), [&](const Detection& d) {
        return std::abs(d.box.cx - item.box.cx) < 1e-6 && std::abs(d.box.cy - item.box.cy) < 1e-6;
      });
      ASSERT_NE(it, dets.end());
      EXPECT_EQ(it->class_id, item.class_id);
      EXPECT_NEAR(it->box.w, item.box.w, 1e-6);
      EXPECT_NEAR(it->box.h, item.box.h, 1e-6);
      EXPECT_EQ(it->confidence, 1.0);
    }
  }
}

TEST(Codec, TargetLayout) {
  GroundTruth gt{"x", {{{0.5, 0.5, 1.5 / 7, 1.2 / 7}, 2}}};
  const auto t = encode(gt, kAnchors, 7, 3);
  EXPECT_EQ(t.size(), 7u * 7 * 5 * 8);
  const auto at = [&](int field) { return t[yolo_index(7, 5, 3, 3, 3, 1, field)]; };
  EXPECT_FLOAT_EQ(at(kObjectness), 1.0f);
  EXPECT_FLOAT_EQ(at(kFirstClass + 2), 1.0f);
  EXPECT_FLOAT_EQ(at(kFirstClass), 0.0f);
  EXPECT_NEAR(at(kTw), 0.0, 1e-6);
  EXPECT_NEAR(at(kTh), 0.0, 1e-6);
  double total = 0;
  for (float v : t) total += std::abs(v);
  EXPECT_NEAR(total, 2.0 + std::abs(at(kTx)) + std::abs(at(kTy)) + std::abs(at(kTw)) + std::abs(at(kTh)), 1e-6);
}

TEST(Codec, CollisionAndBadInput) {
  GroundTruth gt{"x", {{{0.5, 0.5, 0.2, 0.2}, 0}, {{0.52, 0.51, 0.21, 0.19}, 1}}};
  EXPECT_THROW(encode(gt, kAnchors, 7, 3), CollisionError);
  EXPECT_THROW(encode({"x", {{{0.5, 0.5, 0.2, 0.2}, 5}}}, kAnchors, 7, 3), ValueError);
  EXPECT_THROW(encode({"x", {{{0.5, 0.5, 0.0, 0.2}, 0}}}, kAnchors, 7, 3), ValueError);
  std::vector<float> raw(10);
  EXPECT_THROW(decode(raw, kAnchors, 7, 3), ShapeError);
}

TEST(Codec, DecodedBoxesInsideImage) {
  SplitMix64 rng(9);
  const int S = 4, C = 2;
  std::vector<float> raw(static_cast<std::size_t>(S * S * 5 * (5 + C)));
  for (float& v : raw) v = static_cast<float>(rng.uniform(-4, 4));
  const auto dets = decode(raw, kAnchors, S, C, 0.0);
  EXPECT_EQ(dets.size(), static_cast<std::size_t>(S * S * 5));
  for (std::size_t i = 0; i < dets.size(); ++i) {
    EXPECT_GE(dets[i].box.x_min(), -1e-12);
    EXPECT_LE(dets[i].box.x_max(), 1 + 1e-12);
    EXPECT_GE(dets[i].box.y_min(), -1e-12);
    EXPECT_LE(dets[i].box.y_max(), 1 + 1e-12);
    if (i > 0) EXPECT_GE(dets[i - 1].confidence, dets[i].confidence);
  }
}

TEST(Nms, HandCase) {
  const std::vector<Detection> dets{
      {BBox::from_corners(0.0, 0.0, 0.4, 0.4), 0, 0.9},
      {BBox::from_corners(0.05, 0.05, 0.45, 0.45), 0, 0.8},  // IoU ~0.62 with first
      {BBox::from_corners(0.05, 0.05, 0.45, 0.45), 1, 0.7},  // other class survives
      {BBox::from_corners(0.6, 0.6, 0.9, 0.9), 0, 0.6},
  };
  const auto kept = nms(dets, 0.3);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0], dets[0]);
  EXPECT_EQ(kept[1], dets[2]);
  EXPECT_EQ(kept[2], dets[3]);
}

TEST(Nms, ExactlyAtThresholdIsKept) {
  // IoU exactly 1/3: [0,2]x[0,1] against [1,3]x[0,1] on a binary-exact grid
  const std::vector<Detection> dets{{BBox::from_corners(0.0, 0.0, 0.5, 0.25), 0, 0.9},
                                    {BBox::from_corners(0.25, 0.0, 0.75, 0.25), 0, 0.8}};
  EXPECT_EQ(iou(dets[0].box, dets[1].box), 1.0 / 3.0);
  EXPECT_EQ(nms(dets, 1.0 / 3.0).size(), 2u);
  EXPECT_EQ(nms(dets, 0.3).size(), 1u);
}

TEST(Nms, MatchesOracleAndIsIdempotent) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto dets = random_detections(rng, static_cast<int>(rng.below(21)), 3);
    const auto kept = nms(dets, 0.3);
    const auto want = oracle::nms_keep(dets, 0.3);
    ASSERT_EQ(kept.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) ASSERT_EQ(kept[i], dets[want[i]]);
    ASSERT_TRUE(oracle::is_greedy_fixed_point(dets, want, 0.3));
    EXPECT_EQ(nms(kept, 0.3), kept);
  }
}

TEST(Nms, EmptyAndThresholdDomain) {
  EXPECT_TRUE(nms({}, 0.3).empty());
  const std::vector<Detection> one{{{0.5, 0.5, 0.1, 0.1}, 0, 0.5}};
  EXPECT_THROW(nms(one, -0.1), ValueError);
  EXPECT_THROW(nms(one, std::nan("")), ValueError);
}
