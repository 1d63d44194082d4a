#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "foodtrack/cost.hpp"

namespace foodtrack {

enum class LayerKind {
  convolution,
  // Affine map applied to every consecutive group of `in_features` values
  // of the flattened input. A group equal to the whole input is a classic
  // dense layer; the canonical head uses one group per predicted box.
  fully_connected,
  // Parameter-free view of the flattened head output as
  // S x S x anchors x (5 + classes).
  yolo_output,
};

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::convolution;
  ConvSpec conv;          // convolution only
  int in_features = 0;    // fully_connected only
  int out_features = 0;   // fully_connected only
  bool batchnorm = false;
  bool relu = false;
  bool bias = false;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::vector<LayerSpec> layers;
  int input_resolution = 224;
  int grid_size = 7;
  int num_anchors = 5;
  int num_classes = 1;

  // S * S * anchors * (5 + classes).
  std::int64_t output_length() const;

  // Checks channel chaining, the input -> grid downsampling, that the last
  // parametric layer carries no activation, and the output length.
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct BuildOptions {
  int input_resolution = 224;
  // Every backbone width is divided by this (minimum 1 channel). Used for
  // cheap test and benchmark variants; depth and strides are unchanged.
  int width_divisor = 1;
  // Replace the per-box head with one dense layer over the whole
  // flattened output (position-specific weights and biases).
  bool dense_head = false;
};

// MobileNet backbone (stem conv + 13 depthwise-separable blocks), one
// standard conv reshaping to anchors*(5+classes) channels, a linear FC
// head and the YOLO output layer: 30 layers.
ModelSpec build_mobilenet_yolo(int num_classes, int num_anchors, const BuildOptions& options = {});

// Layers under the counting rule where depthwise and pointwise
// convolutions are separate layers and every LayerSpec is one layer.
int layer_count(const ModelSpec& spec);

struct LayerParameters {
  std::string name;
  std::int64_t weights = 0;
  std::int64_t bias = 0;
  std::int64_t bn_trainable = 0;   // gamma, beta
  std::int64_t bn_statistics = 0;  // running mean, variance

  std::int64_t total() const { return weights + bias + bn_trainable + bn_statistics; }
};

struct ParameterReport {
  std::vector<LayerParameters> layers;
  std::int64_t weights = 0;
  std::int64_t bias = 0;
  std::int64_t bn_trainable = 0;
  std::int64_t bn_statistics = 0;
  std::int64_t total = 0;
};

ParameterReport count_parameters(const ModelSpec& spec);

struct FeatureShape {
  int height = 0;
  int width = 0;
  int channels = 0;
};

// Output shape after each layer for the spec's input resolution.
std::vector<FeatureShape> shape_trace(const ModelSpec& spec);

}  // namespace foodtrack
