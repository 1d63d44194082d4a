#pragma once

#include <cstdint>
#include <string_view>

namespace foodtrack {

enum class ConvKind { standard, depthwise, pointwise };

std::string_view to_string(ConvKind kind);
ConvKind conv_kind_from_string(std::string_view name);

// Shape of one convolution layer. Padding is always SAME.
struct ConvSpec {
  ConvKind kind = ConvKind::standard;
  int kernel = 1;        // square filter side
  int in_channels = 1;
  int out_channels = 1;
  int stride = 1;

  // Throws ShapeError on a pointwise kernel != 1, a depthwise layer whose
  // out_channels differ from in_channels, or non-positive fields.
  void validate() const;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// Weight count of one layer: standard K*K*M*N, depthwise K*K*M, pointwise M*N.
// Bias terms (one per output channel) only when include_bias is set.
std::int64_t param_count(const ConvSpec& spec, bool include_bias = false);

// Multiply-accumulates to produce a feature_dim x feature_dim output map.
std::int64_t flop_count(const ConvSpec& spec, std::int64_t feature_dim);

}  // namespace foodtrack
