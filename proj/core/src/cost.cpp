#include "foodtrack/cost.hpp"

#include <string>

#include "foodtrack/error.hpp"

namespace foodtrack {

std::string_view to_string(ConvKind kind) {
  switch (kind) {
    case ConvKind::standard: return "standard";
    case ConvKind::depthwise: return "depthwise";
    case ConvKind::pointwise: return "pointwise";
  }
  return "unknown";
}

ConvKind conv_kind_from_string(std::string_view name) {
  if (name == "standard") return ConvKind::standard;
  if (name == "depthwise") return ConvKind::depthwise;
  if (name == "pointwise") return ConvKind::pointwise;
  throw FormatError("unknown convolution kind '" + std::string(name) + "'");
}

void ConvSpec::validate() const {
  if (kernel <= 0 || in_channels <= 0 || out_channels <= 0 || stride <= 0) {
    throw ShapeError("ConvSpec: kernel, channels and stride must be positive");
  }
  if (kind == ConvKind::pointwise && kernel != 1) {
    throw ShapeError("ConvSpec: pointwise convolution requires kernel 1, got " + std::to_string(kernel));
  }
  if (kind == ConvKind::depthwise && out_channels != in_channels) {
    throw ShapeError("ConvSpec: depthwise convolution requires out_channels == in_channels (" +
                     std::to_string(out_channels) + " != " + std::to_string(in_channels) + ")");
  }
}

std::int64_t param_count(const ConvSpec& spec, bool include_bias) {
  const std::int64_t k2 = static_cast<std::int64_t>(spec.kernel) * spec.kernel;
  const std::int64_t m = spec.in_channels;
  const std::int64_t n = spec.out_channels;
  std::int64_t weights = 0;
  switch (spec.kind) {
    case ConvKind::standard: weights = k2 * m * n; break;
    case ConvKind::depthwise: weights = k2 * m; break;
    case ConvKind::pointwise: weights = m * n; break;
  }
  return include_bias ? weights + n : weights;
}

std::int64_t flop_count(const ConvSpec& spec, std::int64_t feature_dim) {
  if (feature_dim < 1) throw ValueError("flop_count: feature dimension must be >= 1");
  return param_count(spec) * feature_dim * feature_dim;
}

}  // namespace foodtrack
