#include "foodtrack/model.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "foodtrack/error.hpp"
#include "foodtrack/tensor.hpp"

namespace foodtrack {

namespace {

struct BlockShape {
  int out_channels;
  int stride;
};

// MobileNet-1.0 separable blocks: pointwise width and depthwise stride.
constexpr std::array<BlockShape, 13> kMobileNetBlocks = {{
    {64, 1}, {128, 2}, {128, 1}, {256, 2}, {256, 1}, {512, 2}, {512, 1},
    {512, 1}, {512, 1}, {512, 1}, {512, 1}, {1024, 2}, {1024, 1},
}};
constexpr int kStemChannels = 32;

std::string layer_name(int index, std::string_view role) {
  std::ostringstream os;
  os << "layer" << (index < 10 ? "0" : "") << index << "_" << role;
  return os.str();
}

LayerSpec conv_layer(std::string name, ConvKind kind, int kernel, int in, int out, int stride) {
  LayerSpec layer;
  layer.name = std::move(name);
  layer.kind = LayerKind::convolution;
  layer.conv = ConvSpec{kind, kernel, in, out, stride};
  layer.batchnorm = true;
  layer.relu = true;
  layer.bias = false;
  return layer;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::convolution: return "convolution";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::yolo_output: return "yolo_output";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  if (name == "convolution") return LayerKind::convolution;
  if (name == "fully_connected") return LayerKind::fully_connected;
  if (name == "yolo_output") return LayerKind::yolo_output;
  throw FormatError("unknown layer kind '" + std::string(name) + "'");
}

std::int64_t ModelSpec::output_length() const {
  return static_cast<std::int64_t>(grid_size) * grid_size * num_anchors * (5 + num_classes);
}

ModelSpec build_mobilenet_yolo(int num_classes, int num_anchors, const BuildOptions& options) {
  if (num_classes < 1) throw ValueError("build_mobilenet_yolo: num_classes must be >= 1");
  if (num_anchors < 1) throw ValueError("build_mobilenet_yolo: num_anchors must be >= 1");
  if (options.width_divisor < 1) throw ValueError("build_mobilenet_yolo: width_divisor must be >= 1");

  const auto width = [&](int w) { return std::max(1, w / options.width_divisor); };

  ModelSpec spec;
  spec.input_resolution = options.input_resolution;
  spec.num_anchors = num_anchors;
  spec.num_classes = num_classes;

  int index = 0;
  int channels = width(kStemChannels);
  int resolution = same_output_dim(options.input_resolution, 2);
  spec.layers.push_back(conv_layer(layer_name(index++, "stem"), ConvKind::standard, 3, 3, channels, 2));
  for (const BlockShape& block : kMobileNetBlocks) {
    spec.layers.push_back(conv_layer(layer_name(index++, "dw"), ConvKind::depthwise, 3, channels,
                                     channels, block.stride));
    resolution = same_output_dim(resolution, block.stride);
    const int out = width(block.out_channels);
    spec.layers.push_back(conv_layer(layer_name(index++, "pw"), ConvKind::pointwise, 1, channels, out, 1));
    channels = out;
  }
  spec.grid_size = resolution;

  const int box_values = 5 + num_classes;
  const int head_channels = num_anchors * box_values;
  spec.layers.push_back(conv_layer(layer_name(index++, "reshape"), ConvKind::standard, 1, channels,
                                   head_channels, 1));

  LayerSpec fc;
  fc.name = layer_name(index++, "fc");
  fc.kind = LayerKind::fully_connected;
  fc.bias = true;
  if (options.dense_head) {
    fc.in_features = static_cast<int>(spec.output_length());
    fc.out_features = fc.in_features;
  } else {
    fc.in_features = box_values;
    fc.out_features = box_values;
  }
  spec.layers.push_back(fc);

  LayerSpec output;
  output.name = layer_name(index++, "yolo");
  output.kind = LayerKind::yolo_output;
  spec.layers.push_back(output);

  spec.validate();
  return spec;
}

int layer_count(const ModelSpec& spec) { return static_cast<int>(spec.layers.size()); }

std::vector<FeatureShape> shape_trace(const ModelSpec& spec) {
  std::vector<FeatureShape> trace;
  trace.reserve(spec.layers.size());
  FeatureShape shape{spec.input_resolution, spec.input_resolution, 3};
  for (const LayerSpec& layer : spec.layers) {
    const auto fail = [&](const std::string& why) {
      throw ShapeError("layer '" + layer.name + "': " + why);
    };
    switch (layer.kind) {
      case LayerKind::convolution: {
        try {
          layer.conv.validate();
        } catch (const ShapeError& e) {
          fail(e.what());
        }
        if (layer.conv.in_channels != shape.channels) {
          fail("expects " + std::to_string(layer.conv.in_channels) + " input channels, previous layer yields " +
               std::to_string(shape.channels));
        }
        shape.height = same_output_dim(shape.height, layer.conv.stride);
        shape.width = same_output_dim(shape.width, layer.conv.stride);
        shape.channels = layer.conv.out_channels;
        break;
      }
      case LayerKind::fully_connected: {
        if (layer.in_features <= 0 || layer.out_features <= 0) fail("feature counts must be positive");
        if (layer.batchnorm) fail("fully connected layers carry no batchnorm");
        const std::int64_t flat = static_cast<std::int64_t>(shape.height) * shape.width * shape.channels;
        if (flat % layer.in_features != 0) {
          fail("input length " + std::to_string(flat) + " is not a multiple of in_features " +
               std::to_string(layer.in_features));
        }
        if (shape.channels % layer.in_features == 0) {
          shape.channels = shape.channels / layer.in_features * layer.out_features;
        } else {
          shape = FeatureShape{1, 1, static_cast<int>(flat / layer.in_features * layer.out_features)};
        }
        break;
      }
      case LayerKind::yolo_output: {
        const std::int64_t flat = static_cast<std::int64_t>(shape.height) * shape.width * shape.channels;
        if (flat != spec.output_length()) {
          fail("head produces " + std::to_string(flat) + " values, YOLO output needs " +
               std::to_string(spec.output_length()));
        }
        shape = FeatureShape{spec.grid_size, spec.grid_size, spec.num_anchors * (5 + spec.num_classes)};
        break;
      }
    }
    trace.push_back(shape);
  }
  return trace;
}

void ModelSpec::validate() const {
  if (input_resolution < 1 || grid_size < 1 || num_anchors < 1 || num_classes < 1) {
    throw ShapeError("ModelSpec: resolution, grid, anchors and classes must be positive");
  }
  if (layers.empty()) throw ShapeError("ModelSpec: no layers");
  if (layers.back().kind != LayerKind::yolo_output) {
    throw ShapeError("ModelSpec: last layer must be the YOLO output layer");
  }
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::yolo_output) {
      throw ShapeError("ModelSpec: YOLO output layer '" + layers[i].name + "' is not last");
    }
  }
  if (layers.size() < 2) throw ShapeError("ModelSpec: no parametric layer before the YOLO output");
  if (layers[layers.size() - 2].relu) {
    throw ShapeError("ModelSpec: final layer '" + layers[layers.size() - 2].name +
                     "' must not apply a nonlinearity");
  }

  const std::vector<FeatureShape> trace = shape_trace(*this);
  // Spatial size after the last convolution must equal the grid.
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (layers[i].kind != LayerKind::convolution) continue;
    if (trace[i].height != grid_size || trace[i].width != grid_size) {
      std::ostringstream os;
      os << "ModelSpec: backbone maps " << input_resolution << " to " << trace[i].height << "x"
         << trace[i].width << ", grid size is " << grid_size;
      throw ShapeError(os.str());
    }
    break;
  }
}

ParameterReport count_parameters(const ModelSpec& spec) {
  ParameterReport report;
  for (const LayerSpec& layer : spec.layers) {
    LayerParameters p;
    p.name = layer.name;
    int out_channels = 0;
    if (layer.kind == LayerKind::convolution) {
      p.weights = param_count(layer.conv);
      out_channels = layer.conv.out_channels;
    } else if (layer.kind == LayerKind::fully_connected) {
      p.weights = static_cast<std::int64_t>(layer.in_features) * layer.out_features;
      out_channels = layer.out_features;
    }
    if (layer.bias) p.bias = out_channels;
    if (layer.batchnorm) {
      p.bn_trainable = 2LL * out_channels;
      p.bn_statistics = 2LL * out_channels;
    }
    report.weights += p.weights;
    report.bias += p.bias;
    report.bn_trainable += p.bn_trainable;
    report.bn_statistics += p.bn_statistics;
    report.total += p.total();
    report.layers.push_back(std::move(p));
  }
  return report;
}

}  // namespace foodtrack
