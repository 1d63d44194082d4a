#include "foodtrack/forward.hpp"

#include "foodtrack/error.hpp"

namespace foodtrack {

Network::Network(ModelSpec spec, const WeightStore& store) : spec_(std::move(spec)) {
  spec_.validate();
  validate_weights(store, spec_);
  steps_.reserve(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& layer = spec_.layers[i];
    const int idx = static_cast<int>(i);
    Step step;
    step.layer = &layer;
    if (layer.kind == LayerKind::yolo_output) {
      steps_.push_back(std::move(step));
      continue;
    }
    const std::vector<float>& k = store.get(idx, WeightRole::kernel).values;
    int channels = 0;
    if (layer.kind == LayerKind::convolution) {
      const ConvSpec& c = layer.conv;
      channels = c.out_channels;
      switch (c.kind) {
        case ConvKind::standard: step.kernel = StandardKernel{c.kernel, c.in_channels, c.out_channels, k}; break;
        case ConvKind::depthwise: step.kernel = DepthwiseKernel{c.kernel, c.in_channels, k}; break;
        case ConvKind::pointwise: step.kernel = Matrix{c.in_channels, c.out_channels, k}; break;
      }
    } else {
      channels = layer.out_features;
      step.kernel = Matrix{layer.out_features, layer.in_features, k};
    }
    step.bias = layer.bias ? store.get(idx, WeightRole::bias).values : std::vector<float>(channels, 0.0f);
    if (layer.batchnorm) {
      step.has_batchnorm = true;
      step.bn.gamma = store.get(idx, WeightRole::gamma).values;
      step.bn.beta = store.get(idx, WeightRole::beta).values;
      step.bn.mean = store.get(idx, WeightRole::mean).values;
      step.bn.variance = store.get(idx, WeightRole::variance).values;
    }
    steps_.push_back(std::move(step));
  }
}

std::vector<float> Network::forward(const Tensor& image) const {
  const int res = spec_.input_resolution;
  if (image.height() != res || image.width() != res || image.channels() != 3) {
    throw ShapeError("forward: image is " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                     "x" + std::to_string(image.channels()) + ", model expects " + std::to_string(res) + "x" +
                     std::to_string(res) + "x3");
  }

  Tensor x = image;
  for (const Step& step : steps_) {
    const LayerSpec& layer = *step.layer;
    switch (layer.kind) {
      case LayerKind::convolution:
        if (const auto* k = std::get_if<StandardKernel>(&step.kernel)) {
          x = conv2d_standard(x, *k, step.bias, layer.conv.stride);
        } else if (const auto* d = std::get_if<DepthwiseKernel>(&step.kernel)) {
          x = conv2d_depthwise(x, *d, step.bias, layer.conv.stride);
        } else {
          x = conv2d_pointwise(x, std::get<Matrix>(step.kernel), step.bias);
        }
        break;
      case LayerKind::fully_connected: {
        const Matrix& w = std::get<Matrix>(step.kernel);
        const auto input = x.data();
        const std::size_t groups = input.size() / static_cast<std::size_t>(layer.in_features);
        std::vector<float> out;
        out.reserve(groups * layer.out_features);
        for (std::size_t g = 0; g < groups; ++g) {
          const auto y = fully_connected(input.subspan(g * layer.in_features, layer.in_features), w, step.bias);
          out.insert(out.end(), y.begin(), y.end());
        }
        if (x.channels() % layer.in_features == 0) {
          x = Tensor(x.height(), x.width(), x.channels() / layer.in_features * layer.out_features, std::move(out));
        } else {
          const int length = static_cast<int>(out.size());
          x = Tensor(1, 1, length, std::move(out));
        }
        break;
      }
      case LayerKind::yolo_output: {
        std::vector<float> flat(x.data().begin(), x.data().end());
        x = Tensor(spec_.grid_size, spec_.grid_size, spec_.num_anchors * (5 + spec_.num_classes), std::move(flat));
        break;
      }
    }
    if (step.has_batchnorm) {
      x = batchnorm(x, step.bn.gamma, step.bn.beta, step.bn.mean, step.bn.variance, kBatchNormEpsilon);
    }
    if (layer.relu) x = relu(x);
  }
  return std::vector<float>(x.data().begin(), x.data().end());
}

std::vector<float> forward(const ModelSpec& spec, const WeightStore& store, const Tensor& image) {
  return Network(spec, store).forward(image);
}

}  // namespace foodtrack
