#pragma once

#include <variant>
#include <vector>

#include "foodtrack/model.hpp"
#include "foodtrack/tensor.hpp"
#include "foodtrack/weights.hpp"

namespace foodtrack {

inline constexpr double kBatchNormEpsilon = 1e-3;

// A spec bound to its weights, with kernels unpacked into the layouts the
// tensor engine consumes. Immutable; forward() is safe to call from many
// threads at once.
class Network {
 public:
  Network(ModelSpec spec, const WeightStore& store);

  const ModelSpec& spec() const { return spec_; }

  // image: input_resolution x input_resolution x 3. Returns the raw YOLO
  // output, S*S*anchors*(5+classes) values in [cy][cx][anchor][field] order.
  std::vector<float> forward(const Tensor& image) const;

 private:
  struct BatchNormParams {
    std::vector<float> gamma, beta, mean, variance;
  };
  struct Step {
    const LayerSpec* layer = nullptr;
    std::variant<std::monostate, StandardKernel, DepthwiseKernel, Matrix> kernel;
    std::vector<float> bias;  // zeros when the layer has none
    bool has_batchnorm = false;
    BatchNormParams bn;
  };

  ModelSpec spec_;
  std::vector<Step> steps_;
};

// One-shot convenience over Network.
std::vector<float> forward(const ModelSpec& spec, const WeightStore& store, const Tensor& image);

}  // namespace foodtrack
