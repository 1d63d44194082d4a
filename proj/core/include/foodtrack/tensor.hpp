#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace foodtrack {

// Dense height x width x channels array, row-major (H, then W, then C).
// Storage is single precision; every operation below accumulates in double.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int height, int width, int channels, float fill = 0.0f);
  Tensor(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }
  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Standard convolution filters laid out [ky][kx][in][out].
struct StandardKernel {
  int size = 0;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<float> weights;

  float at(int ky, int kx, int m, int n) const {
    return weights[((static_cast<std::size_t>(ky) * size + kx) * in_channels + m) * out_channels + n];
  }
};

// Depthwise filters laid out [ky][kx][channel]; one filter per channel.
struct DepthwiseKernel {
  int size = 0;
  int channels = 0;
  std::vector<float> weights;

  float at(int ky, int kx, int c) const {
    return weights[(static_cast<std::size_t>(ky) * size + kx) * channels + c];
  }
};

// Row-major matrix. Pointwise kernels are [in][out]; fully connected
// weights are [out][in] so that columns == flattened input length.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;

  float at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Output spatial size under SAME padding: ceil(in / stride).
int same_output_dim(int in, int stride);

// Zero padding added before the first input row/column under SAME padding.
// The odd pixel of an uneven total goes to the high side.
int same_pad_low(int in, int kernel, int stride);

Tensor conv2d_standard(const Tensor& input, const StandardKernel& kernel,
                       std::span<const float> bias, int stride);

Tensor conv2d_depthwise(const Tensor& input, const DepthwiseKernel& kernel,
                        std::span<const float> bias, int stride);

Tensor conv2d_pointwise(const Tensor& input, const Matrix& kernel,
                        std::span<const float> bias);

// Inference-mode batch normalization with stored statistics.
Tensor batchnorm(const Tensor& input, std::span<const float> gamma,
                 std::span<const float> beta, std::span<const float> mean,
                 std::span<const float> variance, double epsilon);

Tensor relu(const Tensor& input);

// Affine map with no activation.
std::vector<float> fully_connected(std::span<const float> input, const Matrix& weights,
                                   std::span<const float> bias);
std::vector<float> fully_connected(const Tensor& input, const Matrix& weights,
                                   std::span<const float> bias);

}  // namespace foodtrack
