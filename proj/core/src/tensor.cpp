#include "foodtrack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "foodtrack/error.hpp"

namespace foodtrack {

namespace {

std::string dims(const Tensor& t) {
  std::ostringstream os;
  os << t.height() << "x" << t.width() << "x" << t.channels();
  return os.str();
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw ValueError(std::string(op) + ": input contains non-finite values");
  }
}

void require_finite(std::span<const float> values, const char* op, const char* what) {
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw ValueError(std::string(op) + ": " + what + " contains non-finite values");
    }
  }
}

void require_length(std::size_t got, std::size_t want, const char* op, const char* what) {
  if (got != want) {
    std::ostringstream os;
    os << op << ": " << what << " has length " << got << ", expected " << want;
    throw ShapeError(os.str());
  }
}

void require_channels(const Tensor& input, int want, const char* op) {
  if (input.channels() != want) {
    std::ostringstream os;
    os << op << ": input is " << dims(input) << " but kernel expects " << want << " channels";
    throw ShapeError(os.str());
  }
}

float checked(double v, const char* op) {
  const auto f = static_cast<float>(v);
  if (!std::isfinite(f)) throw ValueError(std::string(op) + ": result overflowed");
  return f;
}

}  // namespace

Tensor::Tensor(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw ShapeError("Tensor: dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(channels));
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Tensor::Tensor(int height, int width, int channels, std::vector<float> data)
    : Tensor(height, width, channels) {
  require_length(data.size(), data_.size(), "Tensor", "data");
  data_ = std::move(data);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

int same_output_dim(int in, int stride) { return (in + stride - 1) / stride; }

int same_pad_low(int in, int kernel, int stride) {
  const int out = same_output_dim(in, stride);
  const int total = std::max((out - 1) * stride + kernel - in, 0);
  return total / 2;
}

Tensor conv2d_standard(const Tensor& input, const StandardKernel& kernel,
                       std::span<const float> bias, int stride) {
  constexpr const char* op = "conv2d_standard";
  if (stride <= 0 || kernel.size <= 0) throw ShapeError("conv2d_standard: stride and kernel must be positive");
  require_length(kernel.weights.size(),
                 static_cast<std::size_t>(kernel.size) * kernel.size * kernel.in_channels *
                     kernel.out_channels,
                 op, "kernel");
  require_channels(input, kernel.in_channels, op);
  require_length(bias.size(), kernel.out_channels, op, "bias");
  require_finite(input, op);
  require_finite(kernel.weights, op, "kernel");
  require_finite(bias, op, "bias");

  const int oh = same_output_dim(input.height(), stride);
  const int ow = same_output_dim(input.width(), stride);
  const int pad_y = same_pad_low(input.height(), kernel.size, stride);
  const int pad_x = same_pad_low(input.width(), kernel.size, stride);
  const int in_c = kernel.in_channels;
  const int out_c = kernel.out_channels;

  Tensor out(oh, ow, out_c);
  std::vector<double> acc(out_c);
  const float* w = kernel.weights.data();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      std::copy(bias.begin(), bias.end(), acc.begin());
      for (int ky = 0; ky < kernel.size; ++ky) {
        const int iy = oy * stride - pad_y + ky;
        if (iy < 0 || iy >= input.height()) continue;
        for (int kx = 0; kx < kernel.size; ++kx) {
          const int ix = ox * stride - pad_x + kx;
          if (ix < 0 || ix >= input.width()) continue;
          const float* px = &input.data()[input.index(iy, ix, 0)];
          const float* tap = w + (static_cast<std::size_t>(ky) * kernel.size + kx) * in_c * out_c;
          for (int m = 0; m < in_c; ++m) {
            const double v = px[m];
            const float* row = tap + static_cast<std::size_t>(m) * out_c;
            for (int n = 0; n < out_c; ++n) acc[n] += v * row[n];
          }
        }
      }
      float* dst = &out.data()[out.index(oy, ox, 0)];
      for (int n = 0; n < out_c; ++n) dst[n] = checked(acc[n], op);
    }
  }
  return out;
}

Tensor conv2d_depthwise(const Tensor& input, const DepthwiseKernel& kernel,
                        std::span<const float> bias, int stride) {
  constexpr const char* op = "conv2d_depthwise";
  if (stride <= 0 || kernel.size <= 0) throw ShapeError("conv2d_depthwise: stride and kernel must be positive");
  require_length(kernel.weights.size(),
                 static_cast<std::size_t>(kernel.size) * kernel.size * kernel.channels, op, "kernel");
  require_channels(input, kernel.channels, op);
  require_length(bias.size(), kernel.channels, op, "bias");
  require_finite(input, op);
  require_finite(kernel.weights, op, "kernel");
  require_finite(bias, op, "bias");

  const int oh = same_output_dim(input.height(), stride);
  const int ow = same_output_dim(input.width(), stride);
  const int pad_y = same_pad_low(input.height(), kernel.size, stride);
  const int pad_x = same_pad_low(input.width(), kernel.size, stride);
  const int ch = kernel.channels;

  Tensor out(oh, ow, ch);
  std::vector<double> acc(ch);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      std::copy(bias.begin(), bias.end(), acc.begin());
      for (int ky = 0; ky < kernel.size; ++ky) {
        const int iy = oy * stride - pad_y + ky;
        if (iy < 0 || iy >= input.height()) continue;
        for (int kx = 0; kx < kernel.size; ++kx) {
          const int ix = ox * stride - pad_x + kx;
          if (ix < 0 || ix >= input.width()) continue;
          const float* px = &input.data()[input.index(iy, ix, 0)];
          const float* tap = &kernel.weights[(static_cast<std::size_t>(ky) * kernel.size + kx) * ch];
          for (int c = 0; c < ch; ++c) acc[c] += static_cast<double>(px[c]) * tap[c];
        }
      }
      float* dst = &out.data()[out.index(oy, ox, 0)];
      for (int c = 0; c < ch; ++c) dst[c] = checked(acc[c], op);
    }
  }
  return out;
}

Tensor conv2d_pointwise(const Tensor& input, const Matrix& kernel, std::span<const float> bias) {
  constexpr const char* op = "conv2d_pointwise";
  require_length(kernel.values.size(), static_cast<std::size_t>(kernel.rows) * kernel.cols, op, "kernel");
  require_channels(input, kernel.rows, op);
  require_length(bias.size(), kernel.cols, op, "bias");
  require_finite(input, op);
  require_finite(kernel.values, op, "kernel");
  require_finite(bias, op, "bias");

  const int in_c = kernel.rows;
  const int out_c = kernel.cols;
  Tensor out(input.height(), input.width(), out_c);
  std::vector<double> acc(out_c);
  const std::size_t pixels = static_cast<std::size_t>(input.height()) * input.width();
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy(bias.begin(), bias.end(), acc.begin());
    const float* px = &input.data()[p * in_c];
    for (int m = 0; m < in_c; ++m) {
      const double v = px[m];
      const float* row = &kernel.values[static_cast<std::size_t>(m) * out_c];
      for (int n = 0; n < out_c; ++n) acc[n] += v * row[n];
    }
    float* dst = &out.data()[p * out_c];
    for (int n = 0; n < out_c; ++n) dst[n] = checked(acc[n], op);
  }
  return out;
}

Tensor batchnorm(const Tensor& input, std::span<const float> gamma, std::span<const float> beta,
                 std::span<const float> mean, std::span<const float> variance, double epsilon) {
  constexpr const char* op = "batchnorm";
  const auto ch = static_cast<std::size_t>(input.channels());
  require_length(gamma.size(), ch, op, "gamma");
  require_length(beta.size(), ch, op, "beta");
  require_length(mean.size(), ch, op, "mean");
  require_length(variance.size(), ch, op, "variance");
  require_finite(input, op);
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValueError("batchnorm: epsilon must be >= 0");

  std::vector<double> scale(ch), shift(ch);
  for (std::size_t c = 0; c < ch; ++c) {
    if (!(variance[c] >= 0.0f)) {
      throw ValueError("batchnorm: negative variance " + std::to_string(variance[c]) +
                       " in channel " + std::to_string(c));
    }
    const double denom = std::sqrt(static_cast<double>(variance[c]) + epsilon);
    if (denom == 0.0) {
      throw ValueError("batchnorm: zero variance with zero epsilon in channel " + std::to_string(c));
    }
    scale[c] = gamma[c] / denom;
    shift[c] = beta[c] - scale[c] * mean[c];
  }

  Tensor out(input.height(), input.width(), input.channels());
  auto src = input.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::size_t c = i % ch;
    dst[i] = checked(scale[c] * src[i] + shift[c], op);
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = std::max(v, 0.0f);
  return out;
}

std::vector<float> fully_connected(std::span<const float> input, const Matrix& weights,
                                   std::span<const float> bias) {
  constexpr const char* op = "fully_connected";
  require_length(weights.values.size(), static_cast<std::size_t>(weights.rows) * weights.cols, op,
                 "weights");
  if (static_cast<std::size_t>(weights.cols) != input.size()) {
    std::ostringstream os;
    os << op << ": weight matrix has " << weights.cols << " columns but input has " << input.size()
       << " values";
    throw ShapeError(os.str());
  }
  require_length(bias.size(), weights.rows, op, "bias");
  require_finite(input, op, "input");
  require_finite(weights.values, op, "weights");
  require_finite(bias, op, "bias");

  std::vector<float> out(weights.rows);
  for (int r = 0; r < weights.rows; ++r) {
    double acc = bias[r];
    const float* row = &weights.values[static_cast<std::size_t>(r) * weights.cols];
    for (int c = 0; c < weights.cols; ++c) acc += static_cast<double>(row[c]) * input[c];
    out[r] = checked(acc, op);
  }
  return out;
}

std::vector<float> fully_connected(const Tensor& input, const Matrix& weights,
                                   std::span<const float> bias) {
  return fully_connected(input.data(), weights, bias);
}

}  // namespace foodtrack
