#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "foodtrack/boxes.hpp"
#include "foodtrack/tensor.hpp"

namespace foodtrack {

struct Sample {
  Tensor image;  // H x W x 3, values in [0, 1]
  std::vector<GroundTruthItem> annotations;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Mirror about the vertical axis; cx -> 1 - cx. Applying it twice restores
// pixels exactly and restores cx exactly whenever cx is a multiple of 2^-53
// (every cx >= 0.5 and every generator draw); below 0.5 a decimal such as
// 0.2 can come back one ulp off.
Sample horizontal_flip(const Sample& s);

// Separable Gaussian, radius ceil(3 sigma), edge-replicate padding.
Sample gaussian_blur(const Sample& s, double sigma);

// Normalized sampled Gaussian taps, length 2 * ceil(3 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

// Zero-mean i.i.d. Gaussian noise per pixel-channel, clamped to [0, 1].
Sample gaussian_noise(const Sample& s, double stddev, std::uint64_t seed);

// The unclamped noise values gaussian_noise() adds, in data order.
std::vector<double> gaussian_noise_field(std::size_t count, double stddev, std::uint64_t seed);

// Per-channel constant offset, clamped to [0, 1].
Sample color_shift(const Sample& s, const std::array<double, 3>& delta);

enum class AugmentKind { blur, horizontal_flip, gaussian_noise, color_shift };
std::string_view to_string(AugmentKind kind);

struct AugmentRanges {
  double blur_sigma_min = 0.5;
  double blur_sigma_max = 2.0;
  double noise_stddev_min = 0.01;
  double noise_stddev_max = 0.05;
  double shift_max = 0.12;  // per channel, symmetric
};

struct AugmentStep {
  std::size_t sample = 0;
  AugmentKind kind = AugmentKind::blur;
  double sigma = 0.0;               // blur
  double stddev = 0.0;              // noise
  std::uint64_t noise_seed = 0;     // noise
  std::array<double, 3> delta{};    // color shift
};

// round(fraction * n) samples chosen by a seeded shuffle, each assigned
// one uniformly chosen transform with seeded magnitudes. Sorted by sample.
std::vector<AugmentStep> plan_augmentation(std::size_t n, double fraction, std::uint64_t seed,
                                           const AugmentRanges& ranges = {});

Sample apply(const Sample& s, const AugmentStep& step);

// Applies the plan; unselected samples pass through untouched and output
// order matches input order. Transforms run in parallel.
std::vector<Sample> augment_set(std::span<const Sample> samples, double fraction, std::uint64_t seed,
                                const AugmentRanges& ranges = {});

}  // namespace foodtrack
