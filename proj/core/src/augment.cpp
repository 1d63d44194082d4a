#include "foodtrack/augment.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <thread>

#include "foodtrack/error.hpp"
#include "foodtrack/rng.hpp"

namespace foodtrack {

namespace {

void require_image(const Sample& s, const char* op) {
  if (s.image.channels() != 3 || s.image.empty()) throw ShapeError(std::string(op) + ": image must be HxWx3");
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

std::string_view to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::blur: return "blur";
    case AugmentKind::horizontal_flip: return "horizontal_flip";
    case AugmentKind::gaussian_noise: return "gaussian_noise";
    case AugmentKind::color_shift: return "color_shift";
  }
  return "unknown";
}

Sample horizontal_flip(const Sample& s) {
  require_image(s, "horizontal_flip");
  Sample out = s;
  const int w = s.image.width();
  for (int y = 0; y < s.image.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) out.image.at(y, w - 1 - x, c) = s.image.at(y, x, c);
    }
  }
  for (GroundTruthItem& item : out.annotations) item.box.cx = 1.0 - item.box.cx;
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ValueError("gaussian_kernel: sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += taps[i + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Sample gaussian_blur(const Sample& s, double sigma) {
  require_image(s, "gaussian_blur");
  const std::vector<double> taps = gaussian_kernel(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  const int h = s.image.height();
  const int w = s.image.width();

  std::vector<double> rows(s.image.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += taps[k + radius] * s.image.at(y, std::clamp(x + k, 0, w - 1), c);
        }
        rows[s.image.index(y, x, c)] = acc;
      }
    }
  }
  Sample out = s;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += taps[k + radius] * rows[s.image.index(std::clamp(y + k, 0, h - 1), x, c)];
        }
        out.image.at(y, x, c) = clamp01(acc);
      }
    }
  }
  return out;
}

std::vector<double> gaussian_noise_field(std::size_t count, double stddev, std::uint64_t seed) {
  if (!(stddev >= 0.0)) throw ValueError("gaussian_noise: stddev must be >= 0");
  std::vector<double> field(count, 0.0);
  if (stddev == 0.0) return field;
  SplitMix64 rng(seed);
  for (double& v : field) v = stddev * rng.normal();
  return field;
}

Sample gaussian_noise(const Sample& s, double stddev, std::uint64_t seed) {
  require_image(s, "gaussian_noise");
  const std::vector<double> field = gaussian_noise_field(s.image.size(), stddev, seed);
  Sample out = s;
  if (stddev == 0.0) return out;
  auto dst = out.image.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = clamp01(dst[i] + field[i]);
  return out;
}

Sample color_shift(const Sample& s, const std::array<double, 3>& delta) {
  require_image(s, "color_shift");
  for (double d : delta) {
    if (!(d >= -1.0 && d <= 1.0)) throw ValueError("color_shift: offsets must lie in [-1, 1]");
  }
  Sample out = s;
  auto dst = out.image.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (delta[i % 3] != 0.0) dst[i] = clamp01(dst[i] + delta[i % 3]);
  }
  return out;
}

std::vector<AugmentStep> plan_augmentation(std::size_t n, double fraction, std::uint64_t seed,
                                           const AugmentRanges& ranges) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValueError("augment: fraction must lie in [0, 1]");
  const auto selected = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

  SplitMix64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  order.resize(selected);
  std::sort(order.begin(), order.end());

  std::vector<AugmentStep> plan;
  plan.reserve(selected);
  for (std::size_t index : order) {
    AugmentStep step;
    step.sample = index;
    step.kind = static_cast<AugmentKind>(rng.below(4));
    switch (step.kind) {
      case AugmentKind::blur: step.sigma = rng.uniform(ranges.blur_sigma_min, ranges.blur_sigma_max); break;
      case AugmentKind::horizontal_flip: break;
      case AugmentKind::gaussian_noise:
        step.stddev = rng.uniform(ranges.noise_stddev_min, ranges.noise_stddev_max);
        step.noise_seed = rng();
        break;
      case AugmentKind::color_shift:
        for (double& d : step.delta) d = rng.uniform(-ranges.shift_max, ranges.shift_max);
        break;
    }
    plan.push_back(step);
  }
  return plan;
}

Sample apply(const Sample& s, const AugmentStep& step) {
  switch (step.kind) {
    case AugmentKind::blur: return gaussian_blur(s, step.sigma);
    case AugmentKind::horizontal_flip: return horizontal_flip(s);
    case AugmentKind::gaussian_noise: return gaussian_noise(s, step.stddev, step.noise_seed);
    case AugmentKind::color_shift: return color_shift(s, step.delta);
  }
  return s;
}

std::vector<Sample> augment_set(std::span<const Sample> samples, double fraction, std::uint64_t seed,
                                const AugmentRanges& ranges) {
  const std::vector<AugmentStep> plan = plan_augmentation(samples.size(), fraction, seed, ranges);
  std::vector<Sample> out(samples.begin(), samples.end());

  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < plan.size(); i += workers) out[plan[i].sample] = apply(samples[plan[i].sample], plan[i]);
    }));
  }
  for (auto& job : jobs) job.get();
  return out;
}

}  // namespace foodtrack
