#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "foodtrack/pipeline.hpp"

namespace foodtrack {

struct TimingStats {
  double median = 0.0;
  double p95 = 0.0;  // nearest rank
};

TimingStats summarize(std::vector<double> samples);

struct BenchReport {
  int iterations = 0;
  TimingStats wall_ms;  // forward + decode + nms per frame
  TimingStats cpu_ms;
  TimingStats decode_nms_ms;
  std::uintmax_t weights_blob_bytes = 0;
  std::uintmax_t weights_manifest_bytes = 0;
  std::uint64_t peak_rss_bytes = 0;
  std::size_t detections = 0;  // from the last iteration
};

// Published on-device profile, printed for comparison only.
struct ReferenceProfile {
  double cpu_ms = 15.0;
  double wall_ms = 75.0;
  double model_mb = 8.1;
  double memory_mb = 242.2;
};

// image is resized once up front; iterations >= 1.
BenchReport run_bench(const Pipeline& pipeline, const Tensor& image, int iterations);

// Decode + NMS timings alone over a fixed raw output.
TimingStats time_decode_nms(std::span<const float> raw, std::span<const Anchor> anchors, int grid_size,
                            int num_classes, double conf_threshold, double nms_threshold, int iterations);

std::uint64_t peak_rss_bytes();

std::string format_report(const BenchReport& report, const ReferenceProfile& reference = {});

}  // namespace foodtrack
