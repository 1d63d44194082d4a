#include "foodtrack/bench.hpp"

#include <sys/resource.h>
#include <time.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "foodtrack/error.hpp"

namespace foodtrack {

namespace {

double thread_cpu_ms() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e3 + static_cast<double>(ts.tv_nsec) * 1e-6;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::string plain(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

TimingStats summarize(std::vector<double> samples) {
  if (samples.empty()) throw ValueError("summarize: no samples");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  TimingStats s;
  s.median = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95 = samples[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

std::uint64_t peak_rss_bytes() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024u;  // Linux reports KiB
}

TimingStats time_decode_nms(std::span<const float> raw, std::span<const Anchor> anchors, int grid_size,
                            int num_classes, double conf_threshold, double nms_threshold, int iterations) {
  if (iterations < 1) throw ValueError("time_decode_nms: iterations must be >= 1");
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto start = std::chrono::steady_clock::now();
    nms(decode(raw, anchors, grid_size, num_classes, conf_threshold), nms_threshold);
    samples.push_back(elapsed_ms(start));
  }
  return summarize(std::move(samples));
}

BenchReport run_bench(const Pipeline& pipeline, const Tensor& image, int iterations) {
  if (iterations < 1) throw ValueError("bench: iterations must be >= 1");
  const PipelineConfig& config = pipeline.config();
  const ModelSpec& spec = pipeline.network().spec();
  const Tensor input = prepare_input(image, config.resize, spec.input_resolution);

  BenchReport report;
  report.iterations = iterations;
  std::vector<double> wall, cpu, post;
  for (int i = 0; i < iterations; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const double cpu_start = thread_cpu_ms();
    const std::vector<float> raw = pipeline.network().forward(input);
    const auto post_start = std::chrono::steady_clock::now();
    const auto kept = nms(decode(raw, pipeline.anchors(), spec.grid_size, spec.num_classes, config.conf_threshold),
                          config.nms_threshold);
    post.push_back(elapsed_ms(post_start));
    cpu.push_back(thread_cpu_ms() - cpu_start);
    wall.push_back(elapsed_ms(start));
    report.detections = kept.size();
  }
  report.wall_ms = summarize(std::move(wall));
  report.cpu_ms = summarize(std::move(cpu));
  report.decode_nms_ms = summarize(std::move(post));
  report.weights_blob_bytes = std::filesystem::file_size(config.weights_blob);
  report.weights_manifest_bytes = std::filesystem::file_size(config.weights_manifest);
  report.peak_rss_bytes = peak_rss_bytes();
  return report;
}

std::string format_report(const BenchReport& r, const ReferenceProfile& ref) {
  constexpr double kMB = 1e6;
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "iterations          " << r.iterations << "\n";
  out << "wall ms             median " << r.wall_ms.median << "  p95 " << r.wall_ms.p95 << "\n";
  out << "cpu ms              median " << r.cpu_ms.median << "  p95 " << r.cpu_ms.p95 << "\n";
  out << "decode+nms ms       median " << r.decode_nms_ms.median << "  p95 " << r.decode_nms_ms.p95 << "\n";
  out << "weights blob        " << r.weights_blob_bytes << " bytes\n";
  out << "weights manifest    " << r.weights_manifest_bytes << " bytes\n";
  out << "peak rss            " << r.peak_rss_bytes << " bytes\n";
  out << "detections          " << r.detections << "\n";
  out << std::setprecision(1);
  out << "reference (mobile, not a pass/fail bound):\n";
  out << "  cpu time          " << plain(ref.cpu_ms) << " ms  (measured median " << r.cpu_ms.median << " ms)\n";
  out << "  wall clock        " << plain(ref.wall_ms) << " ms  (measured median " << r.wall_ms.median << " ms)\n";
  out << "  model size        " << plain(ref.model_mb) << " MB  (measured "
      << static_cast<double>(r.weights_blob_bytes + r.weights_manifest_bytes) / kMB << " MB)\n";
  out << "  runtime memory    " << plain(ref.memory_mb) << " MB  (measured peak rss "
      << static_cast<double>(r.peak_rss_bytes) / kMB << " MB)\n";
  return out.str();
}

}  // namespace foodtrack
