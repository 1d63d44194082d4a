#include <benchmark/benchmark.h>

#include "foodtrack/rng.hpp"
#include "foodtrack/yolo.hpp"

using namespace foodtrack;

namespace {

const std::vector<Anchor> kAnchors{{0.6, 0.7}, {1.5, 1.2}, {2.8, 3.5}, {4.5, 2.2}, {5.5, 6.0}};

std::vector<float> raw_output(int grid, int classes) {
  SplitMix64 rng(3);
  std::vector<float> raw(static_cast<std::size_t>(grid) * grid * kAnchors.size() * (5 + classes));
  for (float& v : raw) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  return raw;
}

// arg: confidence threshold in percent. 0 sends every candidate through NMS.
void BM_Decode(benchmark::State& state) {
  const auto raw = raw_output(7, 100);
  const double conf = state.range(0) / 100.0;
  for (auto _ : state) benchmark::DoNotOptimize(decode(raw, kAnchors, 7, 100, conf));
}

void BM_DecodeNms(benchmark::State& state) {
  const auto raw = raw_output(7, 100);
  const double conf = state.range(0) / 100.0;
  std::size_t kept = 0;
  for (auto _ : state) {
    const auto dets = nms(decode(raw, kAnchors, 7, 100, conf), 0.3);
    kept = dets.size();
    benchmark::DoNotOptimize(dets.data());
  }
  state.counters["kept"] = static_cast<double>(kept);
}

}  // namespace

BENCHMARK(BM_Decode)->Arg(0)->Arg(40)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DecodeNms)->Arg(0)->Arg(40)->Unit(benchmark::kMicrosecond);
