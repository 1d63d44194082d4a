// Runs every primary acceptance criterion and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <httplib.h>
#include <json.hpp>

#include "foodtrack/anchors.hpp"
#include "foodtrack/augment.hpp"
#include "foodtrack/bench.hpp"
#include "foodtrack/cost.hpp"
#include "foodtrack/eval.hpp"
#include "foodtrack/image.hpp"
#include "foodtrack/model.hpp"
#include "foodtrack/nutrition.hpp"
#include "foodtrack/pipeline.hpp"
#include "foodtrack/service.hpp"
#include "foodtrack/tensor.hpp"
#include "foodtrack/yolo.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace foodtrack;
using testing_support::TempDir;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure notes while counting all of them.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (notes_.size() < 4) notes_.push_back(what);
  }
  int failures() const { return failures_; }
  Outcome outcome(const std::string& summary) const {
    Outcome o{failures_ == 0, summary};
    for (const std::string& n : notes_) o.detail += "; " + n;
    if (failures_ > static_cast<int>(notes_.size()))
      o.detail += "; +" + std::to_string(failures_ - notes_.size()) + " more";
    return o;
  }

 private:
  int failures_ = 0;
  std::vector<std::string> notes_;
};

std::string sci(double v) {
  std::ostringstream os;
  os.setf(std::ios::scientific);
  os.precision(2);
  os << v;
  return os.str();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

BBox random_box(SplitMix64& rng) {
  const double w = rng.uniform(0.02, 0.6), h = rng.uniform(0.02, 0.6);
  return {rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h};
}

bool close_tensor(const Tensor& got, const Tensor& want, double rel, double* worst) {
  if (got.height() != want.height() || got.width() != want.width() || got.channels() != want.channels()) return false;
  bool ok = true;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double a = got.data()[i], b = want.data()[i];
    *worst = std::max(*worst, std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}));
    ok = ok && oracle::close_rel(a, b, rel);
  }
  return ok;
}

// ---------------------------------------------------------------------------

Outcome cost_formulas() {
  Check check;
  int samples = 0;
  SplitMix64 rng(1);
  for (int k : {1, 3, 5, 7}) {
    for (int trial = 0; trial < 400; ++trial) {
      const std::int64_t m = 1 + static_cast<std::int64_t>(rng.below(512));
      const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(512));
      const int df = 1 + static_cast<int>(rng.below(112));
      const ConvSpec standard{ConvKind::standard, k, static_cast<int>(m), static_cast<int>(n), 1};
      const ConvSpec dw{ConvKind::depthwise, k, static_cast<int>(m), static_cast<int>(m), 1};
      const ConvSpec pw{ConvKind::pointwise, 1, static_cast<int>(m), static_cast<int>(n), 1};
      // sep / std == (K^2 + N) / (N K^2), cross-multiplied in integers
      const std::int64_t sp = param_count(dw) + param_count(pw), tp = param_count(standard);
      const std::int64_t sf = flop_count(dw, df) + flop_count(pw, df), tf = flop_count(standard, df);
      check.expect(sp * (n * k * k) == tp * (k * k + n), "param ratio K=" + std::to_string(k));
      check.expect(sf * (n * k * k) == tf * (k * k + n), "flop ratio K=" + std::to_string(k));
      ++samples;
    }
  }
  const bool ratios_ok = check.failures() == 0;

  // D_K = 3: standard / separable FLOPs must lie in [8, 9) for every N >= 64.
  std::vector<int> outside;
  double lowest = 9.0;
  for (int n = 64; n <= 512; ++n) {
    const std::int64_t tf = flop_count({ConvKind::standard, 3, 256, n, 1}, 14);
    const std::int64_t sf =
        flop_count({ConvKind::depthwise, 3, 256, 256, 1}, 14) + flop_count({ConvKind::pointwise, 1, 256, n, 1}, 14);
    if (!(tf >= 8 * sf && tf < 9 * sf)) outside.push_back(n);
    lowest = std::min(lowest, static_cast<double>(tf) / static_cast<double>(sf));
  }
  std::string summary = std::to_string(samples) + " sampled (K, M, N): ratios " +
                        (ratios_ok ? "exact" : "NOT exact") + "; D_K=3 factor over N=64..512: ";
  if (outside.empty()) {
    summary += "all in [8, 9)";
  } else {
    check.expect(false, "factor below 8 for N=" + std::to_string(outside.front()) + ".." +
                            std::to_string(outside.back()) + " (" + std::to_string(outside.size()) +
                            " values, min " + fmt(lowest, 4) + " at N=64 = 576/73); 9N/(N+9) >= 8 needs N >= 72");
    summary += std::to_string(outside.size()) + " outside [8, 9)";
  }
  return check.outcome(summary);
}

Outcome architecture() {
  Check check;
  const ModelSpec spec = build_mobilenet_yolo(100, 5);
  const int layers = layer_count(spec);
  const auto params = count_parameters(spec).total;
  const auto trace = shape_trace(spec);
  int backbone_side = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].name.find("_pw") != std::string::npos) backbone_side = trace[i].height;
  }
  check.expect(layers == 30, "layer count " + std::to_string(layers));
  check.expect(std::abs(static_cast<double>(params) - 3.5e6) <= 0.35e6, "parameters " + std::to_string(params));
  check.expect(spec.input_resolution == 224 && backbone_side == 7 && spec.grid_size == 7,
               "backbone ends at " + std::to_string(backbone_side));
  return check.outcome(std::to_string(layers) + " layers, " + std::to_string(params) + " parameters (" +
                       fmt(100.0 * (static_cast<double>(params) / 3.5e6 - 1.0), 1) + "% vs 3.5M), 224 -> " +
                       std::to_string(backbone_side));
}

Outcome convolution() {
  Check check;
  SplitMix64 rng(3);
  double worst = 0.0, worst_composed = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(12)), w = 1 + static_cast<int>(rng.below(12));
    const int m = 1 + static_cast<int>(rng.below(16)), n = 1 + static_cast<int>(rng.below(16));
    const int k = std::array{1, 3, 5, 7}[rng.below(4)];
    const int stride = 1 + static_cast<int>(rng.below(2));
    const Tensor in = testing_support::random_tensor(h, w, m, rng);
    const auto ws = testing_support::random_vector(static_cast<std::size_t>(k * k * m * n), rng);
    const auto wd = testing_support::random_vector(static_cast<std::size_t>(k * k * m), rng);
    const auto wp = testing_support::random_vector(static_cast<std::size_t>(m * n), rng);
    const auto bn = testing_support::random_vector(n, rng), bm = testing_support::random_vector(m, rng);
    using testing_support::widen;
    const std::string shape = std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(m) + "->" +
                              std::to_string(n) + " k" + std::to_string(k) + " s" + std::to_string(stride);
    check.expect(close_tensor(conv2d_standard(in, {k, m, n, ws}, bn, stride),
                              oracle::conv_standard(in, widen(ws), k, m, n, widen(bn), stride), 1e-6, &worst),
                 "standard " + shape);
    const Tensor dw = conv2d_depthwise(in, {k, m, wd}, bm, stride);
    check.expect(close_tensor(dw, oracle::conv_depthwise(in, widen(wd), k, widen(bm), stride), 1e-6, &worst),
                 "depthwise " + shape);
    check.expect(close_tensor(conv2d_pointwise(in, {m, n, wp}, bn), oracle::conv_pointwise(in, widen(wp), n, widen(bn)),
                              1e-6, &worst),
                 "pointwise " + shape);

    // depthwise then pointwise equals one standard conv with K = dw (x) pw
    std::vector<double> composed(static_cast<std::size_t>(k * k * m * n));
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx)
        for (int c = 0; c < m; ++c)
          for (int o = 0; o < n; ++o)
            composed[((ky * k + kx) * m + c) * n + o] = static_cast<double>(wd[(ky * k + kx) * m + c]) * wp[c * n + o];
    std::vector<double> bias(n);
    for (int o = 0; o < n; ++o) {
      bias[o] = bn[o];
      for (int c = 0; c < m; ++c) bias[o] += static_cast<double>(bm[c]) * wp[c * n + o];
    }
    check.expect(close_tensor(conv2d_pointwise(dw, {m, n, wp}, bn),
                              oracle::conv_standard(in, composed, k, m, n, bias, stride), 1e-6, &worst_composed),
                 "composed " + shape);
  }
  return check.outcome("200 random shapes, max relative error " + sci(worst) + " (oracle), " + sci(worst_composed) +
                       " (separable vs composed); tolerance 1e-6");
}

Outcome codec_round_trip() {
  Check check;
  SplitMix64 rng(4);
  const std::vector<Anchor> anchors{{0.6, 0.7}, {1.5, 1.2}, {2.8, 3.5}, {4.5, 2.2}, {5.5, 6.0}};
  const int S = 7, C = 100;
  double worst = 0.0;
  std::size_t boxes = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    GroundTruth gt{"gt" + std::to_string(trial), {}};
    std::vector<std::pair<int, int>> used;
    const int n = 1 + static_cast<int>(rng.below(10));
    while (static_cast<int>(gt.items.size()) < n) {
      const BBox b = random_box(rng);
      const std::pair cell{static_cast<int>(b.cy * S), static_cast<int>(b.cx * S)};
      if (std::find(used.begin(), used.end(), cell) != used.end()) continue;
      used.push_back(cell);
      gt.items.push_back({b, static_cast<int>(rng.below(C))});
    }
    const auto dets = decode(encode_logits(gt, anchors, S, C), anchors, S, C, 0.0);
    check.expect(dets.size() == gt.items.size(), "set " + std::to_string(trial) + ": " +
                                                     std::to_string(dets.size()) + " decoded vs " +
                                                     std::to_string(gt.items.size()));
    for (const GroundTruthItem& item : gt.items) {
      double best = 1e9;
      const Detection* match = nullptr;
      for (const Detection& d : dets) {
        const double e = std::max({std::abs(d.box.cx - item.box.cx), std::abs(d.box.cy - item.box.cy),
                                   std::abs(d.box.w - item.box.w), std::abs(d.box.h - item.box.h)});
        if (e < best) {
          best = e;
          match = &d;
        }
      }
      ++boxes;
      worst = std::max(worst, best);
      check.expect(match != nullptr && best <= 1e-6 && match->class_id == item.class_id,
                   "set " + std::to_string(trial) + " box error " + fmt(best, 9));
    }
  }
  return check.outcome("1000 sets, " + std::to_string(boxes) + " boxes, max box error " + sci(worst) +
                       " (tolerance 1e-6), classes exact");
}

Outcome nms_equivalence() {
  Check check;
  SplitMix64 rng(5);
  std::size_t total = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<Detection> dets;
    const int n = static_cast<int>(rng.below(21));
    for (int i = 0; i < n; ++i) {
      dets.push_back({random_box(rng), static_cast<int>(rng.below(3)), std::round(rng.uniform() * 20) / 20});
    }
    const auto kept = nms(dets, 0.3);
    const auto want = oracle::nms_keep(dets, 0.3);
    bool same = kept.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) same = kept[i] == dets[want[i]];
    check.expect(same, "instance " + std::to_string(trial) + " differs from oracle");
    check.expect(oracle::is_greedy_fixed_point(dets, want, 0.3), "oracle not a fixed point at " + std::to_string(trial));
    check.expect(nms(kept, 0.3) == kept, "not idempotent at " + std::to_string(trial));
    total += dets.size();
  }
  return check.outcome("10000 instances (" + std::to_string(total) + " boxes) at IoU > 0.3: equal to oracle, idempotent");
}

Outcome anchor_clustering() {
  Check check;
  SplitMix64 rng(6);
  for (int dataset = 0; dataset < 500; ++dataset) {
    std::vector<Anchor> boxes;
    const int n = 20 + static_cast<int>(rng.below(60));
    // mixtures of a few shape families so the curve has structure
    const int families = 1 + static_cast<int>(rng.below(6));
    std::vector<Anchor> centers;
    for (int f = 0; f < families; ++f) centers.push_back({rng.uniform(0.3, 6.5), rng.uniform(0.3, 6.5)});
    for (int i = 0; i < n; ++i) {
      const Anchor& c = centers[rng.below(centers.size())];
      boxes.push_back({c.w * rng.uniform(0.8, 1.25), c.h * rng.uniform(0.8, 1.25)});
    }
    const auto curve = avg_iou_curve(boxes, 10, dataset, 10);
    for (std::size_t k = 1; k < curve.size(); ++k) {
      check.expect(curve[k].avg_iou >= curve[k - 1].avg_iou,
                   "dataset " + std::to_string(dataset) + " drops at k=" + std::to_string(k + 1));
    }
    check.expect(curve.size() == 10, "curve length");
  }
  std::vector<Anchor> shapes;
  for (const GroundTruth& gt : read_annotations(testing_support::fixture("anchor_clusters.txt")))
    for (const GroundTruthItem& item : gt.items) shapes.push_back({item.box.w * 7, item.box.h * 7});
  const auto curve = avg_iou_curve(shapes, 6, 1, 10);
  const double g45 = curve[4].avg_iou - curve[3].avg_iou, g56 = curve[5].avg_iou - curve[4].avg_iou;
  check.expect(g45 > 2 * g56, "fixture gains k4->5 " + fmt(g45, 4) + " vs k5->6 " + fmt(g56, 4));
  return check.outcome("500 datasets monotone over k=1..10; fixture avg IoU k4 " + fmt(curve[3].avg_iou, 4) + ", k5 " +
                       fmt(curve[4].avg_iou, 4) + ", k6 " + fmt(curve[5].avg_iou, 4) + " (gain " + fmt(g45, 4) +
                       " vs " + fmt(g56, 4) + ")");
}

Outcome map_oracle() {
  Check check;
  const auto gts = read_annotations(testing_support::fixture("ap_gt.txt"));
  const auto dets = read_detections(testing_support::fixture("ap_dets.txt"));
  const double fixture = mean_average_precision(dets, gts).map_score;
  check.expect(std::abs(fixture - 0.7555555555555555) <= 1e-9, "fixture mAP " + fmt(fixture, 12));
  check.expect(std::abs(average_precision({true, false, true, false, true}, 3) - 34.0 / 45.0) <= 1e-9, "TP/FP list");
  check.expect(average_precision({true, true, true}, 3) == 1.0, "perfect list");
  check.expect(std::abs(average_precision({false, true}, 1) - 0.5) <= 1e-9, "late hit");

  SplitMix64 rng(7);
  const auto box = [&] {
    const double w = rng.uniform(0.1, 0.5), h = rng.uniform(0.1, 0.5);
    return BBox{rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h};
  };
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<GroundTruth> g;
    const int images = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < images; ++i) {
      GroundTruth gt{"img" + std::to_string(i), {}};
      const int n = static_cast<int>(rng.below(4));
      for (int j = 0; j < n; ++j) gt.items.push_back({box(), static_cast<int>(rng.below(3))});
      g.push_back(gt);
    }
    std::vector<ImageDetection> d;
    const int nd = static_cast<int>(rng.below(10));
    for (int j = 0; j < nd; ++j) {
      const GroundTruth& gt = g[rng.below(g.size())];
      BBox b = box();
      if (!gt.items.empty() && rng.below(2)) {
        b = gt.items[rng.below(gt.items.size())].box;
        b.cx += rng.uniform(-0.06, 0.06);
        b.cy += rng.uniform(-0.06, 0.06);
      }
      d.push_back({gt.image_id, {b, static_cast<int>(rng.below(3)), std::round(rng.uniform() * 10) / 10}});
    }
    const double got = mean_average_precision(d, g).map_score;
    const double want = oracle::mean_ap(d, g, 0.5);
    worst = std::max(worst, std::abs(got - want));
    check.expect(std::abs(got - want) <= 1e-9, "instance " + std::to_string(trial) + ": " + fmt(got, 9) + " vs " +
                                                    fmt(want, 9));
  }
  return check.outcome("fixture mAP " + fmt(fixture, 10) + "; 1000 random instances, max |diff| " + sci(worst) + " (tolerance 1e-9)");
}

Outcome augmentation() {
  Check check;
  SplitMix64 rng(8);
  const auto sample = [&](int h, int w) {
    Sample s{testing_support::random_tensor(h, w, 3, rng, 0.0, 1.0), {}};
    const int n = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i)
      s.annotations.push_back({{rng.uniform(), rng.uniform(), rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5)},
                               static_cast<int>(rng.below(100))});
    return s;
  };
  for (int i = 0; i < 200; ++i) {
    const Sample s = sample(1 + static_cast<int>(rng.below(20)), 1 + static_cast<int>(rng.below(20)));
    check.expect(horizontal_flip(horizontal_flip(s)) == s, "flip involution " + std::to_string(i));
    check.expect(gaussian_blur(s, rng.uniform(0.5, 2.0)).annotations == s.annotations, "blur moved boxes");
    check.expect(gaussian_noise(s, rng.uniform(0.01, 0.05), i).annotations == s.annotations, "noise moved boxes");
    check.expect(color_shift(s, {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)}).annotations ==
                     s.annotations,
                 "shift moved boxes");
  }
  std::vector<Sample> set;
  for (int i = 0; i < 101; ++i) set.push_back(sample(6, 8));
  std::string counts;
  for (std::size_t n : {1u, 2u, 7u, 10u, 101u}) {
    const std::span<const Sample> part(set.data(), n);
    const auto out = augment_set(part, 0.5, 99);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) changed += out[i] == part[i] ? 0 : 1;
    const auto planned = plan_augmentation(n, 0.5, 99).size();
    check.expect(planned == static_cast<std::size_t>(std::llround(0.5 * n)),
                 "n=" + std::to_string(n) + " planned " + std::to_string(planned));
    // a transform can leave a sample unchanged only by coincidence; bound it
    check.expect(changed <= planned, "n=" + std::to_string(n) + " changed " + std::to_string(changed));
    check.expect(out == augment_set(part, 0.5, 99), "not seed-deterministic at n=" + std::to_string(n));
    counts += (counts.empty() ? "" : ", ") + std::to_string(n) + "->" + std::to_string(planned);
  }
  return check.outcome("flip involution exact on 200 samples, boxes fixed under blur/noise/shift; selected " + counts +
                       "; deterministic");
}

Outcome decode_nms_gate() {
  Check check;
  SplitMix64 rng(9);
  const int S = 7, A = 5, C = 100;
  const auto anchors = read_anchors(testing_support::data_dir() / "anchors.txt");
  std::vector<float> raw(static_cast<std::size_t>(S * S * A * (5 + C)));
  for (float& v : raw) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  // threshold 0 sends all 245 boxes through NMS: the worst case for any threshold
  const TimingStats worst = time_decode_nms(raw, anchors, S, C, 0.0, 0.3, 1000);
  const TimingStats typical = time_decode_nms(raw, anchors, S, C, 0.4, 0.3, 1000);
  check.expect(worst.median < 5.0, "median " + fmt(worst.median, 3) + " ms");

  // Reference block from a full-size bench run.
  TempDir dir("accept_bench");
  const ModelSpec spec = build_mobilenet_yolo(100, 5);
  const auto config = testing_support::write_pipeline_files(dir.path(), 7, spec);
  const auto pipeline = Pipeline::load(PipelineConfig::load(config));
  const Tensor image = decode_image(read_file_bytes(testing_support::fixture("meal.ppm")));
  const std::string report = format_report(run_bench(*pipeline, image, 5));
  std::cout << report;
  check.expect(report.find("reference") != std::string::npos && report.find("242.2") != std::string::npos,
               "reference block missing");
  return check.outcome("decode+NMS 7x7x5x105, 1000 iterations: median " + fmt(worst.median, 4) + " ms (p95 " +
                       fmt(worst.p95, 4) + ") with all 245 candidates, " + fmt(typical.median, 4) +
                       " ms at conf 0.4; bound 5 ms");
}

std::string run_cli(const std::string& args) {
  const std::string command = std::string(FOODTRACK_CLI_PATH) + " " + args + " 2>&1";
  std::string out;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (pipe == nullptr) return "popen failed";
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) out = "exit " + std::to_string(status) + ": " + out;
  return out;
}

Outcome service_parity() {
  Check check;
  int compared = 0;
  std::size_t detections = 0;
  TempDir crafted_dir("accept_crafted"), random_dir("accept_random");
  const auto crafted = testing_support::write_crafted_files(crafted_dir.path());
  const auto random = testing_support::write_pipeline_files(random_dir.path(), 5, build_mobilenet_yolo(100, 5, {96, 8, false}),
                                                            testing_support::data_dir() / "labels.txt",
                                                            testing_support::data_dir() / "anchors.txt", 0.01);
  for (const auto& config : {crafted, random}) {
    const auto pipeline = Pipeline::load(PipelineConfig::load(config));
    ServiceOptions opts;
    opts.port = 0;
    opts.threads = 8;
    DetectionService service(pipeline, opts);
    service.start();
    for (const char* name : {"meal.ppm", "meal.png"}) {
      const auto bytes = read_file_bytes(testing_support::fixture(name));
      const std::string body(bytes.begin(), bytes.end());
      const auto out = config.parent_path() / "cli.json";
      const std::string cli_status = run_cli("detect " + testing_support::fixture(name).string() + " --config " +
                                             config.string() + " --no-timing -o " + out.string());
      check.expect(cli_status.empty(), "cli: " + cli_status);
      const auto cli_bytes = read_file_bytes(out);
      const std::string cli(cli_bytes.begin(), cli_bytes.end());

      httplib::Client client("127.0.0.1", service.port());
      const auto res = client.Post("/v1/detect?timing=false", body, "application/octet-stream");
      check.expect(res && res->status == 200, std::string("service status for ") + name);
      check.expect(res && res->body == cli, std::string("service body differs from CLI for ") + name);
      ++compared;

      std::vector<std::future<std::string>> runs;
      for (int i = 0; i < 8; ++i) {
        runs.push_back(std::async(std::launch::async, [&] {
          httplib::Client c("127.0.0.1", service.port());
          const auto r = c.Post("/v1/detect?timing=false", body, "application/octet-stream");
          return r && r->status == 200 ? r->body : std::string("request failed");
        }));
      }
      for (auto& r : runs) check.expect(r.get() == cli, std::string("concurrent body differs for ") + name);
      detections += nlohmann::json::parse(cli)["detections"].size();
    }
    service.stop();
  }
  return check.outcome(std::to_string(compared) + " fixture/model pairs byte-identical between CLI and /v1/detect (" +
                       std::to_string(detections) + " detections); 8 concurrent requests identical each");
}

Outcome nutrition_arithmetic() {
  Check check;
  const auto db = std::make_shared<const NutritionDatabase>(
      NutritionDatabase::load(testing_support::fixture("nutrition_fixture.tsv")));
  const NutritionService service(db);
  const std::vector<std::string> labels{"rice", "miso soup", "grilled salmon", "zzz"};
  const auto at = [](int cls, double conf) { return Detection{{0.5, 0.5, 0.2, 0.2}, cls, conf}; };

  // hand sums of the fixture rows
  const MealAnalysis meal = analyze(std::vector{at(0, 0.9), at(1, 0.8), at(2, 0.7)}, labels, service);
  const NutritionFacts& t = meal.totals;
  check.expect(t.calories == 498.75 && t.total_fat == 11.75 && t.carbohydrates == 60.5 && t.protein == 35.0 &&
                   t.sugars == 1.625 && t.sodium == 1242.5 && t.serving_qty == 3.0,
               "totals differ from hand sums");

  for (int k = 1; k <= 6; ++k) {
    const std::vector<Detection> dets(k, at(2, 0.6));
    const MealAnalysis m = analyze(dets, labels, service);
    check.expect(m.totals.calories == k * 206.5 && m.totals.sodium == k * 420.5 && m.totals.protein == k * 27.75,
                 "duplicate linearity at k=" + std::to_string(k));
  }

  const MealAnalysis partial = analyze(std::vector{at(3, 0.95), at(0, 0.9), at(3, 0.5), at(1, 0.4)}, labels, service);
  check.expect(partial.items.size() == 2 && partial.missing.size() == 2, "missing items not surfaced");
  check.expect(partial.totals.calories == 292.25, "partial totals " + fmt(partial.totals.calories, 4));
  return check.outcome("3-item totals 498.75 kcal / 11.75 g fat / 60.5 g carbs / 35 g protein / 1.625 g sugars / "
                       "1242.5 mg sodium exact; linear for k=1..6; unknown label reported, rest totalled");
}

struct Criterion {
  const char* name;
  double bound_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"cost-formula fidelity", 1, cost_formulas},
      {"architecture accounting", 1, architecture},
      {"convolution correctness", 30, convolution},
      {"codec round-trip", 10, codec_round_trip},
      {"nms oracle equivalence", 30, nms_equivalence},
      {"anchor clustering", 60, anchor_clustering},
      {"map oracle", 30, map_oracle},
      {"augmentation properties", 10, augmentation},
      {"decode+nms performance gate", 60, decode_nms_gate},
      {"service parity and determinism", 30, service_parity},
      {"nutrition arithmetic", 5, nutrition_arithmetic},
  };
  std::vector<std::string> lines;
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < c.bound_s;
    if (!in_time) o.detail += "; over the " + fmt(c.bound_s, 0) + " s budget";
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::ostringstream line;
    line << (pass ? "[PASS] " : "[FAIL] ") << c.name << " (" << fmt(seconds, 2) << " s / " << fmt(c.bound_s, 0)
         << " s): " << o.detail;
    std::cout << line.str() << std::endl;
    lines.push_back(line.str());
  }
  std::cout << "\nsummary: " << criteria.size() - failed << " of " << criteria.size() << " criteria passed\n";
  for (const std::string& l : lines) std::cout << l << '\n';
  return failed;
}
