#include <algorithm>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "foodtrack/anchors.hpp"
#include "foodtrack/annotations.hpp"
#include "foodtrack/augment.hpp"
#include "foodtrack/bench.hpp"
#include "foodtrack/error.hpp"
#include "foodtrack/eval.hpp"
#include "foodtrack/image.hpp"
#include "foodtrack/model.hpp"
#include "foodtrack/pipeline.hpp"
#include "foodtrack/service.hpp"
#include "foodtrack/weights.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace foodtrack;

namespace {

// --config plus per-flag overrides shared by detect, serve and bench.
struct ConfigFlags {
  std::string config;
  std::string weights_manifest, weights_blob, anchors, labels, nutrition_db;
  std::optional<double> conf_threshold, nms_threshold;
  std::optional<int> grid_size, input_resolution;
  std::string resize;
  std::optional<std::string> remote_url;
  std::optional<int> timeout_ms;
  std::optional<std::size_t> max_body_bytes;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "pipeline config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--weights-manifest", weights_manifest, "weight manifest (JSON)");
    app->add_option("--weights-blob", weights_blob, "weight blob");
    app->add_option("--anchors", anchors, "anchors file (w h per line, grid units)");
    app->add_option("--labels", labels, "labels file (one per line)");
    app->add_option("--nutrition-db", nutrition_db, "nutrition table (TSV)");
    app->add_option("--conf-threshold", conf_threshold, "confidence threshold");
    app->add_option("--nms-threshold", nms_threshold, "NMS IoU threshold");
    app->add_option("--grid-size", grid_size, "output grid S");
    app->add_option("--input-resolution", input_resolution, "network input side");
    app->add_option("--resize", resize, "stretch or letterbox")->check(CLI::IsMember({"stretch", "letterbox"}));
    app->add_option("--nutrition-remote-url", remote_url, "remote nutrition base URL");
    app->add_option("--nutrition-timeout-ms", timeout_ms, "remote nutrition timeout");
    app->add_option("--max-body-bytes", max_body_bytes, "HTTP request body cap");
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config.empty()) c = PipelineConfig::load(config);
    const auto path = [](fs::path& field, const std::string& flag) {
      if (!flag.empty()) field = flag;
    };
    path(c.weights_manifest, weights_manifest);
    path(c.weights_blob, weights_blob);
    path(c.anchors, anchors);
    path(c.labels, labels);
    path(c.nutrition_db, nutrition_db);
    if (conf_threshold) c.conf_threshold = *conf_threshold;
    if (nms_threshold) c.nms_threshold = *nms_threshold;
    if (grid_size) c.grid_size = *grid_size;
    if (input_resolution) c.input_resolution = *input_resolution;
    if (!resize.empty()) c.resize = resize_mode_from_string(resize);
    if (remote_url) c.nutrition_remote_url = *remote_url;
    if (timeout_ms) c.nutrition_timeout_ms = *timeout_ms;
    if (max_body_bytes) c.max_body_bytes = *max_body_bytes;
    for (const auto& [p, name] : {std::pair{c.weights_manifest, "weights manifest"}, {c.weights_blob, "weights blob"},
                                  {c.anchors, "anchors"}, {c.labels, "labels"}, {c.nutrition_db, "nutrition db"}}) {
      if (p.empty()) throw ValueError(std::string("no ") + name + " given (use --config or the matching flag)");
    }
    c.validate();
    return c;
  }
};

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

bool is_image_file(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".ppm" || ext == ".pgm" || ext == ".pnm" || ext == ".png";
}

std::vector<Anchor> box_shapes(const std::vector<GroundTruth>& gts, int grid_size) {
  std::vector<Anchor> shapes;
  for (const GroundTruth& gt : gts) {
    for (const GroundTruthItem& item : gt.items) {
      shapes.push_back(Anchor{item.box.w * grid_size, item.box.h * grid_size});
    }
  }
  return shapes;
}

std::string anchors_text(const std::vector<Anchor>& anchors) {
  std::ostringstream out;
  write_anchors(out, anchors);
  return out.str();
}

std::atomic<DetectionService*> g_service{nullptr};

extern "C" void handle_stop(int) {
  if (DetectionService* s = g_service.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"foodtrack: food detection and nutrition analysis"};
  app.require_subcommand(1);

  // detect
  ConfigFlags detect_flags;
  std::string detect_image_path, detect_out, detect_source = "local";
  bool detect_no_timing = false;
  CLI::App* detect = app.add_subcommand("detect", "detect food items in one image and analyze nutrition");
  detect_flags.attach(detect);
  detect->add_option("image", detect_image_path, "image (PPM/PGM/PNG)")->required()->check(CLI::ExistingFile);
  detect->add_option("-o,--output", detect_out, "write JSON here instead of stdout");
  detect->add_option("--source", detect_source, "nutrition source")->check(CLI::IsMember({"local", "remote"}));
  detect->add_flag("--no-timing", detect_no_timing, "omit timing so output is byte-stable");

  // serve
  ConfigFlags serve_flags;
  ServiceOptions serve_options;
  CLI::App* serve = app.add_subcommand("serve", "run the /v1 HTTP service");
  serve_flags.attach(serve);
  serve->add_option("--host", serve_options.host, "bind address");
  serve->add_option("--port", serve_options.port, "port (0 picks one)");
  serve->add_option("--threads", serve_options.threads, "worker threads (0: hardware)");

  // bench
  ConfigFlags bench_flags;
  std::string bench_image;
  int bench_iterations = 20;
  CLI::App* bench = app.add_subcommand("bench", "profile forward + decode + NMS per frame");
  bench_flags.attach(bench);
  bench->add_option("image", bench_image, "image to profile")->required()->check(CLI::ExistingFile);
  bench->add_option("-n,--iterations", bench_iterations, "frames")->check(CLI::PositiveNumber);

  // anchors
  std::string anchors_annotations, anchors_out;
  int anchors_k = 5, anchors_k_max = 0, anchors_grid = 7, anchors_restarts = kDefaultRestarts;
  std::uint64_t anchors_seed = 0;
  CLI::App* anchors = app.add_subcommand("anchors", "cluster box shapes into anchors");
  anchors->add_option("annotations", anchors_annotations, "annotation file")->required()->check(CLI::ExistingFile);
  anchors->add_option("-k", anchors_k, "number of anchors")->check(CLI::PositiveNumber);
  anchors->add_option("--curve", anchors_k_max, "also print mean IoU for k = 1..N");
  anchors->add_option("--grid-size", anchors_grid, "grid S (anchors are in cell units)")->check(CLI::PositiveNumber);
  anchors->add_option("--restarts", anchors_restarts, "k-means restarts")->check(CLI::PositiveNumber);
  anchors->add_option("--seed", anchors_seed, "seed");
  anchors->add_option("-o,--output", anchors_out, "write anchors here");

  // eval
  std::string eval_dets, eval_gt, eval_pr_dir, eval_labels;
  double eval_iou = kDefaultMatchIou;
  CLI::App* eval = app.add_subcommand("eval", "mAP of detections against ground truth");
  eval->add_option("--dets", eval_dets, "detections file")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", eval_gt, "ground-truth annotation file")->required()->check(CLI::ExistingFile);
  eval->add_option("--iou", eval_iou, "match IoU")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--pr-csv", eval_pr_dir, "directory for per-class PR curves");
  eval->add_option("--labels", eval_labels, "labels file for class names")->check(CLI::ExistingFile);

  // augment
  std::string augment_in, augment_out, augment_annotations = "annotations.txt";
  std::uint64_t augment_seed = 0;
  double augment_fraction = 0.5;
  bool augment_replace = false;
  CLI::App* augment = app.add_subcommand("augment", "expand a dataset with flip, blur, noise and color shift");
  augment->add_option("--in", augment_in, "input directory")->required()->check(CLI::ExistingDirectory);
  augment->add_option("--out", augment_out, "output directory")->required();
  augment->add_option("--annotations", augment_annotations, "annotation file name inside --in");
  augment->add_option("--seed", augment_seed, "seed");
  augment->add_option("--fraction", augment_fraction, "share of samples transformed")->check(CLI::Range(0.0, 1.0));
  augment->add_flag("--replace", augment_replace, "write transformed samples in place of originals");

  // weights
  int weights_classes = 100, weights_anchors = 5;
  BuildOptions weights_build;
  std::uint64_t weights_seed = 1;
  std::string weights_manifest, weights_blob;
  bool weights_zero = false;
  CLI::App* weights = app.add_subcommand("weights", "write procedurally seeded weights");
  weights->add_option("--classes", weights_classes, "classes")->check(CLI::PositiveNumber);
  weights->add_option("--num-anchors", weights_anchors, "anchors per cell")->check(CLI::PositiveNumber);
  weights->add_option("--input-resolution", weights_build.input_resolution, "input side");
  weights->add_option("--width-divisor", weights_build.width_divisor, "shrink backbone widths");
  weights->add_flag("--dense-head", weights_build.dense_head, "one dense layer over the whole output");
  weights->add_option("--seed", weights_seed, "seed");
  weights->add_flag("--zero", weights_zero, "all-zero weights (unit variances)");
  weights->add_option("--manifest", weights_manifest, "manifest path")->required();
  weights->add_option("--blob", weights_blob, "blob path")->required();

  // model
  int model_classes = 100, model_anchors = 5;
  BuildOptions model_build;
  CLI::App* model = app.add_subcommand("model", "print layers, shapes and parameter counts");
  model->add_option("--classes", model_classes, "classes")->check(CLI::PositiveNumber);
  model->add_option("--num-anchors", model_anchors, "anchors per cell")->check(CLI::PositiveNumber);
  model->add_option("--input-resolution", model_build.input_resolution, "input side");
  model->add_option("--width-divisor", model_build.width_divisor, "shrink backbone widths");
  model->add_flag("--dense-head", model_build.dense_head, "one dense layer over the whole output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (detect->parsed()) {
      const auto pipeline = Pipeline::load(detect_flags.resolve());
      const std::vector<std::uint8_t> bytes = read_file_bytes(detect_image_path);
      DetectOptions options;
      options.source = detect_source == "remote" ? NutritionSource::remote : NutritionSource::local;
      write_output(to_json(pipeline->detect_image(bytes, options), !detect_no_timing), detect_out);
    } else if (serve->parsed()) {
      DetectionService service(Pipeline::load(serve_flags.resolve()), serve_options);
      const int port = service.bind();
      g_service = &service;
      std::signal(SIGINT, handle_stop);
      std::signal(SIGTERM, handle_stop);
      std::cerr << "listening on " << serve_options.host << ":" << port << std::endl;
      service.run();
      g_service = nullptr;
    } else if (bench->parsed()) {
      const auto pipeline = Pipeline::load(bench_flags.resolve());
      const Tensor image = decode_image(read_file_bytes(bench_image));
      std::cout << format_report(run_bench(*pipeline, image, bench_iterations));
    } else if (anchors->parsed()) {
      const std::vector<Anchor> shapes = box_shapes(read_annotations(fs::path(anchors_annotations)), anchors_grid);
      if (anchors_k_max > 0) {
        for (const CurvePoint& p : avg_iou_curve(shapes, anchors_k_max, anchors_seed, anchors_restarts)) {
          std::cerr << "k=" << p.k << " avg_iou=" << std::fixed << std::setprecision(6) << p.avg_iou << "\n";
        }
      }
      const KMeansResult result = kmeans_anchors(shapes, anchors_k, anchors_seed, anchors_restarts);
      std::cerr << "k=" << anchors_k << " avg_iou=" << std::fixed << std::setprecision(6) << result.avg_iou
                << " over " << shapes.size() << " boxes\n";
      const std::string text = anchors_text(result.anchors);
      if (anchors_out.empty()) {
        std::cout << text;
      } else {
        write_output(text, anchors_out);
      }
    } else if (eval->parsed()) {
      const auto dets = read_detections(fs::path(eval_dets));
      const auto gts = read_annotations(fs::path(eval_gt));
      std::vector<std::string> names;
      if (!eval_labels.empty()) names = read_labels(fs::path(eval_labels));
      const EvalReport report = mean_average_precision(dets, gts, eval_iou);
      json classes = json::array();
      for (const auto& [cls, ap] : report.per_class_ap) {
        json entry{{"class_id", cls}, {"ap", ap}, {"num_ground_truth", report.num_ground_truth.at(cls)}};
        if (static_cast<std::size_t>(cls) < names.size()) entry["label"] = names[cls];
        classes.push_back(std::move(entry));
      }
      std::cout << json{{"iou_threshold", eval_iou}, {"map", report.map_score}, {"classes", classes}}.dump(2)
                << "\n";
      if (!eval_pr_dir.empty()) {
        fs::create_directories(eval_pr_dir);
        for (const auto& [cls, points] : report.pr_points) {
          std::ofstream csv(fs::path(eval_pr_dir) / ("class_" + std::to_string(cls) + ".csv"));
          csv << "recall,precision\n" << std::setprecision(17);
          for (const PrPoint& p : points) csv << p.recall << "," << p.precision << "\n";
        }
      }
    } else if (augment->parsed()) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(augment_in)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      std::map<std::string, std::vector<GroundTruthItem>> boxes;
      const fs::path annotation_path = fs::path(augment_in) / augment_annotations;
      if (fs::exists(annotation_path)) {
        for (GroundTruth& gt : read_annotations(annotation_path)) boxes[gt.image_id] = std::move(gt.items);
      }
      std::vector<Sample> samples;
      std::vector<std::string> ids;
      for (const fs::path& f : files) {
        ids.push_back(f.stem().string());
        samples.push_back(Sample{decode_image(read_file_bytes(f)), boxes[ids.back()]});
      }
      const auto plan = plan_augmentation(samples.size(), augment_fraction, augment_seed);
      fs::create_directories(augment_out);
      std::vector<GroundTruth> written;
      const auto emit = [&](const std::string& id, const Sample& s) {
        write_file_bytes(fs::path(augment_out) / (id + ".ppm"), encode_ppm(s.image));
        written.push_back(GroundTruth{id, s.annotations});
      };
      std::size_t next = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const bool selected = next < plan.size() && plan[next].sample == i;
        if (!selected) {
          emit(ids[i], samples[i]);
          continue;
        }
        const AugmentStep& step = plan[next++];
        const Sample out = apply(samples[i], step);
        if (augment_replace) {
          emit(ids[i], out);
        } else {
          emit(ids[i], samples[i]);
          emit(ids[i] + "_" + std::string(to_string(step.kind)), out);
        }
      }
      std::ofstream ann(fs::path(augment_out) / "annotations.txt");
      write_annotations(ann, written);
      std::cerr << plan.size() << " of " << samples.size() << " samples transformed, " << written.size()
                << " written\n";
    } else if (weights->parsed()) {
      const ModelSpec spec = build_mobilenet_yolo(weights_classes, weights_anchors, weights_build);
      const WeightStore store = weights_zero ? zero_weights(spec) : random_weights(spec, weights_seed);
      const SerializedWeights files = save_weights(store, spec);
      for (const fs::path p : {fs::path(weights_manifest), fs::path(weights_blob)}) {
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
      }
      write_weight_files(files, weights_manifest, weights_blob);
      std::cerr << count_parameters(spec).total << " parameters, " << files.blob.size() << " blob bytes, checksum "
                << manifest_checksum(files.manifest) << "\n";
    } else if (model->parsed()) {
      const ModelSpec spec = build_mobilenet_yolo(model_classes, model_anchors, model_build);
      const ParameterReport params = count_parameters(spec);
      const std::vector<FeatureShape> shapes = shape_trace(spec);
      std::cout << std::left;
      for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        std::string kind(to_string(l.kind));
        if (l.kind == LayerKind::convolution) kind += "/" + std::string(to_string(l.conv.kind));
        std::cout << std::setw(18) << l.name << std::setw(24) << kind << std::setw(18)
                  << (std::to_string(shapes[i].height) + "x" + std::to_string(shapes[i].width) + "x" +
                      std::to_string(shapes[i].channels))
                  << params.layers[i].total() << "\n";
      }
      std::cout << "layers " << layer_count(spec) << ", parameters " << params.total << " (weights "
                << params.weights << ", bias " << params.bias << ", batchnorm "
                << params.bn_trainable + params.bn_statistics << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
