#include "foodtrack/pipeline.hpp"

#include <time.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "foodtrack/annotations.hpp"
#include "foodtrack/error.hpp"
#include "foodtrack/image.hpp"

namespace foodtrack {

namespace {

using json = nlohmann::json;

double thread_cpu_ms() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e3 + static_cast<double>(ts.tv_nsec) * 1e-6;
}

json facts_json(const NutritionFacts& f) {
  return {{"label", f.label},           {"serving_qty", f.serving_qty}, {"serving_unit", f.serving_unit},
          {"calories_kcal", f.calories}, {"total_fat_g", f.total_fat},   {"carbohydrates_g", f.carbohydrates},
          {"protein_g", f.protein},      {"sugars_g", f.sugars},         {"sodium_mg", f.sodium}};
}

void check_threshold(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) throw ValueError(std::string(name) + " must lie in (0, 1), got " + std::to_string(v));
}

}  // namespace

std::string_view to_string(ResizeMode mode) { return mode == ResizeMode::stretch ? "stretch" : "letterbox"; }

ResizeMode resize_mode_from_string(std::string_view name) {
  if (name == "stretch") return ResizeMode::stretch;
  if (name == "letterbox") return ResizeMode::letterbox;
  throw ValueError("unknown resize mode '" + std::string(name) + "' (expected stretch or letterbox)");
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  const std::filesystem::path base = path.parent_path();
  const auto resolve = [&](const char* key) -> std::filesystem::path {
    if (!j.contains(key)) throw FormatError("config " + path.string() + ": missing '" + key + "'");
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
  };

  PipelineConfig c;
  try {
    c.weights_manifest = resolve("weights_manifest");
    c.weights_blob = resolve("weights_blob");
    c.anchors = resolve("anchors");
    c.labels = resolve("labels");
    c.nutrition_db = resolve("nutrition_db");
    c.conf_threshold = j.value("conf_threshold", c.conf_threshold);
    c.nms_threshold = j.value("nms_threshold", c.nms_threshold);
    c.grid_size = j.value("grid_size", c.grid_size);
    c.input_resolution = j.value("input_resolution", c.input_resolution);
    c.resize = resize_mode_from_string(j.value("resize", std::string("stretch")));
    c.nutrition_remote_url = j.value("nutrition_remote_url", c.nutrition_remote_url);
    c.nutrition_timeout_ms = j.value("nutrition_timeout_ms", c.nutrition_timeout_ms);
    c.max_body_bytes = j.value("max_body_bytes", c.max_body_bytes);
  } catch (const json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  check_threshold(conf_threshold, "conf_threshold");
  check_threshold(nms_threshold, "nms_threshold");
  if (grid_size < 1 || input_resolution < 1) throw ValueError("grid_size and input_resolution must be positive");
  if (nutrition_timeout_ms < 1) throw ValueError("nutrition_timeout_ms must be positive");
  if (max_body_bytes == 0) throw ValueError("max_body_bytes must be positive");
}

PixelBox to_pixels(const BBox& box, int image_width, int image_height) {
  return PixelBox{box.x_min() * image_width, box.y_min() * image_height, box.x_max() * image_width,
                  box.y_max() * image_height};
}

BBox from_pixels(const PixelBox& box, int image_width, int image_height) {
  return BBox::from_corners(box.x_min / image_width, box.y_min / image_height, box.x_max / image_width,
                            box.y_max / image_height);
}

Placement placement_for(ResizeMode mode, int image_width, int image_height, int resolution) {
  if (image_width < 1 || image_height < 1 || resolution < 1) throw ShapeError("placement: sizes must be positive");
  Placement p;
  if (mode == ResizeMode::stretch) {
    p.scale_x = static_cast<double>(resolution) / image_width;
    p.scale_y = static_cast<double>(resolution) / image_height;
    return p;
  }
  const double scale = std::min(static_cast<double>(resolution) / image_width,
                                static_cast<double>(resolution) / image_height);
  const int w = std::clamp(static_cast<int>(std::lround(image_width * scale)), 1, resolution);
  const int h = std::clamp(static_cast<int>(std::lround(image_height * scale)), 1, resolution);
  p.scale_x = static_cast<double>(w) / image_width;
  p.scale_y = static_cast<double>(h) / image_height;
  p.offset_x = (resolution - w) / 2;
  p.offset_y = (resolution - h) / 2;
  return p;
}

Tensor prepare_input(const Tensor& image, ResizeMode mode, int resolution) {
  if (mode == ResizeMode::stretch) return resize_bilinear(image, resolution, resolution);
  const Placement p = placement_for(mode, image.width(), image.height(), resolution);
  const int w = static_cast<int>(std::lround(p.scale_x * image.width()));
  const int h = static_cast<int>(std::lround(p.scale_y * image.height()));
  const Tensor inner = resize_bilinear(image, h, w);
  Tensor out(resolution, resolution, image.channels(), 0.5f);
  const int ox = static_cast<int>(p.offset_x);
  const int oy = static_cast<int>(p.offset_y);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < image.channels(); ++c) out.at(y + oy, x + ox, c) = inner.at(y, x, c);
    }
  }
  return out;
}

PixelBox map_to_original(const BBox& box, const Placement& p, int resolution, int image_width, int image_height) {
  const auto map_x = [&](double v) {
    return std::clamp((v * resolution - p.offset_x) / p.scale_x, 0.0, static_cast<double>(image_width));
  };
  const auto map_y = [&](double v) {
    return std::clamp((v * resolution - p.offset_y) / p.scale_y, 0.0, static_cast<double>(image_height));
  };
  return PixelBox{map_x(box.x_min()), map_y(box.y_min()), map_x(box.x_max()), map_y(box.y_max())};
}

std::shared_ptr<const Pipeline> Pipeline::load(const PipelineConfig& config) {
  config.validate();
  for (const auto& p : {config.weights_manifest, config.weights_blob, config.anchors, config.labels,
                        config.nutrition_db}) {
    if (!std::filesystem::exists(p)) throw Error("missing file: " + p.string());
  }
  const SerializedWeights files = read_weight_files(config.weights_manifest, config.weights_blob);
  ModelSpec spec = model_from_manifest(files.manifest);
  WeightStore weights = load_weights(files.manifest, files.blob, spec);
  auto anchors = read_anchors(config.anchors);
  auto labels = read_labels(config.labels);
  auto db = std::make_shared<const NutritionDatabase>(NutritionDatabase::load(config.nutrition_db));
  std::shared_ptr<const NutritionClient> remote;
  if (!config.nutrition_remote_url.empty()) {
    auto remote_config = RemoteNutritionConfig::from_environment(config.nutrition_remote_url);
    remote_config.timeout = std::chrono::milliseconds(config.nutrition_timeout_ms);
    remote = std::make_shared<HttpNutritionClient>(std::move(remote_config));
  }
  return std::make_shared<const Pipeline>(config, std::move(spec), weights, manifest_checksum(files.manifest),
                                          std::move(anchors), std::move(labels),
                                          NutritionService(std::move(db), std::move(remote)));
}

Pipeline::Pipeline(PipelineConfig config, ModelSpec spec, const WeightStore& weights, std::string weights_checksum,
                   std::vector<Anchor> anchors, std::vector<std::string> labels, NutritionService nutrition)
    : config_(std::move(config)),
      network_(std::move(spec), weights),
      weights_checksum_(std::move(weights_checksum)),
      anchors_(std::move(anchors)),
      labels_(std::move(labels)),
      nutrition_(std::move(nutrition)) {
  const ModelSpec& s = network_.spec();
  if (labels_.size() != static_cast<std::size_t>(s.num_classes)) {
    throw ValueError("label count mismatch: labels file has " + std::to_string(labels_.size()) +
                     " entries, weights were built for " + std::to_string(s.num_classes) + " classes");
  }
  if (anchors_.size() != static_cast<std::size_t>(s.num_anchors)) {
    throw ValueError("anchor count mismatch: anchors file has " + std::to_string(anchors_.size()) +
                     " entries, weights were built for " + std::to_string(s.num_anchors) + " anchors");
  }
  if (s.grid_size != config_.grid_size || s.input_resolution != config_.input_resolution) {
    throw ValueError("config grid " + std::to_string(config_.grid_size) + " / resolution " +
                     std::to_string(config_.input_resolution) + " disagree with weights (grid " +
                     std::to_string(s.grid_size) + ", resolution " + std::to_string(s.input_resolution) + ")");
  }
}

std::vector<Detection> Pipeline::infer(const Tensor& resized, double conf_threshold, double nms_threshold) const {
  const ModelSpec& s = network_.spec();
  const std::vector<float> raw = network_.forward(resized);
  const std::vector<Detection> candidates = decode(raw, anchors_, s.grid_size, s.num_classes, conf_threshold);
  return nms(candidates, nms_threshold);
}

DetectResponse Pipeline::detect_image(std::span<const std::uint8_t> image_bytes, const DetectOptions& options) const {
  return detect(decode_image(image_bytes), options);
}

DetectResponse Pipeline::detect(const Tensor& image, const DetectOptions& options) const {
  DetectResponse response;
  response.conf_threshold = options.conf_threshold.value_or(config_.conf_threshold);
  response.nms_threshold = options.nms_threshold.value_or(config_.nms_threshold);
  check_threshold(response.conf_threshold, "conf_threshold");
  check_threshold(response.nms_threshold, "nms_threshold");
  if (image.channels() != 3) throw ShapeError("detect: image must have 3 channels");
  response.image_width = image.width();
  response.image_height = image.height();

  const int res = network_.spec().input_resolution;
  const Tensor resized = prepare_input(image, config_.resize, res);
  const Placement placement = placement_for(config_.resize, image.width(), image.height(), res);

  const auto wall_start = std::chrono::steady_clock::now();
  const double cpu_start = thread_cpu_ms();
  const std::vector<Detection> kept = infer(resized, response.conf_threshold, response.nms_threshold);
  response.timing.cpu_ms = thread_cpu_ms() - cpu_start;
  response.timing.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall_start).count();

  for (const Detection& d : kept) {
    response.detections.push_back(
        DetectedItem{map_to_original(d.box, placement, res, image.width(), image.height()), d.class_id, labels_[d.class_id], d.confidence});
  }
  response.nutrition = analyze(kept, labels_, nutrition_, options.source);
  return response;
}

std::string to_json(const DetectResponse& r, bool include_timing) {
  json detections = json::array();
  for (const DetectedItem& d : r.detections) {
    detections.push_back({{"label", d.label},
                          {"class_id", d.class_id},
                          {"confidence", d.confidence},
                          {"box", {{"x_min", d.box.x_min}, {"y_min", d.box.y_min}, {"x_max", d.box.x_max},
                                   {"y_max", d.box.y_max}}}});
  }
  json items = json::array();
  for (const MealItem& item : r.nutrition.items) {
    items.push_back({{"label", item.label},
                     {"class_id", item.detection.class_id},
                     {"confidence", item.detection.confidence},
                     {"facts", facts_json(item.facts)}});
  }
  json missing = json::array();
  for (const MissingItem& m : r.nutrition.missing) {
    missing.push_back({{"label", m.label},
                       {"class_id", m.detection.class_id},
                       {"confidence", m.detection.confidence},
                       {"reason", m.reason}});
  }
  json body{{"image", {{"width", r.image_width}, {"height", r.image_height}}},
            {"thresholds", {{"confidence", r.conf_threshold}, {"nms", r.nms_threshold}}},
            {"detections", std::move(detections)},
            {"nutrition",
             {{"items", std::move(items)},
              {"missing", std::move(missing)},
              {"warnings", r.nutrition.warnings},
              {"totals", facts_json(r.nutrition.totals)}}}};
  if (include_timing) body["timing"] = {{"wall_ms", r.timing.wall_ms}, {"cpu_ms", r.timing.cpu_ms}};
  return body.dump();
}

}  // namespace foodtrack
