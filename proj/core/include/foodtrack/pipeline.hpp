#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foodtrack/boxes.hpp"
#include "foodtrack/forward.hpp"
#include "foodtrack/nutrition.hpp"
#include "foodtrack/yolo.hpp"

namespace foodtrack {

// stretch: plain bilinear resize to the square input. letterbox: keep the
// aspect ratio and pad with mid-gray.
enum class ResizeMode { stretch, letterbox };

std::string_view to_string(ResizeMode mode);
ResizeMode resize_mode_from_string(std::string_view name);

struct PipelineConfig {
  std::filesystem::path weights_manifest;
  std::filesystem::path weights_blob;
  std::filesystem::path anchors;
  std::filesystem::path labels;
  std::filesystem::path nutrition_db;
  double conf_threshold = kDefaultConfidenceThreshold;
  double nms_threshold = kDefaultNmsThreshold;
  int grid_size = 7;
  int input_resolution = 224;
  ResizeMode resize = ResizeMode::stretch;
  std::string nutrition_remote_url;  // empty: local table only
  int nutrition_timeout_ms = 2000;
  std::size_t max_body_bytes = 16u << 20;

  // JSON file; relative paths resolve against the file's directory.
  static PipelineConfig load(const std::filesystem::path& path);

  // Thresholds in (0, 1), positive sizes. Throws ValueError.
  void validate() const;
};

// Pixel-space corners in the original image.
struct PixelBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
};

PixelBox to_pixels(const BBox& box, int image_width, int image_height);
BBox from_pixels(const PixelBox& box, int image_width, int image_height);

// Where the original image sits inside the network input.
struct Placement {
  double scale_x = 1.0;  // input pixels per original pixel
  double scale_y = 1.0;
  double offset_x = 0.0;  // input pixels
  double offset_y = 0.0;
};

Placement placement_for(ResizeMode mode, int image_width, int image_height, int resolution);
Tensor prepare_input(const Tensor& image, ResizeMode mode, int resolution);

// Normalized box in network-input space to clamped pixels of the original.
PixelBox map_to_original(const BBox& box, const Placement& placement, int resolution, int image_width,
                         int image_height);

struct DetectedItem {
  PixelBox box;
  int class_id = 0;
  std::string label;
  double confidence = 0.0;
};

struct InferenceTiming {
  double wall_ms = 0.0;
  double cpu_ms = 0.0;
};

struct DetectResponse {
  int image_width = 0;
  int image_height = 0;
  double conf_threshold = 0.0;
  double nms_threshold = 0.0;
  std::vector<DetectedItem> detections;
  MealAnalysis nutrition;
  InferenceTiming timing;
};

struct DetectOptions {
  std::optional<double> conf_threshold;
  std::optional<double> nms_threshold;
  NutritionSource source = NutritionSource::local;
};

// Loaded model, anchors, labels and nutrition table. Immutable and shared
// across request threads.
class Pipeline {
 public:
  // Diagnostics: missing or corrupt weights, anchor count != model anchors,
  // label count != model classes, grid/resolution disagreeing with the model.
  static std::shared_ptr<const Pipeline> load(const PipelineConfig& config);

  Pipeline(PipelineConfig config, ModelSpec spec, const WeightStore& weights, std::string weights_checksum,
           std::vector<Anchor> anchors, std::vector<std::string> labels, NutritionService nutrition);

  // Decode, resize (bilinear stretch), forward, decode, NMS, nutrition.
  // Throws FormatError for undecodable bytes.
  DetectResponse detect_image(std::span<const std::uint8_t> image_bytes, const DetectOptions& options = {}) const;
  DetectResponse detect(const Tensor& image, const DetectOptions& options = {}) const;

  // Forward + decode + NMS on an image already at input resolution.
  std::vector<Detection> infer(const Tensor& resized, double conf_threshold, double nms_threshold) const;

  const PipelineConfig& config() const { return config_; }
  const Network& network() const { return network_; }
  const std::vector<Anchor>& anchors() const { return anchors_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& weights_checksum() const { return weights_checksum_; }

 private:
  PipelineConfig config_;
  Network network_;
  std::string weights_checksum_;
  std::vector<Anchor> anchors_;
  std::vector<std::string> labels_;
  NutritionService nutrition_;
};

// Stable JSON rendering (sorted keys; pixels, milliseconds, kcal/g/mg).
// Timing is omitted when include_timing is false so identical inputs give
// byte-identical bodies.
std::string to_json(const DetectResponse& response, bool include_timing = true);

}  // namespace foodtrack
