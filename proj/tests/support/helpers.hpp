#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <unistd.h>

#include "foodtrack/annotations.hpp"
#include "foodtrack/model.hpp"
#include "foodtrack/nutrition.hpp"
#include "foodtrack/pipeline.hpp"
#include "foodtrack/rng.hpp"
#include "foodtrack/tensor.hpp"
#include "foodtrack/weights.hpp"
#include "foodtrack/yolo.hpp"

namespace testing_support {

inline std::filesystem::path data_dir() { return FOODTRACK_TEST_DATA_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return data_dir() / "fixtures" / name; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    foodtrack::SplitMix64 rng(reinterpret_cast<std::uintptr_t>(this) ^ static_cast<std::uint64_t>(::getpid()));
    path_ = std::filesystem::temp_directory_path() / ("foodtrack_" + tag + "_" + std::to_string(rng() % 1000000007));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline foodtrack::Tensor random_tensor(int h, int w, int c, foodtrack::SplitMix64& rng, double lo = -1.0,
                                       double hi = 1.0) {
  foodtrack::Tensor t(h, w, c);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline std::vector<float> random_vector(std::size_t n, foodtrack::SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

inline std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Writes seeded weights, the repo's anchors/labels/nutrition table and a
// config into dir; returns the config path.
inline std::filesystem::path write_pipeline_files(const std::filesystem::path& dir, std::uint64_t seed,
                                                  const foodtrack::ModelSpec& spec,
                                                  const std::filesystem::path& labels = data_dir() / "labels.txt",
                                                  const std::filesystem::path& anchors = data_dir() / "anchors.txt",
                                                  double conf_threshold = 0.4) {
  const auto files = foodtrack::save_weights(foodtrack::random_weights(spec, seed), spec);
  foodtrack::write_weight_files(files, dir / "weights.json", dir / "weights.bin");
  const std::string config = std::string("{\n") + "  \"weights_manifest\": \"weights.json\",\n" +
                             "  \"weights_blob\": \"weights.bin\",\n" + "  \"anchors\": \"" + anchors.string() +
                             "\",\n" + "  \"labels\": \"" + labels.string() + "\",\n" + "  \"nutrition_db\": \"" +
                             (data_dir() / "nutrition_db.tsv").string() + "\",\n" +
                             "  \"conf_threshold\": " + std::to_string(conf_threshold) + ",\n" +
                             "  \"grid_size\": " + std::to_string(spec.grid_size) + ",\n" +
                             "  \"input_resolution\": " + std::to_string(spec.input_resolution) + ",\n" +
                             "  \"max_body_bytes\": 1048576\n}\n";
  write_text(dir / "config.json", config);
  return dir / "config.json";
}

inline const std::vector<std::string>& fixture_labels() {
  static const std::vector<std::string> labels{"rice", "miso soup", "grilled salmon"};
  return labels;
}

// Three items on distinct cells of a 2x2 grid, in network-input coordinates.
inline foodtrack::GroundTruth fixture_meal() {
  return {"meal",
          {{{0.3, 0.35, 0.3, 0.3}, 0}, {{0.75, 0.3, 0.25, 0.3}, 1}, {{0.5, 0.75, 0.5, 0.3}, 2}}};
}

inline foodtrack::ModelSpec crafted_spec() {
  foodtrack::BuildOptions opts;
  opts.input_resolution = 64;
  opts.width_divisor = 16;
  opts.dense_head = true;
  return foodtrack::build_mobilenet_yolo(3, 5, opts);
}

// Zero weights except the dense head bias, which spells out gt as saturated
// logits: every input image then yields exactly gt's boxes.
inline foodtrack::WeightStore crafted_weights(const foodtrack::ModelSpec& spec, const foodtrack::GroundTruth& gt,
                                              const std::vector<foodtrack::Anchor>& anchors) {
  foodtrack::WeightStore store = foodtrack::zero_weights(spec);
  const auto target = foodtrack::encode_logits(gt, anchors, spec.grid_size, spec.num_classes);
  const int head = static_cast<int>(spec.layers.size()) - 2;
  for (foodtrack::WeightArray& a : store.arrays()) {
    if (a.spec.layer == head && a.spec.role == foodtrack::WeightRole::bias) a.values = target;
  }
  return store;
}

// Crafted weights, fixture labels and nutrition table plus a config in dir.
inline std::filesystem::path write_crafted_files(const std::filesystem::path& dir,
                                                 std::size_t max_body_bytes = 1u << 20) {
  const foodtrack::ModelSpec spec = crafted_spec();
  const auto anchors = foodtrack::read_anchors(data_dir() / "anchors.txt");
  const auto files = foodtrack::save_weights(crafted_weights(spec, fixture_meal(), anchors), spec);
  foodtrack::write_weight_files(files, dir / "weights.json", dir / "weights.bin");
  std::string labels;
  for (const std::string& l : fixture_labels()) labels += l + "\n";
  write_text(dir / "labels.txt", labels);
  const std::string config = "{\n  \"weights_manifest\": \"weights.json\",\n  \"weights_blob\": \"weights.bin\",\n"
                             "  \"anchors\": \"" + (data_dir() / "anchors.txt").string() + "\",\n"
                             "  \"labels\": \"labels.txt\",\n"
                             "  \"nutrition_db\": \"" + fixture("nutrition_fixture.tsv").string() + "\",\n"
                             "  \"grid_size\": 2,\n  \"input_resolution\": 64,\n"
                             "  \"max_body_bytes\": " + std::to_string(max_body_bytes) + "\n}\n";
  write_text(dir / "config.json", config);
  return dir / "config.json";
}

}  // namespace testing_support
