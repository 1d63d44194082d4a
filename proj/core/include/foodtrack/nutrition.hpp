#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foodtrack/boxes.hpp"

namespace foodtrack {

// One-serving macro-nutrients. Energy in kcal, masses in g, sodium in mg.
struct NutritionFacts {
  std::string label;
  double serving_qty = 0.0;
  std::string serving_unit;
  double calories = 0.0;
  double total_fat = 0.0;
  double carbohydrates = 0.0;
  double protein = 0.0;
  double sugars = 0.0;
  double sodium = 0.0;

  friend bool operator==(const NutritionFacts&, const NutritionFacts&) = default;
};

// Lowercase ASCII, trim, collapse internal whitespace runs to one space.
std::string normalize_label(std::string_view label);

// Tab-separated table with a header row naming the NutritionFacts fields.
// Immutable after load.
class NutritionDatabase {
 public:
  static NutritionDatabase parse(std::istream& in);
  static NutritionDatabase load(const std::filesystem::path& path);

  // Exact match after normalize_label(); nullptr when absent.
  const NutritionFacts* find(std::string_view label) const;

  std::size_t size() const { return records_.size(); }
  std::vector<std::string> labels() const;

 private:
  std::map<std::string, NutritionFacts> records_;
};

// Live lookup shaped like a natural-language nutrients endpoint.
class NutritionClient {
 public:
  virtual ~NutritionClient() = default;
  // Throws NotFoundError, TimeoutError or Error.
  virtual NutritionFacts fetch(std::string_view label) const = 0;
};

struct RemoteNutritionConfig {
  std::string base_url;                      // e.g. "http://127.0.0.1:8081"
  std::string path = "/v2/natural/nutrients";
  std::string app_id;
  std::string app_key;
  std::chrono::milliseconds timeout{2000};

  // Credentials from FOODTRACK_NUTRITION_APP_ID / FOODTRACK_NUTRITION_APP_KEY.
  static RemoteNutritionConfig from_environment(std::string base_url);
};

// POST {"query": label} with x-app-id / x-app-key headers; reads the first
// entry of "foods" (food_name, serving_qty, serving_unit, nf_calories,
// nf_total_fat, nf_total_carbohydrate, nf_protein, nf_sugars, nf_sodium).
class HttpNutritionClient : public NutritionClient {
 public:
  explicit HttpNutritionClient(RemoteNutritionConfig config);
  NutritionFacts fetch(std::string_view label) const override;

 private:
  RemoteNutritionConfig config_;
};

enum class NutritionSource { local, remote };

struct LookupResult {
  NutritionFacts facts;
  bool fell_back = false;  // remote failed, local answered
  std::string warning;
};

class NutritionService {
 public:
  explicit NutritionService(std::shared_ptr<const NutritionDatabase> local,
                            std::shared_ptr<const NutritionClient> remote = nullptr);

  // Remote failures (timeout, transport, not found) fall back to the local
  // table with a warning. Throws NotFoundError when no source knows the label.
  LookupResult lookup(std::string_view label, NutritionSource source = NutritionSource::local) const;

  bool has_remote() const { return remote_ != nullptr; }

 private:
  std::shared_ptr<const NutritionDatabase> local_;
  std::shared_ptr<const NutritionClient> remote_;
};

struct MealItem {
  Detection detection;
  std::string label;
  NutritionFacts facts;
};

struct MissingItem {
  Detection detection;
  std::string label;
  std::string reason;
};

// One serving per detected item. totals.label is "meal total", its
// serving_qty counts servings and serving_unit is "serving".
struct MealAnalysis {
  std::vector<MealItem> items;  // confidence descending
  std::vector<MissingItem> missing;
  std::vector<std::string> warnings;
  NutritionFacts totals;
};

// labels[class_id] names each class. Each distinct class is looked up once;
// labels nobody knows land in `missing` without stopping the rest.
MealAnalysis analyze(std::span<const Detection> detections, std::span<const std::string> labels,
                     const NutritionService& service, NutritionSource source = NutritionSource::local);

}  // namespace foodtrack
