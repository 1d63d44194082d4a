#include "foodtrack/nutrition.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "foodtrack/error.hpp"

namespace foodtrack {

namespace {

using json = nlohmann::json;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  for (std::string& f : fields) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
  }
  return fields;
}

double parse_quantity(const std::string& text, const std::string& column, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v) || v < 0.0) {
    throw FormatError("nutrition table line " + std::to_string(line) + ": column '" + column +
                      "' needs a non-negative number, got '" + text + "'");
  }
  return v;
}

void add_into(NutritionFacts& total, const NutritionFacts& item) {
  total.calories += item.calories;
  total.total_fat += item.total_fat;
  total.carbohydrates += item.carbohydrates;
  total.protein += item.protein;
  total.sugars += item.sugars;
  total.sodium += item.sodium;
}

double json_number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return 0.0;
  if (!it->is_number()) throw Error(std::string("remote nutrition: field '") + key + "' is not a number");
  const double v = it->get<double>();
  if (!std::isfinite(v) || v < 0.0) throw Error(std::string("remote nutrition: field '") + key + "' out of range");
  return v;
}

}  // namespace

std::string normalize_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  bool pending_space = false;
  for (char ch : label) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  return out;
}

NutritionDatabase NutritionDatabase::parse(std::istream& in) {
  static const std::vector<std::string> kColumns = {"label",   "serving_qty",   "serving_unit",
                                                    "calories", "total_fat",     "carbohydrates",
                                                    "protein", "sugars",        "sodium"};
  std::string line;
  int number = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++number;
    if (!line.empty() && line != "\r") header = split_tabs(line);
  }
  if (header.empty()) throw FormatError("nutrition table: missing header row");
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const std::string& name : kColumns) {
    if (!column.contains(name)) throw FormatError("nutrition table: header lacks column '" + name + "'");
  }

  NutritionDatabase db;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != header.size()) {
      throw FormatError("nutrition table line " + std::to_string(number) + ": expected " +
                        std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    const auto field = [&](const std::string& name) -> const std::string& { return fields[column.at(name)]; };
    const auto qty = [&](const std::string& name) { return parse_quantity(field(name), name, number); };
    NutritionFacts f;
    f.label = field("label");
    f.serving_qty = qty("serving_qty");
    f.serving_unit = field("serving_unit");
    f.calories = qty("calories");
    f.total_fat = qty("total_fat");
    f.carbohydrates = qty("carbohydrates");
    f.protein = qty("protein");
    f.sugars = qty("sugars");
    f.sodium = qty("sodium");
    const std::string key = normalize_label(f.label);
    if (key.empty()) throw FormatError("nutrition table line " + std::to_string(number) + ": empty label");
    if (!db.records_.emplace(key, std::move(f)).second) {
      throw FormatError("nutrition table line " + std::to_string(number) + ": duplicate label '" + key + "'");
    }
  }
  return db;
}

NutritionDatabase NutritionDatabase::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open nutrition table " + path.string());
  return parse(in);
}

const NutritionFacts* NutritionDatabase::find(std::string_view label) const {
  const auto it = records_.find(normalize_label(label));
  return it == records_.end() ? nullptr : &it->second;
}

std::vector<std::string> NutritionDatabase::labels() const {
  std::vector<std::string> out;
  out.reserve(records_.size());
  for (const auto& [key, facts] : records_) out.push_back(facts.label);
  return out;
}

RemoteNutritionConfig RemoteNutritionConfig::from_environment(std::string base_url) {
  RemoteNutritionConfig config;
  config.base_url = std::move(base_url);
  if (const char* id = std::getenv("FOODTRACK_NUTRITION_APP_ID")) config.app_id = id;
  if (const char* key = std::getenv("FOODTRACK_NUTRITION_APP_KEY")) config.app_key = key;
  return config;
}

HttpNutritionClient::HttpNutritionClient(RemoteNutritionConfig config) : config_(std::move(config)) {}

NutritionFacts HttpNutritionClient::fetch(std::string_view label) const {
  httplib::Client client(config_.base_url);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  httplib::Headers headers;
  if (!config_.app_id.empty()) headers.emplace("x-app-id", config_.app_id);
  if (!config_.app_key.empty()) headers.emplace("x-app-key", config_.app_key);
  const std::string body = json{{"query", std::string(label)}}.dump();

  const auto result = client.Post(config_.path, headers, body, "application/json");
  if (!result) {
    const httplib::Error err = result.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw TimeoutError("remote nutrition lookup for '" + std::string(label) + "' timed out after " +
                         std::to_string(config_.timeout.count()) + " ms");
    }
    throw Error("remote nutrition lookup failed: " + httplib::to_string(err));
  }
  if (result->status == 404) {
    throw NotFoundError("remote nutrition source has no entry for '" + std::string(label) + "'", std::string(label));
  }
  if (result->status != 200) {
    throw Error("remote nutrition lookup returned HTTP " + std::to_string(result->status));
  }

  json reply;
  try {
    reply = json::parse(result->body);
  } catch (const json::exception& e) {
    throw Error(std::string("remote nutrition: malformed JSON: ") + e.what());
  }
  const auto foods = reply.find("foods");
  if (foods == reply.end() || !foods->is_array() || foods->empty()) {
    throw NotFoundError("remote nutrition source has no entry for '" + std::string(label) + "'", std::string(label));
  }
  const json& food = foods->front();
  NutritionFacts f;
  f.label = food.value("food_name", std::string(label));
  f.serving_qty = json_number(food, "serving_qty");
  f.serving_unit = food.value("serving_unit", "serving");
  f.calories = json_number(food, "nf_calories");
  f.total_fat = json_number(food, "nf_total_fat");
  f.carbohydrates = json_number(food, "nf_total_carbohydrate");
  f.protein = json_number(food, "nf_protein");
  f.sugars = json_number(food, "nf_sugars");
  f.sodium = json_number(food, "nf_sodium");
  return f;
}

NutritionService::NutritionService(std::shared_ptr<const NutritionDatabase> local,
                                   std::shared_ptr<const NutritionClient> remote)
    : local_(std::move(local)), remote_(std::move(remote)) {
  if (!local_) throw ValueError("NutritionService: a local table is required");
}

LookupResult NutritionService::lookup(std::string_view label, NutritionSource source) const {
  if (normalize_label(label).empty()) throw ValueError("nutrition lookup: label is empty");
  LookupResult result;
  if (source == NutritionSource::remote && remote_) {
    try {
      result.facts = remote_->fetch(label);
      return result;
    } catch (const Error& e) {
      result.fell_back = true;
      result.warning = std::string("remote lookup failed, using local table: ") + e.what();
    }
  } else if (source == NutritionSource::remote) {
    result.fell_back = true;
    result.warning = "no remote nutrition source configured, using local table";
  }
  const NutritionFacts* facts = local_->find(label);
  if (facts == nullptr) {
    throw NotFoundError("no nutrition data for '" + std::string(label) + "'", std::string(label));
  }
  result.facts = *facts;
  return result;
}

MealAnalysis analyze(std::span<const Detection> detections, std::span<const std::string> labels,
                     const NutritionService& service, NutritionSource source) {
  for (const Detection& d : detections) {
    if (d.class_id < 0 || static_cast<std::size_t>(d.class_id) >= labels.size()) {
      throw ValueError("analyze: class id " + std::to_string(d.class_id) + " has no label (" +
                       std::to_string(labels.size()) + " labels)");
    }
  }

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  struct Cached {
    bool found = false;
    LookupResult result;
    std::string reason;
  };
  std::map<int, Cached> cache;

  MealAnalysis meal;
  meal.totals.label = "meal total";
  meal.totals.serving_unit = "serving";
  for (std::size_t i : order) {
    const Detection& d = detections[i];
    const std::string& label = labels[d.class_id];
    auto [it, inserted] = cache.try_emplace(d.class_id);
    if (inserted) {
      try {
        it->second.result = service.lookup(label, source);
        it->second.found = true;
        if (!it->second.result.warning.empty()) meal.warnings.push_back(it->second.result.warning);
      } catch (const NotFoundError& e) {
        it->second.reason = e.what();
      }
    }
    if (!it->second.found) {
      meal.missing.push_back(MissingItem{d, label, it->second.reason});
      continue;
    }
    meal.items.push_back(MealItem{d, label, it->second.result.facts});
    add_into(meal.totals, it->second.result.facts);
    meal.totals.serving_qty += 1.0;
  }
  return meal;
}

}  // namespace foodtrack
