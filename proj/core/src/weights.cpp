#include "foodtrack/weights.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "foodtrack/error.hpp"
#include "foodtrack/rng.hpp"

namespace foodtrack {

namespace {

using json = nlohmann::json;

constexpr std::string_view kFormatName = "foodtrack-weights";
constexpr int kFormatVersion = 1;
constexpr std::size_t kTrailerBytes = 8;

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

std::uint32_t float_bits(float v) { return std::bit_cast<std::uint32_t>(v); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

int output_channels(const LayerSpec& layer) {
  return layer.kind == LayerKind::fully_connected ? layer.out_features : layer.conv.out_channels;
}

json layer_to_json(const LayerSpec& layer) {
  json j{{"name", layer.name}, {"kind", to_string(layer.kind)}};
  if (layer.kind == LayerKind::convolution) {
    j["conv"] = {{"kind", to_string(layer.conv.kind)},
                 {"kernel", layer.conv.kernel},
                 {"in_channels", layer.conv.in_channels},
                 {"out_channels", layer.conv.out_channels},
                 {"stride", layer.conv.stride}};
  } else if (layer.kind == LayerKind::fully_connected) {
    j["in_features"] = layer.in_features;
    j["out_features"] = layer.out_features;
  }
  j["batchnorm"] = layer.batchnorm;
  j["relu"] = layer.relu;
  j["bias"] = layer.bias;
  return j;
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec layer;
  layer.name = j.at("name").get<std::string>();
  layer.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  if (layer.kind == LayerKind::convolution) {
    const json& c = j.at("conv");
    layer.conv.kind = conv_kind_from_string(c.at("kind").get<std::string>());
    layer.conv.kernel = c.at("kernel").get<int>();
    layer.conv.in_channels = c.at("in_channels").get<int>();
    layer.conv.out_channels = c.at("out_channels").get<int>();
    layer.conv.stride = c.at("stride").get<int>();
  } else if (layer.kind == LayerKind::fully_connected) {
    layer.in_features = j.at("in_features").get<int>();
    layer.out_features = j.at("out_features").get<int>();
  }
  layer.batchnorm = j.value("batchnorm", false);
  layer.relu = j.value("relu", false);
  layer.bias = j.value("bias", false);
  return layer;
}

json model_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const LayerSpec& layer : spec.layers) layers.push_back(layer_to_json(layer));
  return {{"input_resolution", spec.input_resolution},
          {"grid_size", spec.grid_size},
          {"num_anchors", spec.num_anchors},
          {"num_classes", spec.num_classes},
          {"layers", std::move(layers)}};
}

json parse_manifest(std::string_view manifest) {
  json j;
  try {
    j = json::parse(manifest);
  } catch (const json::exception& e) {
    throw FormatError(std::string("weight manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kFormatName) {
    throw FormatError("weight manifest: missing format tag '" + std::string(kFormatName) + "'");
  }
  if (j.value("version", 0) != kFormatVersion) {
    throw FormatError("weight manifest: unsupported version " + j.value("version", json()).dump());
  }
  if (j.value("dtype", "") != "float32" || j.value("byte_order", "") != "little") {
    throw FormatError("weight manifest: only little-endian float32 is supported");
  }
  return j;
}

}  // namespace

std::string_view to_string(WeightRole role) {
  switch (role) {
    case WeightRole::kernel: return "kernel";
    case WeightRole::bias: return "bias";
    case WeightRole::gamma: return "gamma";
    case WeightRole::beta: return "beta";
    case WeightRole::mean: return "mean";
    case WeightRole::variance: return "variance";
  }
  return "unknown";
}

WeightRole weight_role_from_string(std::string_view name) {
  for (WeightRole r : {WeightRole::kernel, WeightRole::bias, WeightRole::gamma, WeightRole::beta,
                       WeightRole::mean, WeightRole::variance}) {
    if (to_string(r) == name) return r;
  }
  throw FormatError("unknown weight role '" + std::string(name) + "'");
}

std::size_t ArraySpec::element_count() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

bool operator==(const WeightArray& a, const WeightArray& b) {
  if (a.spec.name != b.spec.name || a.spec.layer != b.spec.layer || a.spec.role != b.spec.role ||
      a.spec.shape != b.spec.shape || a.values.size() != b.values.size()) {
    return false;
  }
  return a.values.empty() ||
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

bool operator==(const WeightStore& a, const WeightStore& b) { return a.arrays_ == b.arrays_; }

void WeightStore::add(WeightArray array) { arrays_.push_back(std::move(array)); }

const WeightArray* WeightStore::find(int layer, WeightRole role) const {
  for (const WeightArray& a : arrays_) {
    if (a.spec.layer == layer && a.spec.role == role) return &a;
  }
  return nullptr;
}

const WeightArray& WeightStore::get(int layer, WeightRole role) const {
  const WeightArray* a = find(layer, role);
  if (a == nullptr) {
    throw ShapeError("weight store has no " + std::string(to_string(role)) + " for layer " +
                     std::to_string(layer));
  }
  return *a;
}

std::vector<ArraySpec> required_arrays(const ModelSpec& spec) {
  std::vector<ArraySpec> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind == LayerKind::yolo_output) continue;
    const int idx = static_cast<int>(i);
    const auto push = [&](WeightRole role, std::vector<int> shape) {
      out.push_back(ArraySpec{layer.name + "." + std::string(to_string(role)), idx, role, std::move(shape)});
    };
    if (layer.kind == LayerKind::convolution) {
      const ConvSpec& c = layer.conv;
      switch (c.kind) {
        case ConvKind::standard: push(WeightRole::kernel, {c.kernel, c.kernel, c.in_channels, c.out_channels}); break;
        case ConvKind::depthwise: push(WeightRole::kernel, {c.kernel, c.kernel, c.in_channels}); break;
        case ConvKind::pointwise: push(WeightRole::kernel, {c.in_channels, c.out_channels}); break;
      }
    } else {
      push(WeightRole::kernel, {layer.out_features, layer.in_features});
    }
    const int channels = output_channels(layer);
    if (layer.bias) push(WeightRole::bias, {channels});
    if (layer.batchnorm) {
      push(WeightRole::gamma, {channels});
      push(WeightRole::beta, {channels});
      push(WeightRole::mean, {channels});
      push(WeightRole::variance, {channels});
    }
  }
  return out;
}

void validate_weights(const WeightStore& store, const ModelSpec& spec) {
  for (const ArraySpec& want : required_arrays(spec)) {
    const WeightArray* have = store.find(want.layer, want.role);
    if (have == nullptr) throw ShapeError("weights: missing array '" + want.name + "'");
    if (have->spec.shape != want.shape || have->values.size() != want.element_count()) {
      throw ShapeError("weights: array '" + want.name + "' has shape " + shape_string(have->spec.shape) +
                       ", layer '" + spec.layers[want.layer].name + "' needs " + shape_string(want.shape));
    }
  }
}

WeightStore random_weights(const ModelSpec& spec, std::uint64_t seed) {
  WeightStore store;
  const std::vector<ArraySpec> arrays = required_arrays(spec);
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const ArraySpec& a = arrays[i];
    const LayerSpec& layer = spec.layers[a.layer];
    SplitMix64 rng(derive_seed(seed, i));
    std::vector<float> values(a.element_count());
    double lo = 0.0, hi = 0.0;
    switch (a.role) {
      case WeightRole::kernel: {
        double fan_in = 1.0;
        if (layer.kind == LayerKind::fully_connected) {
          fan_in = layer.in_features;
        } else if (layer.conv.kind == ConvKind::depthwise) {
          fan_in = static_cast<double>(layer.conv.kernel) * layer.conv.kernel;
        } else {
          fan_in = static_cast<double>(layer.conv.kernel) * layer.conv.kernel * layer.conv.in_channels;
        }
        hi = std::sqrt(6.0 / fan_in);
        lo = -hi;
        break;
      }
      case WeightRole::bias: lo = -0.1; hi = 0.1; break;
      case WeightRole::gamma: lo = 0.8; hi = 1.2; break;
      case WeightRole::beta: lo = -0.1; hi = 0.1; break;
      case WeightRole::mean: lo = -0.1; hi = 0.1; break;
      case WeightRole::variance: lo = 0.5; hi = 1.5; break;
    }
    for (float& v : values) v = static_cast<float>(rng.uniform(lo, hi));
    store.add(WeightArray{a, std::move(values)});
  }
  return store;
}

WeightStore zero_weights(const ModelSpec& spec) {
  WeightStore store;
  for (const ArraySpec& a : required_arrays(spec)) {
    const float fill = a.role == WeightRole::variance ? 1.0f : 0.0f;
    store.add(WeightArray{a, std::vector<float>(a.element_count(), fill)});
  }
  return store;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string checksum_hex(std::uint64_t value) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

SerializedWeights save_weights(const WeightStore& store, const ModelSpec& spec) {
  validate_weights(store, spec);
  SerializedWeights out;
  json arrays = json::array();
  for (const ArraySpec& a : required_arrays(spec)) {
    const WeightArray& have = store.get(a.layer, a.role);
    const std::size_t offset = out.blob.size();
    for (float v : have.values) put_u32(out.blob, float_bits(v));
    arrays.push_back({{"name", a.name},
                      {"layer", a.layer},
                      {"role", to_string(a.role)},
                      {"shape", a.shape},
                      {"offset", offset},
                      {"length", out.blob.size() - offset}});
  }
  const std::size_t data_bytes = out.blob.size();
  const std::uint64_t sum = fnv1a64(out.blob);
  put_u64(out.blob, sum);

  json manifest{{"format", kFormatName},
                {"version", kFormatVersion},
                {"dtype", "float32"},
                {"byte_order", "little"},
                {"model", model_to_json(spec)},
                {"arrays", std::move(arrays)},
                {"data_bytes", data_bytes},
                {"checksum", {{"algorithm", "fnv1a64"}, {"value", checksum_hex(sum)}}}};
  out.manifest = manifest.dump(2) + "\n";
  return out;
}

ModelSpec model_from_manifest(std::string_view manifest) {
  const json j = parse_manifest(manifest);
  try {
    const json& m = j.at("model");
    ModelSpec spec;
    spec.input_resolution = m.at("input_resolution").get<int>();
    spec.grid_size = m.at("grid_size").get<int>();
    spec.num_anchors = m.at("num_anchors").get<int>();
    spec.num_classes = m.at("num_classes").get<int>();
    for (const json& layer : m.at("layers")) spec.layers.push_back(layer_from_json(layer));
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("weight manifest: malformed model description: ") + e.what());
  }
}

std::string manifest_checksum(std::string_view manifest) {
  const json j = parse_manifest(manifest);
  try {
    return j.at("checksum").at("value").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("weight manifest: missing checksum: ") + e.what());
  }
}

WeightStore load_weights(std::string_view manifest, std::span<const std::uint8_t> blob,
                         const ModelSpec& spec) {
  const json j = parse_manifest(manifest);

  struct Entry {
    ArraySpec spec;
    std::size_t offset;
    std::size_t length;
  };
  std::vector<Entry> entries;
  std::size_t data_bytes = 0;
  std::string recorded_sum;
  try {
    for (const json& a : j.at("arrays")) {
      Entry e;
      e.spec.name = a.at("name").get<std::string>();
      e.spec.layer = a.at("layer").get<int>();
      e.spec.role = weight_role_from_string(a.at("role").get<std::string>());
      e.spec.shape = a.at("shape").get<std::vector<int>>();
      e.offset = a.at("offset").get<std::size_t>();
      e.length = a.at("length").get<std::size_t>();
      entries.push_back(std::move(e));
    }
    data_bytes = j.at("data_bytes").get<std::size_t>();
    recorded_sum = j.at("checksum").at("value").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("weight manifest: malformed array index: ") + e.what());
  }

  // Shape agreement with the spec, array by array.
  const std::vector<ArraySpec> required = required_arrays(spec);
  for (const ArraySpec& want : required) {
    const auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) {
      return e.spec.layer == want.layer && e.spec.role == want.role;
    });
    if (it == entries.end()) {
      throw ShapeError("weight manifest: layer '" + spec.layers[want.layer].name + "' has no " +
                       std::string(to_string(want.role)) + " array");
    }
    if (it->spec.shape != want.shape) {
      throw ShapeError("weight manifest: layer '" + spec.layers[want.layer].name + "' " +
                       std::string(to_string(want.role)) + " has shape " + shape_string(it->spec.shape) +
                       ", spec requires " + shape_string(want.shape));
    }
    if (it->length != want.element_count() * sizeof(float)) {
      throw ShapeError("weight manifest: array '" + it->spec.name + "' length " + std::to_string(it->length) +
                       " does not match its shape");
    }
  }
  if (entries.size() != required.size()) {
    throw ShapeError("weight manifest lists " + std::to_string(entries.size()) + " arrays, spec requires " +
                     std::to_string(required.size()));
  }

  // Truncation: the trailer is the last 8 bytes of whatever arrived.
  const std::size_t expected = data_bytes + kTrailerBytes;
  if (blob.size() < expected) {
    const std::size_t present = blob.size() > kTrailerBytes ? blob.size() - kTrailerBytes : 0;
    for (const Entry& e : entries) {
      if (e.offset + e.length > present) {
        throw TruncationError("weight blob truncated: array '" + e.spec.name + "' needs bytes [" +
                              std::to_string(e.offset) + ", " + std::to_string(e.offset + e.length) +
                              ") but blob holds " + std::to_string(blob.size()) + " of " +
                              std::to_string(expected) + " bytes");
      }
    }
    throw TruncationError("weight blob truncated: checksum trailer incomplete (" +
                          std::to_string(blob.size()) + " of " + std::to_string(expected) + " bytes)");
  }
  if (blob.size() > expected) {
    throw FormatError("weight blob has " + std::to_string(blob.size() - expected) + " unexpected trailing bytes");
  }
  for (const Entry& e : entries) {
    if (e.offset + e.length > data_bytes) {
      throw FormatError("weight manifest: array '" + e.spec.name + "' extends past data_bytes");
    }
  }

  const std::uint64_t actual = fnv1a64(blob.first(data_bytes));
  const std::uint64_t trailer = get_u64(blob.data() + data_bytes);
  if (actual != trailer || checksum_hex(actual) != recorded_sum) {
    throw ChecksumError("weight blob checksum mismatch: computed " + checksum_hex(actual) + ", trailer " +
                        checksum_hex(trailer) + ", manifest " + recorded_sum);
  }

  WeightStore store;
  for (const ArraySpec& want : required) {
    const auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) {
      return e.spec.layer == want.layer && e.spec.role == want.role;
    });
    std::vector<float> values(want.element_count());
    const std::uint8_t* p = blob.data() + it->offset;
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
    }
    store.add(WeightArray{want, std::move(values)});
  }
  return store;
}

void write_weight_files(const SerializedWeights& weights, const std::filesystem::path& manifest_path,
                        const std::filesystem::path& blob_path) {
  std::ofstream m(manifest_path, std::ios::binary);
  if (!m) throw Error("cannot write " + manifest_path.string());
  m << weights.manifest;
  std::ofstream b(blob_path, std::ios::binary);
  if (!b) throw Error("cannot write " + blob_path.string());
  b.write(reinterpret_cast<const char*>(weights.blob.data()), static_cast<std::streamsize>(weights.blob.size()));
  m.flush();
  b.flush();
  if (!m || !b) throw Error("short write while saving weights");
}

SerializedWeights read_weight_files(const std::filesystem::path& manifest_path,
                                    const std::filesystem::path& blob_path) {
  SerializedWeights out;
  std::ifstream m(manifest_path, std::ios::binary);
  if (!m) throw Error("cannot read weight manifest " + manifest_path.string());
  out.manifest.assign(std::istreambuf_iterator<char>(m), {});
  std::ifstream b(blob_path, std::ios::binary);
  if (!b) throw Error("cannot read weight blob " + blob_path.string());
  out.blob.assign(std::istreambuf_iterator<char>(b), {});
  return out;
}

}  // namespace foodtrack
