#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foodtrack/model.hpp"

namespace foodtrack {

enum class WeightRole { kernel, bias, gamma, beta, mean, variance };

std::string_view to_string(WeightRole role);
WeightRole weight_role_from_string(std::string_view name);

// Shape a spec demands for one learned array.
struct ArraySpec {
  std::string name;  // "<layer name>.<role>"
  int layer = 0;
  WeightRole role = WeightRole::kernel;
  std::vector<int> shape;

  std::size_t element_count() const;
};

struct WeightArray {
  ArraySpec spec;
  std::vector<float> values;

  friend bool operator==(const WeightArray& a, const WeightArray& b);
};

// Learned parameters of a ModelSpec, ordered by layer then role.
class WeightStore {
 public:
  void add(WeightArray array);

  // Throws ShapeError when the array is absent.
  const WeightArray& get(int layer, WeightRole role) const;
  const WeightArray* find(int layer, WeightRole role) const;

  std::span<const WeightArray> arrays() const { return arrays_; }
  std::span<WeightArray> arrays() { return arrays_; }

  // Bit-level equality of every value (NaN payloads included).
  friend bool operator==(const WeightStore& a, const WeightStore& b);

 private:
  std::vector<WeightArray> arrays_;
};

// Arrays in storage order: kernel, bias, gamma, beta, mean, variance.
// Shapes: standard [K,K,M,N], depthwise [K,K,M], pointwise [M,N],
// fully connected [out,in], vectors [channels].
std::vector<ArraySpec> required_arrays(const ModelSpec& spec);

// Throws ShapeError naming the first missing or misshapen array.
void validate_weights(const WeightStore& store, const ModelSpec& spec);

// Procedural weights from a seed (He-uniform kernels, mild batchnorm
// statistics). Deterministic across platforms.
WeightStore random_weights(const ModelSpec& spec, std::uint64_t seed);

// Every value zero except batchnorm variances, which are one.
WeightStore zero_weights(const ModelSpec& spec);

// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string checksum_hex(std::uint64_t value);

struct SerializedWeights {
  std::string manifest;
  std::vector<std::uint8_t> blob;
};

// Blob: little-endian float32 arrays in manifest order followed by an
// 8-byte little-endian FNV-1a checksum of those bytes. The manifest is a
// JSON index (name, shape, offset, length) plus the model description.
SerializedWeights save_weights(const WeightStore& store, const ModelSpec& spec);

// Errors: ShapeError (manifest disagrees with spec), TruncationError (blob
// too short, names the array), ChecksumError, FormatError (bad manifest).
WeightStore load_weights(std::string_view manifest, std::span<const std::uint8_t> blob,
                         const ModelSpec& spec);

// Model description embedded in a manifest.
ModelSpec model_from_manifest(std::string_view manifest);

// Checksum recorded in a manifest, as written ("0x" + 16 hex digits).
std::string manifest_checksum(std::string_view manifest);

void write_weight_files(const SerializedWeights& weights, const std::filesystem::path& manifest_path,
                        const std::filesystem::path& blob_path);
SerializedWeights read_weight_files(const std::filesystem::path& manifest_path,
                                    const std::filesystem::path& blob_path);

}  // namespace foodtrack
