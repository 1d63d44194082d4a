#include <gtest/gtest.h>

#include <bit>
#include <functional>

#include <json.hpp>

#include "foodtrack/error.hpp"
#include "foodtrack/weights.hpp"
#include "helpers.hpp"

using namespace foodtrack;
using json = nlohmann::json;

namespace {

ModelSpec small_spec() {
  BuildOptions opts;
  opts.width_divisor = 8;
  opts.input_resolution = 32;
  return build_mobilenet_yolo(3, 2, opts);
}

template <typename E>
std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const E& e) {
    return e.what();
  } catch (const std::exception& e) {
    ADD_FAILURE() << "wrong exception type: " << e.what();
    return {};
  }
  ADD_FAILURE() << "no exception";
  return {};
}

std::uint64_t read_le64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

TEST(Weights, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64({}), 0xcbf29ce484222325ULL);
  const std::string a = "a";
  EXPECT_EQ(fnv1a64({reinterpret_cast<const std::uint8_t*>(a.data()), a.size()}), 0xaf63dc4c8601ec8cULL);
  const std::string foobar = "foobar";
  EXPECT_EQ(fnv1a64({reinterpret_cast<const std::uint8_t*>(foobar.data()), foobar.size()}), 0x85944171f73967e8ULL);
  EXPECT_EQ(checksum_hex(0xabcULL), "0x0000000000000abc");
}

TEST(Weights, RoundTripIsBitExact) {
  const ModelSpec spec = small_spec();
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const WeightStore store = random_weights(spec, seed);
    const SerializedWeights files = save_weights(store, spec);
    EXPECT_TRUE(load_weights(files.manifest, files.blob, spec) == store);
    EXPECT_EQ(model_from_manifest(files.manifest), spec);
    EXPECT_EQ(save_weights(store, spec).blob, files.blob);
  }
}

TEST(Weights, RoundTripThroughFiles) {
  testing_support::TempDir dir("weights");
  const ModelSpec spec = small_spec();
  const WeightStore store = random_weights(spec, 4);
  write_weight_files(save_weights(store, spec), dir / "w.json", dir / "w.bin");
  const SerializedWeights back = read_weight_files(dir / "w.json", dir / "w.bin");
  EXPECT_TRUE(load_weights(back.manifest, back.blob, model_from_manifest(back.manifest)) == store);
}

TEST(Weights, SeededGenerationIsDeterministic) {
  const ModelSpec spec = small_spec();
  EXPECT_TRUE(random_weights(spec, 5) == random_weights(spec, 5));
  EXPECT_FALSE(random_weights(spec, 5) == random_weights(spec, 6));
  EXPECT_NO_THROW(validate_weights(random_weights(spec, 5), spec));
}

TEST(Weights, BlobLayoutMatchesManifest) {
  const ModelSpec spec = small_spec();
  const WeightStore store = random_weights(spec, 3);
  const SerializedWeights files = save_weights(store, spec);
  const json manifest = json::parse(files.manifest);
  EXPECT_EQ(manifest["format"], "foodtrack-weights");
  EXPECT_EQ(manifest["dtype"], "float32");

  std::size_t offset = 0;
  std::size_t index = 0;
  for (const json& a : manifest["arrays"]) {
    ASSERT_EQ(a["offset"].get<std::size_t>(), offset);
    const WeightArray& array = store.arrays()[index++];
    EXPECT_EQ(a["name"], array.spec.name);
    ASSERT_EQ(a["length"].get<std::size_t>(), array.values.size() * 4);
    for (std::size_t i = 0; i < array.values.size(); ++i) {
      const std::uint8_t* p = files.blob.data() + offset + 4 * i;
      const std::uint32_t bits = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
      ASSERT_EQ(bits, std::bit_cast<std::uint32_t>(array.values[i]));
    }
    offset += array.values.size() * 4;
  }
  EXPECT_EQ(index, store.arrays().size());
  EXPECT_EQ(manifest["data_bytes"].get<std::size_t>(), offset);
  ASSERT_EQ(files.blob.size(), offset + 8);
  const std::uint64_t trailer = read_le64(files.blob.data() + offset);
  EXPECT_EQ(trailer, fnv1a64(std::span(files.blob).first(offset)));
  EXPECT_EQ(manifest["checksum"]["value"], checksum_hex(trailer));
}

TEST(Weights, TruncationNamesArray) {
  const ModelSpec spec = small_spec();
  const SerializedWeights files = save_weights(random_weights(spec, 1), spec);
  const json manifest = json::parse(files.manifest);

  // One byte short: the trailer slides into the last array.
  auto blob = files.blob;
  blob.pop_back();
  const std::string last = manifest["arrays"].back()["name"].get<std::string>();
  const std::string msg = message_of<TruncationError>([&] { load_weights(files.manifest, blob, spec); });
  EXPECT_NE(msg.find("'" + last + "'"), std::string::npos) << msg;

  const json& third = manifest["arrays"][2];
  blob.resize(third["offset"].get<std::size_t>() + 2 + 8);
  const std::string msg2 = message_of<TruncationError>([&] { load_weights(files.manifest, blob, spec); });
  EXPECT_NE(msg2.find("'" + third["name"].get<std::string>() + "'"), std::string::npos) << msg2;
}

TEST(Weights, ShapeErrorNamesLayer) {
  const ModelSpec spec = small_spec();
  const SerializedWeights files = save_weights(random_weights(spec, 1), spec);
  json manifest = json::parse(files.manifest);
  // first pointwise kernel, [in, out]: one output channel too many
  json* found = nullptr;
  for (json& a : manifest["arrays"]) {
    if (a["role"] == "kernel" && a["name"].get<std::string>().find("_pw") != std::string::npos) {
      found = &a;
      break;
    }
  }
  ASSERT_NE(found, nullptr);
  json& pw = *found;
  pw["shape"][1] = pw["shape"][1].get<int>() + 1;
  const int layer = pw["layer"].get<int>();
  const std::string msg = message_of<ShapeError>([&] { load_weights(manifest.dump(), files.blob, spec); });
  EXPECT_NE(msg.find(spec.layers[layer].name), std::string::npos) << msg;

  // A store built for another spec is rejected the same way.
  const ModelSpec other = build_mobilenet_yolo(4, 2, {32, 8, false});
  EXPECT_THROW(validate_weights(random_weights(other, 1), spec), ShapeError);
  EXPECT_THROW(save_weights(random_weights(other, 1), spec), ShapeError);
}

TEST(Weights, ChecksumMismatch) {
  const ModelSpec spec = small_spec();
  const SerializedWeights files = save_weights(random_weights(spec, 1), spec);
  auto blob = files.blob;
  blob[17] ^= 0x01;
  EXPECT_THROW(load_weights(files.manifest, blob, spec), ChecksumError);

  json manifest = json::parse(files.manifest);
  manifest["checksum"]["value"] = "0x0000000000000000";
  EXPECT_THROW(load_weights(manifest.dump(), files.blob, spec), ChecksumError);
}

TEST(Weights, MalformedManifest) {
  const ModelSpec spec = small_spec();
  const SerializedWeights files = save_weights(random_weights(spec, 1), spec);
  EXPECT_THROW(load_weights("{not json", files.blob, spec), FormatError);
  json manifest = json::parse(files.manifest);
  manifest["format"] = "other";
  EXPECT_THROW(load_weights(manifest.dump(), files.blob, spec), FormatError);
  manifest = json::parse(files.manifest);
  manifest["version"] = 99;
  EXPECT_THROW(model_from_manifest(manifest.dump()), FormatError);
  auto longer = files.blob;
  longer.push_back(0);
  EXPECT_THROW(load_weights(files.manifest, longer, spec), FormatError);
}

TEST(Weights, ZeroWeightsHaveUnitVariance) {
  const ModelSpec spec = small_spec();
  const WeightStore store = zero_weights(spec);
  for (const WeightArray& a : store.arrays()) {
    const float want = a.spec.role == WeightRole::variance ? 1.0f : 0.0f;
    for (float v : a.values) ASSERT_EQ(v, want) << a.spec.name;
  }
}
