#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "adain/model.hpp"

namespace adain {

struct BundleTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t element_count() const;
};

/// Named f32 tensors plus a JSON manifest.
///
/// File layout: "ADWB", version u32 LE (= 1), manifest length u64 LE, UTF-8 JSON
/// manifest, zero padding to a 64-byte boundary, then little-endian f32 data.
/// Manifest "tensors" entries are {name, dtype: "f32", shape, offset, nbytes} with
/// offsets counted from the start of the data section. Every other manifest key
/// (preprocess, layer tables, ...) is kept in `metadata`.
class WeightsBundle {
 public:
  static constexpr char kMagic[4] = {'A', 'D', 'W', 'B'};
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kAlignment = 64;

  std::vector<BundleTensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  void add(std::string name, std::vector<std::int64_t> shape, std::vector<float> data);
  const BundleTensor* find(std::string_view name) const;

  /// Manifest as written: metadata plus the tensor table.
  nlohmann::json manifest() const;

  std::string to_bytes() const;
  /// Parses and checks every invariant; violations throw FormatError naming the field.
  static WeightsBundle from_bytes(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static WeightsBundle load(const std::filesystem::path& path);
};

WeightsBundle bundle_from_model(const StyleTransferModel& model);
StyleTransferModel model_from_bundle(const WeightsBundle& bundle);

/// Encoder half of a bundle; decoder tensors, if any, are ignored.
std::shared_ptr<const Encoder> encoder_from_bundle(const WeightsBundle& bundle);
/// "tiny" / "reference" (random, from `seed`) or a bundle path.
std::shared_ptr<const Encoder> load_encoder(const std::string& spec, std::uint64_t seed = 0);

/// "tiny" and "reference" build fresh models from `seed`; anything else is a bundle path.
StyleTransferModel load_model(const std::string& spec, std::uint64_t seed = 0);
void save_model(const StyleTransferModel& model, const std::filesystem::path& path);

nlohmann::json layers_to_json(const std::vector<LayerSpec>& layers);
std::vector<LayerSpec> layers_from_json(const nlohmann::json& j);

}  // namespace adain
