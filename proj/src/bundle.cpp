#include "adain/bundle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace adain {

static_assert(std::endian::native == std::endian::little, "bundle I/O assumes a little-endian host");

using nlohmann::json;

std::int64_t BundleTensor::element_count() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

void WeightsBundle::add(std::string name, std::vector<std::int64_t> shape, std::vector<float> data) {
  BundleTensor t{std::move(name), std::move(shape), std::move(data)};
  if (t.element_count() != static_cast<std::int64_t>(t.data.size())) {
    throw FormatError("shape", "tensor " + t.name + " shape does not match its data length");
  }
  if (find(t.name)) throw FormatError("name", "duplicate tensor name " + t.name);
  tensors.push_back(std::move(t));
}

const BundleTensor* WeightsBundle::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

json WeightsBundle::manifest() const {
  json m = metadata;
  json table = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    const std::uint64_t nbytes = t.data.size() * sizeof(float);
    table.push_back({{"name", t.name}, {"dtype", "f32"}, {"shape", t.shape}, {"offset", offset},
                     {"nbytes", nbytes}});
    offset += nbytes;
  }
  m["tensors"] = std::move(table);
  return m;
}

namespace {

std::size_t padded(std::size_t n) {
  return (n + WeightsBundle::kAlignment - 1) / WeightsBundle::kAlignment * WeightsBundle::kAlignment;
}

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(std::string_view bytes, std::size_t at) {
  T v;
  std::memcpy(&v, bytes.data() + at, sizeof(T));
  return v;
}

}  // namespace

std::string WeightsBundle::to_bytes() const {
  const std::string text = manifest().dump();
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out.resize(padded(out.size()), '\0');
  for (const auto& t : tensors) {
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  return out;
}

WeightsBundle WeightsBundle::from_bytes(std::string_view bytes) {
  constexpr std::size_t header = 16;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("magic", "not a weights bundle (bad magic)");
  }
  if (bytes.size() < header) throw FormatError("truncated", "file ends inside the header");
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kVersion) {
    throw FormatError("version", "unsupported bundle version " + std::to_string(version));
  }
  const auto manifest_length = get<std::uint64_t>(bytes, 8);
  if (manifest_length > bytes.size() - header) {
    throw FormatError("truncated", "file ends inside the manifest");
  }
  const std::string_view text = bytes.substr(header, manifest_length);
  const std::size_t data_start = padded(header + manifest_length);
  if (data_start > bytes.size()) throw FormatError("truncated", "file ends inside the padding");
  for (std::size_t i = header + manifest_length; i < data_start; ++i) {
    if (bytes[i] != '\0') throw FormatError("padding", "non-zero byte in manifest padding");
  }

  json m;
  try {
    m = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("manifest", std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!m.is_object() || !m.contains("tensors") || !m["tensors"].is_array()) {
    throw FormatError("tensors", "manifest needs a \"tensors\" array");
  }

  struct Span {
    std::uint64_t offset, nbytes;
    std::size_t index;
  };
  std::vector<Span> spans;
  WeightsBundle b;
  const std::uint64_t data_size = bytes.size() - data_start;
  for (const auto& e : m["tensors"]) {
    if (!e.is_object()) throw FormatError("tensors", "tensor entry is not an object");
    auto field = [&](const char* key) -> const json& {
      if (!e.contains(key)) throw FormatError(key, std::string("tensor entry lacks \"") + key + "\"");
      return e[key];
    };
    if (!field("name").is_string() || field("name").get<std::string>().empty()) {
      throw FormatError("name", "tensor name must be a non-empty string");
    }
    const auto name = e["name"].get<std::string>();
    if (b.find(name)) throw FormatError("name", "duplicate tensor name " + name);
    if (field("dtype") != "f32") throw FormatError("dtype", name + ": dtype must be f32");
    const auto& shape_j = field("shape");
    if (!shape_j.is_array()) throw FormatError("shape", name + ": shape must be an array");
    std::vector<std::int64_t> shape;
    for (const auto& d : shape_j) {
      if (!d.is_number_integer() || d.get<std::int64_t>() < 0) {
        throw FormatError("shape", name + ": dimensions must be non-negative integers");
      }
      shape.push_back(d.get<std::int64_t>());
    }
    if (!field("offset").is_number_unsigned() || !field("nbytes").is_number_unsigned()) {
      throw FormatError("offset", name + ": offset and nbytes must be unsigned integers");
    }
    const auto offset = e["offset"].get<std::uint64_t>();
    const auto nbytes = e["nbytes"].get<std::uint64_t>();
    BundleTensor t{name, shape, {}};
    if (static_cast<std::uint64_t>(t.element_count()) * sizeof(float) != nbytes) {
      throw FormatError("nbytes", name + ": nbytes " + std::to_string(nbytes) +
                                      " does not match the shape's element count");
    }
    if (offset % sizeof(float) != 0) throw FormatError("offset", name + ": offset not 4-byte aligned");
    if (offset > data_size || nbytes > data_size - offset) {
      throw FormatError("truncated", name + ": data extends past the end of the file");
    }
    t.data.resize(static_cast<std::size_t>(nbytes / sizeof(float)));
    std::memcpy(t.data.data(), bytes.data() + data_start + offset, nbytes);
    spans.push_back({offset, nbytes, b.tensors.size()});
    b.tensors.push_back(std::move(t));
  }

  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& c) { return a.offset < c.offset; });
  std::uint64_t end = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (i > 0 && spans[i].offset < end) {
      throw FormatError("overlap", b.tensors[spans[i].index].name + " overlaps another tensor");
    }
    end = std::max(end, spans[i].offset + spans[i].nbytes);
  }
  if (end != data_size) {
    throw FormatError("trailing", std::to_string(data_size - end) + " unreferenced bytes after tensor data");
  }

  m.erase("tensors");
  b.metadata = std::move(m);
  return b;
}

void WeightsBundle::save(const std::filesystem::path& path) const {
  const auto bytes = to_bytes();
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

WeightsBundle WeightsBundle::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_bytes(ss.str());
}

// ---------------------------------------------------------------------------

json layers_to_json(const std::vector<LayerSpec>& layers) {
  json out = json::array();
  for (const auto& l : layers) {
    json j = {{"type", to_string(l.kind)}};
    switch (l.kind) {
      case LayerKind::Conv:
        j["name"] = l.name;
        j["in"] = l.in_channels;
        j["out"] = l.out_channels;
        j["kernel"] = l.kernel;
        break;
      case LayerKind::Relu:
        j["name"] = l.name;
        if (l.tap) j["tap"] = true;
        break;
      case LayerKind::MaxPool:
        j["kernel"] = l.kernel;
        j["stride"] = l.factor;
        break;
      case LayerKind::Upsample:
        j["factor"] = l.factor;
        break;
      case LayerKind::InstanceNorm:
      case LayerKind::BatchNorm:
        j["name"] = l.name;
        j["channels"] = l.out_channels;
        break;
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<LayerSpec> layers_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("layers", "layer table must be an array");
  std::vector<LayerSpec> out;
  try {
    for (const auto& e : j) {
      const auto kind = parse_layer_kind(e.at("type").get<std::string>());
      switch (kind) {
        case LayerKind::Conv:
          out.push_back(LayerSpec::conv(e.at("name"), e.at("in"), e.at("out"), e.value("kernel", 3)));
          break;
        case LayerKind::Relu:
          out.push_back(LayerSpec::relu(e.value("name", ""), e.value("tap", false)));
          break;
        case LayerKind::MaxPool:
          out.push_back(LayerSpec::pool(e.value("kernel", 2), e.value("stride", 2)));
          break;
        case LayerKind::Upsample:
          out.push_back(LayerSpec::upsample(e.value("factor", 2)));
          break;
        case LayerKind::InstanceNorm:
        case LayerKind::BatchNorm:
          out.push_back(LayerSpec::norm(kind, e.at("name"), e.at("channels")));
          break;
      }
    }
  } catch (const json::exception& e) {
    throw FormatError("layers", std::string("malformed layer entry: ") + e.what());
  }
  return out;
}

namespace {

std::vector<std::int64_t> file_shape(const Tensorf& t) {
  const auto& s = t.shape();
  if (s.n == 1 && s.h == 1 && s.w == 1) return {s.c};
  return {s.n, s.c, s.h, s.w};
}

Tensorf from_file_shape(const BundleTensor& t) {
  Shape s;
  if (t.shape.size() == 1) {
    s = {1, t.shape[0], 1, 1};
  } else if (t.shape.size() == 4) {
    s = {t.shape[0], t.shape[1], t.shape[2], t.shape[3]};
  } else {
    throw FormatError("shape", t.name + ": model tensors must be rank 1 or 4");
  }
  return Tensorf(s, Eigen::Map<const Tensorf::Array>(t.data.data(), static_cast<Index>(t.data.size())));
}

void add_state(WeightsBundle& b, const Sequential& net) {
  for (const auto& [name, t] : net.state()) {
    b.add(name, file_shape(t), std::vector<float>(t.data(), t.data() + t.size()));
  }
}

std::vector<std::pair<std::string, Tensorf>> state_with_prefix(const WeightsBundle& b,
                                                               const std::string& prefix) {
  std::vector<std::pair<std::string, Tensorf>> out;
  for (const auto& t : b.tensors)
    if (t.name.rfind(prefix + ".", 0) == 0) out.emplace_back(t.name, from_file_shape(t));
  return out;
}

}  // namespace

WeightsBundle bundle_from_model(const StyleTransferModel& model) {
  WeightsBundle b;
  const auto& pre = model.encoder().preprocess();
  b.metadata["preprocess"] = {{"mean", pre.mean}, {"std", pre.std}, {"order", pre.order},
                              {"scale", pre.scale}};
  b.metadata["encoder"] = {{"layers", layers_to_json(model.encoder().network().layers())}};
  b.metadata["decoder"] = {{"layers", layers_to_json(model.decoder().layers())}};
  b.metadata["fusion"] = to_string(model.fusion());
  b.metadata["eps"] = model.eps();
  add_state(b, model.encoder().network());
  add_state(b, model.decoder());
  return b;
}

namespace {

Preprocess preprocess_from_json(const json& m) {
  if (!m.contains("preprocess")) throw FormatError("preprocess", "manifest lacks \"preprocess\"");
  Preprocess pre;
  try {
    const auto& p = m["preprocess"];
    pre.mean = p.at("mean").get<std::array<float, 3>>();
    pre.std = p.at("std").get<std::array<float, 3>>();
    pre.order = p.value("order", std::string("RGB"));
    pre.scale = p.value("scale", 1.f);
  } catch (const json::exception& e) {
    throw FormatError("preprocess", std::string("malformed preprocess block: ") + e.what());
  }
  return pre;
}

std::shared_ptr<Encoder> build_encoder(const WeightsBundle& b) {
  const auto& m = b.metadata;
  if (!m.contains("encoder")) throw FormatError("encoder", "manifest lacks \"encoder\"");
  const auto pre = preprocess_from_json(m);
  try {
    auto encoder = std::make_shared<Encoder>(layers_from_json(m["encoder"].at("layers")), pre);
    encoder->mutable_network().load_state(state_with_prefix(b, "encoder"));
    return encoder;
  } catch (const ConfigError& e) {
    throw FormatError(e.field(), e.what());
  } catch (const json::exception& e) {
    throw FormatError("encoder", e.what());
  }
}

}  // namespace

std::shared_ptr<const Encoder> encoder_from_bundle(const WeightsBundle& b) { return build_encoder(b); }

std::shared_ptr<const Encoder> load_encoder(const std::string& spec, std::uint64_t seed) {
  if (spec == "tiny") return make_tiny_encoder(seed);
  if (spec == "reference") return make_reference_encoder(seed);
  return encoder_from_bundle(WeightsBundle::load(spec));
}

StyleTransferModel model_from_bundle(const WeightsBundle& b) {
  const auto& m = b.metadata;
  auto encoder = build_encoder(b);
  if (!m.contains("decoder")) throw FormatError("decoder", "manifest lacks \"decoder\"");
  try {
    Sequential decoder("decoder", layers_from_json(m["decoder"].at("layers")));
    decoder.load_state(state_with_prefix(b, "decoder"));
    for (const auto& t : b.tensors) {
      if (t.name.rfind("encoder.", 0) != 0 && t.name.rfind("decoder.", 0) != 0) {
        throw FormatError("tensors", "tensor " + t.name + " belongs to neither encoder nor decoder");
      }
    }
    const auto fusion = parse_fusion(m.value("fusion", std::string("adain")));
    const float eps = m.value("eps", static_cast<float>(kDefaultEps));
    return StyleTransferModel(std::move(encoder), std::move(decoder), fusion, eps);
  } catch (const ConfigError& e) {
    throw FormatError(e.field(), e.what());
  } catch (const json::exception& e) {
    throw FormatError("manifest", e.what());
  }
}

StyleTransferModel load_model(const std::string& spec, std::uint64_t seed) {
  if (spec == "tiny") return make_tiny_model(seed);
  if (spec == "reference") return make_reference_model(seed);
  return model_from_bundle(WeightsBundle::load(spec));
}

void save_model(const StyleTransferModel& model, const std::filesystem::path& path) {
  bundle_from_model(model).save(path);
}

}  // namespace adain
