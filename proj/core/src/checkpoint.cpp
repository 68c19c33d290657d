#include "scd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

namespace scd {

namespace {
constexpr char kMagic[4] = {'P', 'G', 'C', 'N'};
constexpr uint16_t kVersion = 1;
}  // namespace

void TensorStore::put(const std::string& name, Tensor<float> t) {
  if (name.empty()) throw UsageError("tensor name must be non-empty");
  if (index_.count(name)) throw UsageError("duplicate tensor '" + name + "' in checkpoint");
  order_.push_back(name);
  index_.emplace(name, std::move(t));
}

const Tensor<float>& TensorStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
  return it->second;
}

void TensorStore::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json header;
  header["meta"] = meta.empty() ? nlohmann::ordered_json::object()
                                : nlohmann::ordered_json::parse(meta);
  auto tensors = nlohmann::ordered_json::array();
  uint64_t offset = 0;
  for (const auto& name : order_) {
    const Tensor<float>& t = index_.at(name);
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    tensors.push_back(std::move(entry));
    offset += uint64_t(t.numel()) * sizeof(float);
  }
  header["tensors"] = std::move(tensors);
  std::string hstr = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(kMagic, 4);
  uint16_t ver = kVersion;
  f.write(reinterpret_cast<const char*>(&ver), sizeof ver);
  uint32_t hlen = uint32_t(hstr.size());
  f.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  f.write(hstr.data(), std::streamsize(hstr.size()));
  for (const auto& name : order_) {
    const Tensor<float>& t = index_.at(name);
    f.write(reinterpret_cast<const char*>(t.data()),
            std::streamsize(size_t(t.numel()) * sizeof(float)));
  }
  if (!f.flush()) throw IoError("write failure on " + path.string());
}

TensorStore TensorStore::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  uint16_t ver = 0;
  uint32_t hlen = 0;
  if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(path.string() + ": not a PGCN checkpoint");
  if (!f.read(reinterpret_cast<char*>(&ver), sizeof ver) || ver != kVersion)
    throw DataError(path.string() + ": unsupported checkpoint version");
  if (!f.read(reinterpret_cast<char*>(&hlen), sizeof hlen))
    throw DataError(path.string() + ": truncated header");
  std::string hstr(hlen, '\0');
  if (!f.read(hstr.data(), hlen)) throw DataError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hstr);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }
  TensorStore store;
  if (header.contains("meta")) store.meta = header["meta"].dump();
  if (!header.contains("tensors") || !header["tensors"].is_array())
    throw DataError(path.string() + ": checkpoint header lacks tensor table");
  for (const auto& entry : header["tensors"]) {
    std::string name = entry.at("name").get<std::string>();
    std::vector<int64_t> shape = entry.at("shape").get<std::vector<int64_t>>();
    Tensor<float> t(shape);
    if (!f.read(reinterpret_cast<char*>(t.data()),
                std::streamsize(size_t(t.numel()) * sizeof(float))))
      throw DataError(path.string() + ": truncated tensor data for '" + name + "'");
    store.put(name, std::move(t));
  }
  return store;
}

namespace nn {

LayerKind layer_kind_from_string(const std::string& s) {
  for (LayerKind k : {LayerKind::Conv2D, LayerKind::ReLU, LayerKind::MaxPool,
                      LayerKind::GlobalAvgPool, LayerKind::Dense, LayerKind::Dropout,
                      LayerKind::Softmax})
    if (s == to_string(k)) return k;
  throw DataError("unknown layer kind '" + s + "'");
}

}  // namespace nn

void store_params(TensorStore& store, const std::string& prefix, nn::Model<float>& model) {
  for (auto& p : model.params()) store.put(prefix + p.name, *p.value);
}

void load_params(const TensorStore& store, const std::string& prefix, nn::Model<float>& model) {
  for (auto& p : model.params()) {
    const Tensor<float>& t = store.get(prefix + p.name);
    if (!t.same_shape(*p.value))
      throw ShapeError("checkpoint tensor '" + prefix + p.name + "' has shape " + t.shape_str() +
                       ", model expects " + p.value->shape_str());
    *p.value = t;
  }
}

}  // namespace scd
