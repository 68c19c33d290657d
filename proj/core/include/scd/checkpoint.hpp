#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "scd/nn.hpp"
#include "scd/tensor.hpp"

namespace scd {

// Named-tensor container behind the checkpoint file format:
//   magic "PGCN" | u16 version | u32 header length | UTF-8 JSON header |
//   raw little-endian f32 data, tensors in header order.
// The header carries shapes, per-tensor data offsets, and a free-form JSON
// object (`meta`) for everything that is not a tensor.
class TensorStore {
 public:
  void put(const std::string& name, Tensor<float> t);
  const Tensor<float>& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }

  // JSON object text; empty means {}.
  std::string meta;

  void save(const std::filesystem::path& path) const;
  static TensorStore load(const std::filesystem::path& path);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor<float>> index_;
};

// Copies every model parameter into / out of a store under `prefix` + the
// model's own parameter names ("conv0.w", ...). Loading shape-checks against
// the already-built model.
void store_params(TensorStore& store, const std::string& prefix, nn::Model<float>& model);
void load_params(const TensorStore& store, const std::string& prefix, nn::Model<float>& model);

}  // namespace scd
