#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrsmil/errors.hpp"
#include "mrsmil/models/builders.hpp"
#include "mrsmil/models/model.hpp"

namespace mrsmil::models {

// Checkpoint file layout (all integers little-endian):
//
//   bytes 0..7    magic "MRSMILCK"
//   bytes 8..11   u32 format version (1)
//   bytes 12..19  u64 length H of the JSON header
//   next H bytes  UTF-8 JSON: {"config": ModelConfig,
//                              "parameters": [{"name", "shape", "offset", "count"}],
//                              "total": N, "metadata": {...}}
//   next 8N bytes IEEE-754 f64 parameter values, little-endian, at the
//                 element offsets listed in the header
//
// Loading rebuilds the model from "config" and checks every shape.

inline constexpr char kCheckpointMagic[8] = {'M', 'R', 'S', 'M', 'I', 'L', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  if (offset + sizeof(T) > in.size()) throw ArgumentError("checkpoint: truncated file");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Model& model, const nlohmann::json& metadata = nlohmann::json::object()) {
  const auto params = model.parameters();
  const auto names = model.parameter_names();
  nlohmann::json header;
  header["config"] = model.config();
  header["parameters"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    header["parameters"].push_back({{"name", names[i]},
                                    {"shape", params[i]->value.shape()},
                                    {"offset", offset},
                                    {"count", params[i]->size()}});
    offset += params[i]->size();
  }
  header["total"] = offset;
  header["metadata"] = metadata;
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + 8 * offset);
  for (const auto* p : params) {
    for (double v : p->value.values()) detail::put_le<double>(out, v);
  }
  return out;
}

struct LoadedCheckpoint {
  Model model;
  nlohmann::json metadata;
};

inline LoadedCheckpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw ArgumentError("checkpoint: bad magic");
  }
  const auto version = detail::get_le<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion) {
    throw ArgumentError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = detail::get_le<std::uint64_t>(bytes, 12);
  if (20 + header_len > bytes.size()) throw ArgumentError("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(bytes.begin() + 20, bytes.begin() + 20 + static_cast<std::ptrdiff_t>(header_len));

  Model model = build_model(header.at("config").get<ModelConfig>());
  auto params = model.parameters();
  const auto& entries = header.at("parameters");
  if (entries.size() != params.size()) {
    throw ArgumentError("checkpoint: expected " + std::to_string(params.size()) + " parameter tensors, found " +
                        std::to_string(entries.size()));
  }
  const std::size_t blob = 20 + header_len;
  const std::size_t total = header.at("total").get<std::size_t>();
  if (blob + 8 * total != bytes.size()) throw ArgumentError("checkpoint: parameter blob size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto shape = entries[i].at("shape").get<nn::Shape>();
    if (shape != params[i]->value.shape()) {
      throw DimensionError("checkpoint: parameter " + entries[i].at("name").get<std::string>() + " has shape " +
                           nn::to_string(shape) + ", model expects " + nn::to_string(params[i]->value.shape()));
    }
    const std::size_t offset = entries[i].at("offset").get<std::size_t>();
    auto values = params[i]->value.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      values[k] = detail::get_le<double>(bytes, blob + 8 * (offset + k));
    }
  }
  return {std::move(model), header.value("metadata", nlohmann::json::object())};
}

inline void save_checkpoint(const std::string& path, const Model& model,
                            const nlohmann::json& metadata = nlohmann::json::object()) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("cannot open '" + path + "' for writing");
  const auto bytes = serialize_checkpoint(model, metadata);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("failed writing '" + path + "'");
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace mrsmil::models
