#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mrsmil/errors.hpp"
#include "mrsmil/pooling/aggregator.hpp"

namespace mrsmil::models {

enum class Architecture { mlp, hatami, inception };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::mlp: return "mlp";
    case Architecture::hatami: return "hatami";
    case Architecture::inception: return "inception";
  }
  return "?";
}

inline Architecture parse_architecture(std::string_view s) {
  if (s == "mlp") return Architecture::mlp;
  if (s == "hatami") return Architecture::hatami;
  if (s == "inception") return Architecture::inception;
  throw ConfigError("unknown architecture '" + std::string(s) + "'");
}

struct ModelConfig {
  Architecture architecture = Architecture::mlp;
  pooling::AggregatorKind aggregator = pooling::AggregatorKind::three_pool;
  std::size_t bag_size = 31;
  std::size_t n_att = 8;
  std::uint64_t seed = 0;

  void validate() const {
    if (bag_size == 0) throw ConfigError("bag size must be >= 1");
    if (n_att == 0) throw ConfigError("n_att must be >= 1");
    if (aggregator == pooling::AggregatorKind::single_instance && bag_size != 1) {
      throw ConfigError("single-instance models require bag size 1, got " +
                        std::to_string(bag_size));
    }
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"architecture", to_string(c.architecture)},
                     {"aggregator", pooling::to_string(c.aggregator)},
                     {"bag_size", c.bag_size},
                     {"n_att", c.n_att},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.architecture = parse_architecture(j.at("architecture").get<std::string>());
  c.aggregator = pooling::parse_aggregator(j.at("aggregator").get<std::string>());
  c.bag_size = j.at("bag_size").get<std::size_t>();
  c.n_att = j.at("n_att").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace mrsmil::models
