#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "mrsmil/errors.hpp"
#include "mrsmil/models/config.hpp"

namespace mrsmil::pipeline {

struct RunConfig {
  std::string data;  // spectra CSV or synthetic-data JSON config
  models::ModelConfig model;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t folds = 5;
  std::size_t da_factor = 3;  // 0 disables augmentation
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t jobs = 1;  // folds trained concurrently; does not affect results

  std::size_t bag_size() const noexcept { return model.bag_size; }

  void validate() const {
    model.validate();
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (folds < 2) throw ConfigError("need at least 2 folds");
    if (jobs == 0) throw ConfigError("jobs must be >= 1");
  }
};

/// Everything that influences results; output paths and job count are left out
/// so reruns into different directories produce identical reports.
inline void to_json(nlohmann::json& j, const RunConfig& r) {
  j = nlohmann::json{{"data", r.data},
                     {"model", r.model},
                     {"epochs", r.epochs},
                     {"batch_size", r.batch_size},
                     {"learning_rate", r.learning_rate},
                     {"folds", r.folds},
                     {"da_factor", r.da_factor},
                     {"seed", r.seed}};
}

inline void from_json(const nlohmann::json& j, RunConfig& r) {
  r.data = j.at("data").get<std::string>();
  r.model = j.at("model").get<models::ModelConfig>();
  r.epochs = j.at("epochs").get<std::size_t>();
  r.batch_size = j.at("batch_size").get<std::size_t>();
  r.learning_rate = j.at("learning_rate").get<double>();
  r.folds = j.at("folds").get<std::size_t>();
  r.da_factor = j.at("da_factor").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace mrsmil::pipeline
