#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mrsmil/errors.hpp"
#include "mrsmil/eval/roc.hpp"
#include "mrsmil/eval/summary.hpp"
#include "mrsmil/models/checkpoint.hpp"
#include "mrsmil/pipeline/cross_validation.hpp"
#include "mrsmil/pipeline/run_config.hpp"

namespace mrsmil::pipeline {

// Undefined metrics (NaN) are written as JSON null.
inline nlohmann::json metric_json(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const eval::FoldReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, value] : r.metrics()) j[name] = metric_json(value);
  return j;
}

inline nlohmann::json to_json(const eval::AggregateSummary& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, m] : s) {
    j[name] = {{"mean", metric_json(m.mean)}, {"std", metric_json(m.stddev)}, {"n", m.n}};
  }
  return j;
}

inline nlohmann::json fold_report_json(const FoldResult& fold, const RunConfig& run) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : fold.history) {
    history.push_back({{"epoch", h.epoch},
                       {"train_loss", metric_json(h.train_loss)},
                       {"validation_loss", metric_json(h.validation_loss)},
                       {"validation_auc", metric_json(h.validation_auc)}});
  }
  return {{"run_config", run},
          {"fold", fold.fold},
          {"test_patients", fold.test_patients},
          {"train_patients", fold.train_patients},
          {"train_bags", fold.train_bags},
          {"validation_bags", fold.validation_bags},
          {"best_epoch", fold.best_epoch},
          {"metrics", to_json(fold.report)},
          {"history", history}};
}

inline nlohmann::json aggregate_report_json(const CrossValidationResult& cv, const RunConfig& run) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : cv.folds) folds.push_back(to_json(f.report));
  return {{"run_config", run}, {"folds", folds}, {"summary", to_json(cv.summary)}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline std::string roc_csv(const eval::RocCurve& roc) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : roc.points) {
    nlohmann::json row = {p.fpr, p.tpr};  // shortest round-trip formatting
    out += row[0].dump() + "," + row[1].dump() + "\n";
  }
  return out;
}

/// Writes fold_<i>.json, roc_fold_<i>.csv (bag-level ROC) and
/// checkpoint_fold_<i>.bin into `dir`.
inline void write_fold_outputs(const std::filesystem::path& dir, const FoldResult& fold, const RunConfig& run) {
  const std::string i = std::to_string(fold.fold);
  write_json(dir / ("fold_" + i + ".json"), fold_report_json(fold, run));
  write_text(dir / ("roc_fold_" + i + ".csv"), roc_csv(fold.bag_roc));
  if (fold.model) {
    models::save_checkpoint((dir / ("checkpoint_fold_" + i + ".bin")).string(), *fold.model,
                            {{"run_config", run}, {"fold", fold.fold}, {"best_epoch", fold.best_epoch}});
  }
}

/// Creates `dir` if needed and checks that a file can be created in it.
inline void prepare_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + dir.string() + "'");
  }
  const auto probe = dir / ".mrsmil_write_probe";
  {
    std::ofstream os(probe);
    if (!os) throw ConfigError("output directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace mrsmil::pipeline
