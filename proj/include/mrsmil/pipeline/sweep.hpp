#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/errors.hpp"
#include "mrsmil/eval/summary.hpp"
#include "mrsmil/pipeline/cross_validation.hpp"
#include "mrsmil/pipeline/run_config.hpp"

namespace mrsmil::pipeline {

struct SweepRow {
  std::size_t bag_size = 0;
  eval::MeanStd bag_auc;
  eval::MeanStd patient_auc;
};

/// Cross-validates `run` once per bag size. Everything except the bag size
/// is taken from `run`.
inline std::vector<SweepRow> sweep_bag_sizes(std::span<const data::PatientRecord> patients, const RunConfig& run,
                                             const std::vector<std::size_t>& sizes,
                                             const std::function<void(const SweepRow&)>& on_row = {}) {
  if (sizes.empty()) throw ArgumentError("sweep: empty bag-size list");
  for (std::size_t m : sizes) {
    if (m == 0) throw ArgumentError("sweep: bag sizes must be >= 1");
    if (run.model.aggregator == pooling::AggregatorKind::single_instance && m != 1) {
      throw ConfigError("sweep: the single-instance aggregator only supports bag size 1");
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t m : sizes) {
    RunConfig r = run;
    r.model.bag_size = m;
    const auto cv = cross_validate(patients, r);
    SweepRow row{m, cv.summary.at("bag_auc"), cv.summary.at("patient_auc")};
    if (on_row) on_row(row);
    rows.push_back(row);
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "bag_size,bag_auc_mean,bag_auc_std,patient_auc_mean,patient_auc_std\n";
  for (const auto& r : rows) {
    out += std::to_string(r.bag_size);
    for (double v : {r.bag_auc.mean, r.bag_auc.stddev, r.patient_auc.mean, r.patient_auc.stddev}) {
      out += "," + nlohmann::json(v).dump();
    }
    out += "\n";
  }
  return out;
}

/// 1, 1 + step, ..., up to `last` inclusive.
inline std::vector<std::size_t> bag_size_range(std::size_t first, std::size_t last, std::size_t step) {
  if (first == 0 || step == 0 || last < first) throw ArgumentError("invalid bag-size range");
  std::vector<std::size_t> out;
  for (std::size_t m = first; m <= last; m += step) out.push_back(m);
  return out;
}

}  // namespace mrsmil::pipeline
