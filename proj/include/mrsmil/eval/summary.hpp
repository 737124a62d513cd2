#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mrsmil/errors.hpp"

namespace mrsmil::eval {

/// Patient-level score: mean of the patient's bag tumor probabilities.
inline double patient_score(std::span<const double> bag_probabilities) {
  if (bag_probabilities.empty()) throw ArgumentError("patient_score: patient has no bags");
  double sum = 0.0;
  for (double p : bag_probabilities) sum += p;
  return sum / static_cast<double>(bag_probabilities.size());
}

/// Test-set metrics of one cross-validation fold. F1/MCC are taken at a 0.5
/// threshold; an undefined F1 is stored as NaN.
struct FoldReport {
  double bag_auc = 0.0;
  double patient_auc = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
  double patient_f1 = 0.0;
  double patient_mcc = 0.0;

  std::map<std::string, double> metrics() const {
    return {{"bag_auc", bag_auc}, {"patient_auc", patient_auc}, {"f1", f1},
            {"mcc", mcc},         {"patient_f1", patient_f1},   {"patient_mcc", patient_mcc}};
  }
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1)
  std::size_t n = 0;
};

inline MeanStd mean_std(std::span<const double> values) {
  if (values.size() < 2) throw ArgumentError("mean_std: need at least 2 values");
  MeanStd m;
  m.n = values.size();
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(m.n);
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.stddev = std::sqrt(ss / static_cast<double>(m.n - 1));
  return m;
}

using AggregateSummary = std::map<std::string, MeanStd>;

/// Per-metric mean and sample standard deviation over folds.
inline AggregateSummary aggregate_folds(std::span<const FoldReport> reports) {
  if (reports.size() < 2) throw ArgumentError("aggregate_folds: need at least 2 folds");
  std::map<std::string, std::vector<double>> columns;
  for (const auto& r : reports) {
    for (const auto& [name, value] : r.metrics()) columns[name].push_back(value);
  }
  AggregateSummary out;
  for (const auto& [name, values] : columns) out[name] = mean_std(values);
  return out;
}

struct TTestResult {
  double statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;  // two-sided
};

/// Paired two-sided Student t-test on per-fold (or per-seed) values.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ArgumentError("paired t-test: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + " values");
  }
  if (a.size() < 2) throw ArgumentError("paired t-test: need at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const auto m = mean_std(d);
  TTestResult r;
  r.degrees_of_freedom = static_cast<double>(d.size() - 1);
  if (m.stddev == 0.0) {
    if (m.mean == 0.0) return r;
    r.statistic = std::copysign(std::numeric_limits<double>::infinity(), m.mean);
    r.p_value = 0.0;
    return r;
  }
  r.statistic = m.mean / (m.stddev / std::sqrt(static_cast<double>(d.size())));
  boost::math::students_t dist(r.degrees_of_freedom);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic)));
  return r;
}

}  // namespace mrsmil::eval
