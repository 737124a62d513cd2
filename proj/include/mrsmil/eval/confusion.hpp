#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

#include "mrsmil/errors.hpp"

namespace mrsmil::eval {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// A metric that may be undefined; `value` is NaN when `defined` is false.
struct Score {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
};

/// Score >= threshold predicts the positive (tumor) class.
inline ConfusionCounts confusion_at_threshold(std::span<const double> scores, std::span<const int> labels,
                                              double threshold = 0.5) {
  if (scores.size() != labels.size()) {
    throw ArgumentError("confusion: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// 2TP / (2TP + FP + FN); undefined when the denominator is zero.
inline Score f1_score(const ConfusionCounts& c) {
  const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
  if (denom == 0.0) return {};
  return {2.0 * static_cast<double>(c.tp) / denom, true};
}

/// Matthews correlation coefficient. A zero factor in the denominator
/// (some row or column of the confusion matrix empty) yields 0.
inline double mcc(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn);
  const double fn = static_cast<double>(c.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

}  // namespace mrsmil::eval
