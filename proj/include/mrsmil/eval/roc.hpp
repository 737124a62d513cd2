#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "mrsmil/errors.hpp"

namespace mrsmil::eval {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), non-decreasing
  double auc = 0.0;
};

/// ROC curve by sweeping the threshold over the distinct scores (tied scores
/// move both rates at once) and AUC from midranks (Mann-Whitney U), which
/// counts tied positive/negative pairs as one half.
inline RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ArgumentError("roc: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ArgumentError("roc: labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("AUC is undefined unless both classes are present");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  double rank_sum_pos = 0.0;  // ascending ranks of positives
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      group_pos += static_cast<std::size_t>(labels[order[j]]);
      ++j;
    }
    // descending positions i..j-1 are ascending ranks n-j+1 .. n-i
    const double midrank = (static_cast<double>(n - j + 1) + static_cast<double>(n - i)) / 2.0;
    rank_sum_pos += midrank * static_cast<double>(group_pos);
    tp += group_pos;
    fp += (j - i) - group_pos;
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives)});
    i = j;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  curve.auc = (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
  return curve;
}

inline double auc(std::span<const double> scores, std::span<const int> labels) {
  return roc_curve(scores, labels).auc;
}

/// Trapezoidal area under a curve's points.
inline double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    area += (points[k].fpr - points[k - 1].fpr) * (points[k].tpr + points[k - 1].tpr) / 2.0;
  }
  return area;
}

}  // namespace mrsmil::eval
