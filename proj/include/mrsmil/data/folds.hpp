#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mrsmil/data/rng.hpp"
#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/errors.hpp"

namespace mrsmil::data {

/// Assignment of every patient to exactly one of k folds.
struct FoldPlan {
  std::size_t folds = 0;
  std::vector<std::size_t> fold_of;  // by patient index
  std::map<std::string, std::size_t> by_id;

  /// Indices of the patients held out in `fold` (test side).
  std::vector<std::size_t> test_patients(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
  }

  /// Indices of the patients used for training and validation in `fold`.
  std::vector<std::size_t> train_patients(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] != fold) out.push_back(i);
    }
    return out;
  }
};

/// Shuffles patients with `seed` and deals each label class round-robin into
/// k folds; the deal continues across classes so fold sizes differ by at most one.
inline FoldPlan make_folds(std::span<const PatientRecord> patients, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("need at least 2 folds, got " + std::to_string(k));
  if (patients.size() < k) {
    throw ArgumentError("cannot split " + std::to_string(patients.size()) + " patients into " +
                        std::to_string(k) + " folds");
  }
  FoldPlan plan;
  plan.folds = k;
  plan.fold_of.assign(patients.size(), 0);

  std::set<std::string> seen;
  for (const auto& p : patients) {
    if (!seen.insert(p.patient_id).second) {
      throw ArgumentError("duplicate patient id '" + p.patient_id + "'");
    }
  }

  std::vector<std::size_t> order(patients.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_stream(seed, "folds");
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t deal = 0;
  for (Label label : {Label::non_tumor, Label::tumor}) {
    for (std::size_t idx : order) {
      if (patients[idx].label != label) continue;
      plan.fold_of[idx] = deal % k;
      ++deal;
    }
  }
  for (std::size_t i = 0; i < patients.size(); ++i) plan.by_id[patients[i].patient_id] = plan.fold_of[i];
  return plan;
}

}  // namespace mrsmil::data
