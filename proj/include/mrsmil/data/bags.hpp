#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrsmil/data/rng.hpp"
#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/errors.hpp"
#include "mrsmil/nn/tensor.hpp"
#include "mrsmil/pooling/aggregator.hpp"

namespace mrsmil::data {

/// M spectra of one patient, referenced by their index in the patient's
/// spectrum list (`provenance`). Rows are materialized on demand.
struct Bag {
  std::size_t patient_index = 0;
  std::string patient_id;
  Label label = Label::non_tumor;
  std::vector<std::size_t> provenance;

  std::size_t size() const noexcept { return provenance.size(); }
};

/// Number of test-time bags for a patient with `n_spectra` spectra.
inline std::size_t test_bag_count(std::size_t n_spectra, std::size_t bag_size) {
  if (bag_size == 0) throw ArgumentError("bag size must be >= 1");
  if (n_spectra <= bag_size) return 1;
  return (n_spectra + bag_size - 1) / bag_size;
}

namespace detail {
inline Bag empty_bag(const PatientRecord& patient, std::size_t patient_index) {
  if (patient.spectra.empty()) {
    throw ArgumentError("patient '" + patient.patient_id + "' has no spectra");
  }
  Bag bag;
  bag.patient_index = patient_index;
  bag.patient_id = patient.patient_id;
  bag.label = patient.label;
  return bag;
}
}  // namespace detail

/// Test-time bags: spectra are taken in order without replacement; the last
/// bag is filled up by cycling through the patient's spectra from the start.
inline std::vector<Bag> generate_test_bags(const PatientRecord& patient, std::size_t patient_index,
                                           std::size_t bag_size) {
  const Bag proto = detail::empty_bag(patient, patient_index);
  const std::size_t n = patient.spectra.size();
  const std::size_t count = test_bag_count(n, bag_size);
  std::vector<Bag> bags(count, proto);
  std::size_t next = 0;
  std::size_t pad = 0;
  for (auto& bag : bags) {
    bag.provenance.reserve(bag_size);
    while (bag.provenance.size() < bag_size) {
      if (next < n) {
        bag.provenance.push_back(next++);
      } else {
        bag.provenance.push_back(pad);
        pad = (pad + 1) % n;
      }
    }
  }
  return bags;
}

/// Training bags. With da_factor >= 1, da_factor * N_p bags whose rows are
/// drawn uniformly with replacement; with da_factor == 0 the minimal
/// test-style bag set.
inline std::vector<Bag> generate_train_bags(const PatientRecord& patient, std::size_t patient_index,
                                            std::size_t bag_size, std::size_t da_factor, Rng& rng) {
  if (bag_size == 0) throw ArgumentError("bag size must be >= 1");
  if (da_factor == 0) return generate_test_bags(patient, patient_index, bag_size);
  const Bag proto = detail::empty_bag(patient, patient_index);
  const std::size_t n = patient.spectra.size();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<Bag> bags(da_factor * n, proto);
  for (auto& bag : bags) {
    bag.provenance.resize(bag_size);
    for (auto& idx : bag.provenance) idx = pick(rng);
  }
  return bags;
}

/// Rows of a bag as an [M x 288] tensor.
inline nn::Tensor materialize(const Bag& bag, std::span<const PatientRecord> patients) {
  const auto& patient = patients[bag.patient_index];
  nn::Tensor out({bag.size(), kSpectrumLength});
  for (std::size_t k = 0; k < bag.size(); ++k) {
    const auto& v = patient.spectra.at(bag.provenance[k]).values;
    std::copy(v.begin(), v.end(), out.data() + k * kSpectrumLength);
  }
  return out;
}

/// Several bags packed for one model call. Each distinct spectrum appears
/// once in `instances`; `layout` maps bag slots to those rows.
struct BagBatch {
  nn::Tensor instances;
  pooling::BagLayout layout;
  std::vector<int> labels;
};

inline BagBatch make_batch(std::span<const Bag> bags, std::span<const std::size_t> which,
                           std::span<const PatientRecord> patients) {
  BagBatch batch;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> row_of;
  std::vector<std::pair<std::size_t, std::size_t>> order;
  batch.layout.bags.reserve(which.size());
  for (std::size_t w : which) {
    const Bag& bag = bags[w];
    std::vector<std::size_t> rows;
    rows.reserve(bag.size());
    for (std::size_t idx : bag.provenance) {
      const auto key = std::make_pair(bag.patient_index, idx);
      auto [it, inserted] = row_of.emplace(key, order.size());
      if (inserted) order.push_back(key);
      rows.push_back(it->second);
    }
    batch.layout.bags.push_back(std::move(rows));
    batch.labels.push_back(class_id(bag.label));
  }
  batch.instances = nn::Tensor({order.size(), kSpectrumLength});
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& v = patients[order[r].first].spectra.at(order[r].second).values;
    std::copy(v.begin(), v.end(), batch.instances.data() + r * kSpectrumLength);
  }
  return batch;
}

inline BagBatch make_batch(std::span<const Bag> bags, std::span<const PatientRecord> patients) {
  std::vector<std::size_t> all(bags.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(bags, all, patients);
}

struct BagSplit {
  std::vector<Bag> train;
  std::vector<Bag> validation;
};

/// Shuffles the generated bags and splits them 4:1 into train/validation.
inline BagSplit split_train_validation(std::vector<Bag> bags, Rng& rng) {
  std::shuffle(bags.begin(), bags.end(), rng);
  const std::size_t n_train = (bags.size() * 4 + 2) / 5;
  BagSplit split;
  split.train.assign(std::make_move_iterator(bags.begin()),
                     std::make_move_iterator(bags.begin() + static_cast<std::ptrdiff_t>(n_train)));
  split.validation.assign(std::make_move_iterator(bags.begin() + static_cast<std::ptrdiff_t>(n_train)),
                          std::make_move_iterator(bags.end()));
  return split;
}

}  // namespace mrsmil::data
