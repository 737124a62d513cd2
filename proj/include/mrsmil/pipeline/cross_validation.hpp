#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mrsmil/data/bags.hpp"
#include "mrsmil/data/folds.hpp"
#include "mrsmil/data/rng.hpp"
#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/errors.hpp"
#include "mrsmil/eval/confusion.hpp"
#include "mrsmil/eval/roc.hpp"
#include "mrsmil/eval/summary.hpp"
#include "mrsmil/models/builders.hpp"
#include "mrsmil/models/model.hpp"
#include "mrsmil/nn/adam.hpp"
#include "mrsmil/nn/loss.hpp"
#include "mrsmil/pipeline/run_config.hpp"

namespace mrsmil::pipeline {

/// Model output for a list of bags.
struct BagScores {
  std::vector<double> tumor_probability;
  std::vector<std::vector<double>> attention;  // empty unless the model uses attention
};

/// Runs the model over `bags` in chunks of `chunk` bags.
inline BagScores score_bags(models::Model& model, std::span<const data::Bag> bags,
                            std::span<const data::PatientRecord> patients, std::size_t chunk = 64) {
  BagScores out;
  out.tumor_probability.reserve(bags.size());
  const bool attention = model.aggregator().kind() == pooling::AggregatorKind::attention;
  std::vector<std::size_t> which;
  for (std::size_t start = 0; start < bags.size(); start += chunk) {
    which.resize(std::min(chunk, bags.size() - start));
    std::iota(which.begin(), which.end(), start);
    const auto batch = data::make_batch(bags, which, patients);
    const auto probs = models::predict_probabilities(model, batch.instances, batch.layout);
    for (std::size_t b = 0; b < which.size(); ++b) out.tumor_probability.push_back(probs[b * 2 + 1]);
    if (attention) {
      auto weights = model.aggregator().last_weights();
      for (auto& w : *weights) out.attention.push_back(std::move(w));
    }
  }
  return out;
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_auc = std::numeric_limits<double>::quiet_NaN();
};

struct TestBagScore {
  std::string patient_id;
  std::size_t bag_index = 0;  // within the patient
  int label = 0;
  double probability = 0.0;
};

struct FoldResult {
  std::size_t fold = 0;
  std::vector<std::string> test_patients;
  std::vector<std::string> train_patient_ids;  // owners of the train/validation bags, sorted
  std::size_t train_patients = 0;
  std::size_t train_bags = 0;
  std::size_t validation_bags = 0;
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  eval::FoldReport report;
  eval::RocCurve bag_roc;
  eval::RocCurve patient_roc;
  std::vector<TestBagScore> test_scores;
  std::optional<models::Model> model;  // parameters of the selected epoch
};

namespace detail {

inline std::vector<std::vector<double>> snapshot(const models::Model& model) {
  std::vector<std::vector<double>> out;
  for (const auto* p : model.parameters()) out.emplace_back(p->value.values().begin(), p->value.values().end());
  return out;
}

inline void restore(models::Model& model, const std::vector<std::vector<double>>& values) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(), params[i]->value.values().begin());
  }
}

inline bool has_both_classes(std::span<const data::Bag> bags) {
  bool pos = false;
  bool neg = false;
  for (const auto& b : bags) (b.label == data::Label::tumor ? pos : neg) = true;
  return pos && neg;
}

inline std::vector<int> labels_of(std::span<const data::Bag> bags) {
  std::vector<int> out;
  out.reserve(bags.size());
  for (const auto& b : bags) out.push_back(data::class_id(b.label));
  return out;
}

inline double mean_log_loss(std::span<const double> probs, std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = labels[i] == 1 ? probs[i] : 1.0 - probs[i];
    loss -= std::log(std::max(p, 1e-300));
  }
  return probs.empty() ? 0.0 : loss / static_cast<double>(probs.size());
}

}  // namespace detail

/// Trains and evaluates one leave-patients-out fold.
///
/// Training patients' bags (augmented when da_factor > 0) are split 4:1 into
/// train/validation; the epoch with the best validation bag AUC is kept
/// (earliest on ties). Held-out patients are scored on test-time bags.
inline FoldResult train_fold(std::span<const data::PatientRecord> patients, const data::FoldPlan& plan,
                             std::size_t fold, const RunConfig& run) {
  run.validate();
  const std::size_t bag_size = run.bag_size();
  FoldResult result;
  result.fold = fold;

  auto bag_rng = data::make_stream(run.seed, "bags", fold);
  std::vector<data::Bag> generated;
  const auto train_ids = plan.train_patients(fold);
  result.train_patients = train_ids.size();
  for (std::size_t idx : train_ids) {
    auto bags = data::generate_train_bags(patients[idx], idx, bag_size, run.da_factor, bag_rng);
    generated.insert(generated.end(), std::make_move_iterator(bags.begin()), std::make_move_iterator(bags.end()));
  }
  auto split_rng = data::make_stream(run.seed, "split", fold);
  auto split = data::split_train_validation(std::move(generated), split_rng);
  if (!detail::has_both_classes(split.train)) {
    throw ConfigError("fold " + std::to_string(fold) + ": training bags do not contain both classes");
  }
  for (const auto* part : {&split.train, &split.validation}) {
    for (const auto& b : *part) result.train_patient_ids.push_back(b.patient_id);
  }
  std::sort(result.train_patient_ids.begin(), result.train_patient_ids.end());
  result.train_patient_ids.erase(std::unique(result.train_patient_ids.begin(), result.train_patient_ids.end()),
                                 result.train_patient_ids.end());
  result.train_bags = split.train.size();
  result.validation_bags = split.validation.size();

  std::vector<data::Bag> test_bags;
  for (std::size_t idx : plan.test_patients(fold)) {
    result.test_patients.push_back(patients[idx].patient_id);
    auto bags = data::generate_test_bags(patients[idx], idx, bag_size);
    test_bags.insert(test_bags.end(), bags.begin(), bags.end());
  }
  if (!detail::has_both_classes(test_bags)) {
    throw ConfigError("fold " + std::to_string(fold) + ": held-out patients do not contain both classes");
  }

  models::ModelConfig mc = run.model;
  mc.seed = data::derive_seed(run.seed, "init", fold);
  models::Model model = models::build_model(mc);
  auto params = model.parameters();
  nn::AdamState adam(params, nn::AdamOptions{run.learning_rate});

  auto batch_rng = data::make_stream(run.seed, "batching", fold);
  const auto val_labels = detail::labels_of(split.validation);
  const bool val_auc_defined = detail::has_both_classes(split.validation);
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best_auc = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best = detail::snapshot(model);
  result.best_epoch = run.epochs;

  for (std::size_t epoch = 1; epoch <= run.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), batch_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += run.batch_size) {
      const std::span<const std::size_t> which(order.data() + start,
                                               std::min(run.batch_size, order.size() - start));
      const auto batch = data::make_batch(split.train, which, patients);
      const auto logits = model.forward(batch.instances, batch.layout);
      const auto loss = nn::softmax_cross_entropy(logits, batch.labels);
      if (!std::isfinite(loss.loss)) {
        std::ostringstream os;
        os << "fold " << fold << " epoch " << epoch << " batch " << start / run.batch_size
           << ": non-finite loss " << loss.loss;
        throw TrainingError(os.str());
      }
      model.zero_grad();
      model.backward(loss.grad);
      try {
        nn::adam_step(adam, params);
      } catch (const TrainingError& e) {
        throw TrainingError("fold " + std::to_string(fold) + " epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += loss.loss * static_cast<double>(which.size());
      seen += which.size();
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(seen);
    if (!split.validation.empty()) {
      const auto scores = score_bags(model, split.validation, patients);
      log.validation_loss = detail::mean_log_loss(scores.tumor_probability, val_labels);
      if (val_auc_defined) log.validation_auc = eval::auc(scores.tumor_probability, val_labels);
    }
    result.history.push_back(log);

    const double criterion = val_auc_defined ? log.validation_auc : -log.validation_loss;
    if (criterion > best_auc) {
      best_auc = criterion;
      best = detail::snapshot(model);
      result.best_epoch = epoch;
    }
  }
  detail::restore(model, best);

  // Test-time evaluation on the held-out patients.
  const auto scores = score_bags(model, test_bags, patients);
  const auto bag_labels = detail::labels_of(test_bags);
  result.bag_roc = eval::roc_curve(scores.tumor_probability, bag_labels);

  std::vector<double> patient_scores;
  std::vector<int> patient_labels;
  std::size_t pos = 0;
  std::size_t bag_in_patient = 0;
  for (std::size_t b = 0; b < test_bags.size(); ++b) {
    result.test_scores.push_back({test_bags[b].patient_id, bag_in_patient, bag_labels[b], scores.tumor_probability[b]});
    const bool last = b + 1 == test_bags.size() || test_bags[b + 1].patient_index != test_bags[b].patient_index;
    ++bag_in_patient;
    if (last) {
      patient_scores.push_back(eval::patient_score(
          std::span<const double>(scores.tumor_probability).subspan(pos, b + 1 - pos)));
      patient_labels.push_back(bag_labels[b]);
      pos = b + 1;
      bag_in_patient = 0;
    }
  }
  result.patient_roc = eval::roc_curve(patient_scores, patient_labels);

  const auto bag_counts = eval::confusion_at_threshold(scores.tumor_probability, bag_labels);
  const auto patient_counts = eval::confusion_at_threshold(patient_scores, patient_labels);
  result.report.bag_auc = result.bag_roc.auc;
  result.report.patient_auc = result.patient_roc.auc;
  result.report.f1 = eval::f1_score(bag_counts).value;
  result.report.mcc = eval::mcc(bag_counts);
  result.report.patient_f1 = eval::f1_score(patient_counts).value;
  result.report.patient_mcc = eval::mcc(patient_counts);
  result.model.emplace(std::move(model));
  return result;
}

struct CrossValidationResult {
  data::FoldPlan plan;
  std::vector<FoldResult> folds;
  eval::AggregateSummary summary;

  std::vector<eval::FoldReport> reports() const {
    std::vector<eval::FoldReport> out;
    for (const auto& f : folds) out.push_back(f.report);
    return out;
  }
};

/// k-fold leave-patients-out cross-validation. Folds run on up to
/// `run.jobs` threads; results do not depend on the thread count.
inline CrossValidationResult cross_validate(std::span<const data::PatientRecord> patients, const RunConfig& run,
                                            const std::function<void(const FoldResult&)>& on_fold = {}) {
  run.validate();
  CrossValidationResult cv;
  cv.plan = data::make_folds(patients, run.folds, run.seed);
  cv.folds.resize(run.folds);

  std::vector<std::exception_ptr> errors(run.folds);
  auto work = [&](std::size_t fold) {
    try {
      cv.folds[fold] = train_fold(patients, cv.plan, fold, run);
    } catch (...) {
      errors[fold] = std::current_exception();
    }
  };
  if (run.jobs <= 1) {
    for (std::size_t f = 0; f < run.folds; ++f) {
      work(f);
      if (errors[f]) std::rethrow_exception(errors[f]);
      if (on_fold) on_fold(cv.folds[f]);
    }
  } else {
    for (std::size_t start = 0; start < run.folds; start += run.jobs) {
      std::vector<std::jthread> pool;
      const std::size_t end = std::min(run.folds, start + run.jobs);
      for (std::size_t f = start; f < end; ++f) pool.emplace_back(work, f);
      pool.clear();
      for (std::size_t f = start; f < end; ++f) {
        if (errors[f]) std::rethrow_exception(errors[f]);
        if (on_fold) on_fold(cv.folds[f]);
      }
    }
  }
  const auto reports = cv.reports();
  cv.summary = eval::aggregate_folds(reports);
  return cv;
}

}  // namespace mrsmil::pipeline
