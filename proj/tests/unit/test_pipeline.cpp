#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mrsmil/data/synth.hpp"
#include "mrsmil/errors.hpp"
#include "mrsmil/models/checkpoint.hpp"
#include "mrsmil/pipeline/attention_export.hpp"
#include "mrsmil/pipeline/cross_validation.hpp"
#include "mrsmil/pipeline/reports.hpp"
#include "mrsmil/pipeline/sweep.hpp"

using namespace mrsmil;
using namespace mrsmil::pipeline;

namespace {

const std::vector<data::PatientRecord>& small_cohort() {
  static const auto patients = [] {
    data::SynthConfig c;
    c.patients_per_class = 10;
    c.spectra_mean = 6;
    c.spectra_std = 3;
    c.seed = 4;
    return data::synthesize_dataset(c);
  }();
  return patients;
}

RunConfig small_run(pooling::AggregatorKind agg = pooling::AggregatorKind::three_pool, std::size_t m = 3) {
  RunConfig r;
  r.data = "memory";
  r.model.architecture = models::Architecture::mlp;
  r.model.aggregator = agg;
  r.model.bag_size = m;
  r.epochs = 2;
  r.folds = 2;
  r.da_factor = 1;
  r.seed = 8;
  return r;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST(CrossValidation, ProducesOneReportPerFold) {
  const auto cv = cross_validate(small_cohort(), small_run());
  ASSERT_EQ(cv.folds.size(), 2u);
  for (const auto& f : cv.folds) {
    EXPECT_EQ(f.history.size(), 2u);
    EXPECT_GE(f.best_epoch, 1u);
    EXPECT_LE(f.best_epoch, 2u);
    EXPECT_GE(f.report.bag_auc, 0.0);
    EXPECT_LE(f.report.bag_auc, 1.0);
    EXPECT_EQ(f.test_patients.size(), 10u);
    EXPECT_TRUE(f.model.has_value());
    EXPECT_EQ(f.train_bags + f.validation_bags, [&] {
      std::size_t n = 0;
      for (const auto& p : small_cohort()) {
        if (std::find(f.test_patients.begin(), f.test_patients.end(), p.patient_id) == f.test_patients.end()) {
          n += p.spectra.size();
        }
      }
      return n;
    }());
  }
  EXPECT_EQ(cv.summary.size(), 6u);
  EXPECT_EQ(cv.summary.at("bag_auc").n, 2u);
}

TEST(CrossValidation, TrainingNeverSeesTestPatients) {
  const auto cv = cross_validate(small_cohort(), small_run());
  std::set<std::string> all_test;
  for (const auto& f : cv.folds) {
    const std::set<std::string> test(f.test_patients.begin(), f.test_patients.end());
    for (const auto& id : f.train_patient_ids) EXPECT_EQ(test.count(id), 0u) << id;
    EXPECT_EQ(f.train_patient_ids.size() + test.size(), small_cohort().size());
    all_test.insert(test.begin(), test.end());
    for (const auto& s : f.test_scores) EXPECT_EQ(test.count(s.patient_id), 1u);
  }
  EXPECT_EQ(all_test.size(), small_cohort().size());
}

TEST(CrossValidation, DeterministicAndIndependentOfJobs) {
  auto run = small_run(pooling::AggregatorKind::attention);
  const auto a = cross_validate(small_cohort(), run);
  const auto b = cross_validate(small_cohort(), run);
  run.jobs = 2;
  const auto c = cross_validate(small_cohort(), run);
  run.jobs = 1;
  const auto ja = aggregate_report_json(a, run).dump();
  EXPECT_EQ(ja, aggregate_report_json(b, run).dump());
  EXPECT_EQ(ja, aggregate_report_json(c, run).dump());
}

TEST(CrossValidation, SingleInstanceRuns) {
  const auto cv = cross_validate(small_cohort(), small_run(pooling::AggregatorKind::single_instance, 1));
  for (const auto& f : cv.folds) {
    EXPECT_EQ(f.model->config().bag_size, 1u);
    // Each test spectrum is its own bag.
    std::size_t spectra = 0;
    for (const auto& p : small_cohort()) {
      if (std::count(f.test_patients.begin(), f.test_patients.end(), p.patient_id)) spectra += p.spectra.size();
    }
    EXPECT_EQ(f.test_scores.size(), spectra);
  }
}

TEST(CrossValidation, PatientScoreIsMeanOfBagScores) {
  const auto cv = cross_validate(small_cohort(), small_run(pooling::AggregatorKind::three_pool, 2));
  const auto& f = cv.folds[0];
  std::map<std::string, std::vector<double>> by_patient;
  std::map<std::string, int> labels;
  for (const auto& s : f.test_scores) {
    by_patient[s.patient_id].push_back(s.probability);
    labels[s.patient_id] = s.label;
  }
  std::vector<double> scores;
  std::vector<int> y;
  for (const auto& [id, probs] : by_patient) {
    scores.push_back(eval::patient_score(probs));
    y.push_back(labels[id]);
  }
  EXPECT_NEAR(eval::auc(scores, y), f.report.patient_auc, 1e-12);
}

TEST(CrossValidation, SingleClassCohortIsConfigError) {
  std::vector<data::PatientRecord> one_class;
  for (const auto& p : small_cohort()) {
    if (p.label == data::Label::tumor) one_class.push_back(p);
  }
  EXPECT_THROW(cross_validate(one_class, small_run()), ConfigError);
}

TEST(CrossValidation, DivergentTrainingIsReported) {
  auto run = small_run();
  run.learning_rate = 1e300;
  try {
    cross_validate(small_cohort(), run);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("fold"), std::string::npos);
  }
}

TEST(CrossValidation, InvalidRunConfig) {
  auto run = small_run();
  run.epochs = 0;
  EXPECT_THROW(cross_validate(small_cohort(), run), ConfigError);
  run = small_run(pooling::AggregatorKind::single_instance, 3);
  EXPECT_THROW(cross_validate(small_cohort(), run), ConfigError);
}

TEST(Reports, FoldAndAggregateJsonEmbedRunConfig) {
  const auto run = small_run();
  const auto cv = cross_validate(small_cohort(), run);
  const auto fold = fold_report_json(cv.folds[1], run);
  EXPECT_EQ(fold.at("run_config"), nlohmann::json(run));
  EXPECT_EQ(fold.at("fold"), 1);
  EXPECT_EQ(fold.at("history").size(), 2u);
  EXPECT_TRUE(fold.at("metrics").contains("patient_mcc"));
  const auto agg = aggregate_report_json(cv, run);
  EXPECT_EQ(agg.at("run_config"), nlohmann::json(run));
  EXPECT_EQ(agg.at("folds").size(), 2u);
  EXPECT_TRUE(agg.at("summary").at("bag_auc").contains("std"));
  EXPECT_EQ(nlohmann::json(run).get<RunConfig>().model, run.model);
}

TEST(Reports, UndefinedMetricIsNull) {
  eval::FoldReport r;
  r.f1 = std::nan("");
  EXPECT_TRUE(to_json(r).at("f1").is_null());
}

TEST(Reports, RocCsvAndFoldFiles) {
  const auto run = small_run(pooling::AggregatorKind::attention);
  auto cv = cross_validate(small_cohort(), run);
  const auto dir = std::filesystem::temp_directory_path() / "mrsmil_reports_test";
  std::filesystem::remove_all(dir);
  prepare_output_dir(dir);
  write_fold_outputs(dir, cv.folds[0], run);
  const auto csv = read_file(dir / "roc_fold_0.csv");
  EXPECT_EQ(csv.substr(0, 8), "fpr,tpr\n");
  EXPECT_EQ(csv.substr(8, 8), "0.0,0.0\n");
  EXPECT_EQ(csv.substr(csv.size() - 8), "1.0,1.0\n");
  const auto j = nlohmann::json::parse(read_file(dir / "fold_0.json"));
  EXPECT_EQ(j.at("run_config"), nlohmann::json(run));

  auto loaded = models::load_checkpoint((dir / "checkpoint_fold_0.bin").string());
  EXPECT_EQ(loaded.metadata.at("run_config"), nlohmann::json(run));
  const auto& patients = small_cohort();
  const auto bag = data::materialize(data::generate_test_bags(patients[0], 0, 3)[0], patients);
  EXPECT_EQ(models::predict_bag(loaded.model, bag).probabilities,
            models::predict_bag(*cv.folds[0].model, bag).probabilities);
  std::filesystem::remove_all(dir);
}

TEST(Reports, UnwritableOutputDirectory) {
  EXPECT_THROW(prepare_output_dir("/proc/mrsmil_cannot_exist"), ConfigError);
}

TEST(Sweep, OneRowPerSizeAndCsv) {
  const auto rows = sweep_bag_sizes(small_cohort(), small_run(pooling::AggregatorKind::attention), {1, 4});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].bag_size, 1u);
  EXPECT_EQ(rows[1].bag_size, 4u);
  const auto csv = sweep_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "bag_size,bag_auc_mean,bag_auc_std,patient_auc_mean,patient_auc_std");
}

TEST(Sweep, SingleSizeMatchesTrain) {
  const auto run = small_run(pooling::AggregatorKind::three_pool, 4);
  const auto rows = sweep_bag_sizes(small_cohort(), run, {4});
  const auto cv = cross_validate(small_cohort(), run);
  EXPECT_EQ(rows[0].bag_auc.mean, cv.summary.at("bag_auc").mean);
  EXPECT_EQ(rows[0].patient_auc.stddev, cv.summary.at("patient_auc").stddev);
}

TEST(Sweep, Errors) {
  EXPECT_THROW(sweep_bag_sizes(small_cohort(), small_run(), {}), ArgumentError);
  EXPECT_THROW(sweep_bag_sizes(small_cohort(), small_run(), {3, 0}), ArgumentError);
  EXPECT_THROW(sweep_bag_sizes(small_cohort(), small_run(pooling::AggregatorKind::single_instance, 1), {1, 6}),
               ConfigError);
  EXPECT_EQ(bag_size_range(1, 51, 5).size(), 11u);
  EXPECT_EQ(bag_size_range(1, 51, 5).back(), 51u);
}

TEST(AttentionExport, WeightsPerBagSumToOne) {
  const auto run = small_run(pooling::AggregatorKind::attention, 3);
  auto cv = cross_validate(small_cohort(), run);
  const auto rows = export_attention(*cv.folds[0].model, small_cohort());
  std::map<std::string, double> sums;
  for (const auto& r : rows) {
    EXPECT_GE(r.weight, 0.0);
    sums[r.bag_id] += r.weight;
  }
  for (const auto& [id, s] : sums) EXPECT_NEAR(s, 1.0, 1e-12) << id;
  const auto csv = attention_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "bag_id,instance_index,weight");
}

TEST(AttentionExport, SingletonBagsGetWeightOne) {
  auto model = models::build_model({models::Architecture::mlp, pooling::AggregatorKind::attention, 1, 4, 2});
  for (const auto& r : export_attention(model, small_cohort())) EXPECT_DOUBLE_EQ(r.weight, 1.0);
}

TEST(AttentionExport, RejectsOtherAggregators) {
  auto model = models::build_model({models::Architecture::mlp, pooling::AggregatorKind::three_pool, 3, 8, 2});
  EXPECT_THROW(export_attention(model, small_cohort()), UnsupportedError);
}
