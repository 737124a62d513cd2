#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include "mrsmil/data/bags.hpp"
#include "mrsmil/data/csv.hpp"
#include "mrsmil/data/folds.hpp"
#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/data/synth.hpp"
#include "mrsmil/errors.hpp"

using namespace mrsmil;
using namespace mrsmil::data;

namespace {

PatientRecord patient_with(std::size_t n, const std::string& id = "A", Label label = Label::tumor) {
  PatientRecord p;
  p.patient_id = id;
  p.label = label;
  Rng rng(n);
  std::normal_distribution<double> d(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> raw(kSpectrumLength);
    for (auto& v : raw) v = d(rng);
    p.spectra.push_back(normalize_spectrum(raw));
  }
  return p;
}

std::vector<PatientRecord> cohort(std::size_t per_class) {
  std::vector<PatientRecord> out;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    out.push_back(patient_with(1 + i % 3, "P" + std::to_string(i), i % 2 ? Label::tumor : Label::non_tumor));
  }
  return out;
}

SynthConfig small_synth(std::size_t per_class = 4) {
  SynthConfig c;
  c.patients_per_class = per_class;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(Normalize, ThreePointIllustration) {
  const std::vector<double> x{1, 2, 3};
  const auto z = standardize(x);
  EXPECT_NEAR(z[0], -1.224744871391589, 1e-12);
  EXPECT_NEAR(z[1], 0.0, 1e-12);
  EXPECT_NEAR(z[2], 1.224744871391589, 1e-12);
}

TEST(Normalize, PaddedPatternHasZeroMeanUnitStd) {
  std::vector<double> raw(kSpectrumLength);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = 1.0 + static_cast<double>(i % 3);
  const auto s = normalize_spectrum(raw);
  EXPECT_TRUE(s.normalized);
  EXPECT_TRUE(is_standardized(s.values));
}

TEST(Normalize, RandomSpectrumAndIdempotence) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-3, 40);
  std::vector<double> raw(kSpectrumLength);
  for (auto& v : raw) v = u(rng);
  const auto once = normalize_spectrum(raw);
  const auto m = moments(once.values);
  EXPECT_NEAR(m.mean, 0.0, 1e-9);
  EXPECT_NEAR(m.stddev, 1.0, 1e-9);
  const auto twice = normalize_spectrum(once.values);
  for (std::size_t i = 0; i < kSpectrumLength; ++i) EXPECT_NEAR(twice.values[i], once.values[i], 1e-12);
}

TEST(Normalize, Errors) {
  EXPECT_THROW(normalize_spectrum(std::vector<double>(kSpectrumLength, 2.0)), DegenerateInputError);
  EXPECT_THROW(normalize_spectrum(std::vector<double>(287, 0.0)), DimensionError);
  std::vector<double> bad(kSpectrumLength, 1.0);
  bad[4] = std::nan("");
  EXPECT_THROW(normalize_spectrum(bad), InputError);
}

TEST(Bags, TrainingBagsWithAugmentation) {
  const auto p = patient_with(4);
  Rng rng(1);
  const auto bags = generate_train_bags(p, 0, 31, 3, rng);
  ASSERT_EQ(bags.size(), 12u);
  for (const auto& b : bags) {
    EXPECT_EQ(b.size(), 31u);
    EXPECT_EQ(b.label, Label::tumor);
    for (auto idx : b.provenance) EXPECT_LT(idx, 4u);
  }
}

TEST(Bags, SingleSpectrumRepeated) {
  const auto p = patient_with(1);
  Rng rng(2);
  const auto bags = generate_train_bags(p, 0, 31, 3, rng);
  ASSERT_EQ(bags.size(), 3u);
  for (const auto& b : bags) {
    EXPECT_EQ(b.provenance, std::vector<std::size_t>(31, 0));
  }
  const std::vector<PatientRecord> patients{p};
  const auto t = materialize(bags[0], patients);
  for (std::size_t k = 0; k < 31; ++k) {
    EXPECT_TRUE(std::equal(t.data() + k * kSpectrumLength, t.data() + (k + 1) * kSpectrumLength,
                           p.spectra[0].values.begin()));
  }
}

TEST(Bags, AugmentationOffUsesTestStyleBags) {
  const auto p = patient_with(40);
  Rng rng(3);
  EXPECT_EQ(generate_train_bags(p, 0, 31, 0, rng).size(), 2u);
}

TEST(Bags, TestBagCountAnchors) {
  EXPECT_EQ(test_bag_count(10, 31), 1u);
  EXPECT_EQ(test_bag_count(31, 31), 1u);
  EXPECT_EQ(test_bag_count(62, 31), 2u);
  EXPECT_EQ(test_bag_count(63, 31), 3u);
  EXPECT_THROW(test_bag_count(5, 0), ArgumentError);
}

TEST(Bags, TestBagsCoverEverySpectrumAndPadFromStart) {
  for (std::size_t n : {1u, 10u, 31u, 62u, 63u, 100u}) {
    const auto p = patient_with(n);
    const auto bags = generate_test_bags(p, 0, 31);
    EXPECT_EQ(bags.size(), test_bag_count(n, 31));
    std::set<std::size_t> seen;
    std::vector<std::size_t> flat;
    for (const auto& b : bags) {
      EXPECT_EQ(b.size(), 31u);
      flat.insert(flat.end(), b.provenance.begin(), b.provenance.end());
    }
    seen.insert(flat.begin(), flat.end());
    EXPECT_EQ(seen.size(), n);
    for (std::size_t i = 0; i < std::min(n, flat.size()); ++i) EXPECT_EQ(flat[i], i);
    for (std::size_t i = n; i < flat.size(); ++i) EXPECT_EQ(flat[i], (i - n) % n);
  }
}

TEST(Bags, PatientWithoutSpectraIsRejected) {
  PatientRecord p;
  p.patient_id = "empty";
  EXPECT_THROW(generate_test_bags(p, 0, 3), ArgumentError);
}

TEST(Bags, BatchStoresDistinctRowsOnce) {
  const std::vector<PatientRecord> patients{patient_with(3, "A"), patient_with(2, "B", Label::non_tumor)};
  std::vector<Bag> bags{{0, "A", Label::tumor, {0, 1, 0, 2}}, {1, "B", Label::non_tumor, {1, 1, 0, 1}}};
  const auto batch = make_batch(bags, patients);
  EXPECT_EQ(batch.instances.dim(0), 5u);
  EXPECT_EQ(batch.labels, (std::vector<int>{1, 0}));
  for (std::size_t b = 0; b < 2; ++b) {
    const auto direct = materialize(bags[b], patients);
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t row = batch.layout.bags[b][k];
      EXPECT_TRUE(std::equal(direct.data() + k * kSpectrumLength, direct.data() + (k + 1) * kSpectrumLength,
                             batch.instances.data() + row * kSpectrumLength));
    }
  }
}

TEST(Bags, TrainValidationSplitIsFourToOne) {
  const auto p = patient_with(10);
  Rng rng(4);
  auto split = split_train_validation(generate_train_bags(p, 0, 5, 3, rng), rng);
  EXPECT_EQ(split.train.size(), 24u);
  EXPECT_EQ(split.validation.size(), 6u);
}

TEST(Folds, FourHundredPatientsGiveFoldsOfEighty) {
  const auto patients = cohort(200);
  const auto plan = make_folds(patients, 5, 9);
  for (std::size_t f = 0; f < 5; ++f) {
    const auto test = plan.test_patients(f);
    EXPECT_EQ(test.size(), 80u);
    const auto tumors = std::count_if(test.begin(), test.end(), [&](auto i) { return patients[i].label == Label::tumor; });
    EXPECT_EQ(tumors, 40);
    EXPECT_EQ(plan.train_patients(f).size(), 320u);
  }
}

TEST(Folds, EveryPatientInExactlyOneFoldAndTrainTestDisjoint) {
  const auto patients = cohort(23);
  const auto plan = make_folds(patients, 5, 10);
  std::vector<int> hits(patients.size(), 0);
  for (std::size_t f = 0; f < 5; ++f) {
    const auto test = plan.test_patients(f);
    const auto train = plan.train_patients(f);
    for (auto i : test) ++hits[i];
    std::set<std::size_t> t(test.begin(), test.end());
    for (auto i : train) EXPECT_EQ(t.count(i), 0u);
    EXPECT_EQ(test.size() + train.size(), patients.size());
  }
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Folds, DeterministicAndSeedDependent) {
  const auto patients = cohort(20);
  EXPECT_EQ(make_folds(patients, 5, 1).fold_of, make_folds(patients, 5, 1).fold_of);
  EXPECT_NE(make_folds(patients, 5, 1).fold_of, make_folds(patients, 5, 2).fold_of);
}

TEST(Folds, Errors) {
  const auto patients = cohort(2);
  EXPECT_THROW(make_folds(patients, 1, 0), ArgumentError);
  EXPECT_THROW(make_folds(patients, 5, 0), ArgumentError);
  auto dup = cohort(3);
  dup[1].patient_id = dup[0].patient_id;
  EXPECT_THROW(make_folds(dup, 2, 0), ArgumentError);
}

TEST(Synth, CholineAboveCreatineInEveryCleanTumorSpectrum) {
  SynthConfig c;
  c.healthy_fraction = 0.0;
  c.noise_std = 0.0;
  c.seed = 12;
  const auto cho = static_cast<std::size_t>(std::lround(index_of_ppm(3.19)));
  const auto cr = static_cast<std::size_t>(std::lround(index_of_ppm(3.03)));
  std::size_t checked = 0;
  for (std::size_t i = 0; i < 400; ++i) {
    for (const auto& raw : synthesize_patient_raw(c, Label::tumor, i)) {
      ASSERT_EQ(raw.origin, SpectrumOrigin::tumor);
      EXPECT_GT(raw.values[cho], raw.values[cr]) << "patient " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000u);
}

TEST(Synth, HealthyFractionMarksOrigins) {
  SynthConfig c = small_synth(50);
  c.healthy_fraction = 0.5;
  const auto patients = synthesize_dataset(c);
  std::size_t healthy = 0;
  std::size_t total = 0;
  for (const auto& p : patients) {
    std::size_t tumor_like = 0;
    for (const auto& s : p.spectra) {
      EXPECT_TRUE(s.normalized);
      EXPECT_TRUE(is_standardized(s.values));
      if (p.label == Label::non_tumor) {
        EXPECT_EQ(s.origin, SpectrumOrigin::healthy);
      }
      if (p.label == Label::tumor) {
        ++total;
        if (s.origin == SpectrumOrigin::healthy) ++healthy;
        else ++tumor_like;
      }
    }
    if (p.label == Label::tumor) {
      EXPECT_GE(tumor_like, 1u);
    }
  }
  EXPECT_NEAR(static_cast<double>(healthy) / static_cast<double>(total), 0.5, 0.08);
}

TEST(Synth, DefaultScaleAndSpectraHistogram) {
  SynthConfig c;
  c.seed = 13;
  const auto patients = synthesize_dataset(c);
  ASSERT_EQ(patients.size(), 400u);
  std::vector<double> counts;
  for (const auto& p : patients) {
    EXPECT_GE(p.spectra.size(), 1u);
    counts.push_back(static_cast<double>(p.spectra.size()));
  }
  EXPECT_EQ(std::count_if(patients.begin(), patients.end(), [](auto& p) { return p.label == Label::tumor; }), 200);
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
  // Clipping at 1 lifts the mean of round(N(17, 15)) to about 18.5.
  EXPECT_GT(mean, 16.0);
  EXPECT_LT(mean, 21.0);
  EXPECT_GT(*std::max_element(counts.begin(), counts.end()), 45.0);
}

TEST(Synth, MinimalDatasetHasTwoPatients) {
  const auto patients = synthesize_dataset(small_synth(1));
  ASSERT_EQ(patients.size(), 2u);
  EXPECT_EQ(patients[0].label, Label::non_tumor);
  EXPECT_EQ(patients[1].label, Label::tumor);
}

TEST(Synth, FixedSeedGivesByteIdenticalDataset) {
  std::ostringstream a, b, c;
  write_csv(a, synthesize_dataset(small_synth()));
  write_csv(b, synthesize_dataset(small_synth()));
  auto other = small_synth();
  other.seed = 12;
  write_csv(c, synthesize_dataset(other));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(Synth, ConfigValidation) {
  auto c = small_synth();
  c.healthy_fraction = 0.99;
  EXPECT_THROW(c.validate(), ConfigError);
  c.healthy_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_synth();
  c.peaks[0].ppm = 5.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_synth();
  c.noise_std = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_synth();
  c.healthy_fraction = 0.5;
  EXPECT_NO_THROW(c.validate());
}

TEST(Synth, JsonRoundTrip) {
  auto c = small_synth();
  c.healthy_fraction = 0.25;
  c.patient_shift = 0.7;
  const nlohmann::json j = c;
  const auto back = j.get<SynthConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  const auto partial = nlohmann::json{{"patients_per_class", 3}}.get<SynthConfig>();
  EXPECT_EQ(partial.patients_per_class, 3u);
  EXPECT_DOUBLE_EQ(partial.healthy_fraction, SynthConfig{}.healthy_fraction);
}

TEST(Csv, HeaderAndTwoRowsGiveOnePatient) {
  std::string row = "X1,tumor";
  for (std::size_t i = 0; i < kSpectrumLength; ++i) row += "," + std::to_string(i % 7);
  std::istringstream is(csv_header() + "\n" + row + "\n" + row + "\n");
  const auto patients = read_csv(is);
  ASSERT_EQ(patients.size(), 1u);
  EXPECT_EQ(patients[0].patient_id, "X1");
  EXPECT_EQ(patients[0].label, Label::tumor);
  EXPECT_EQ(patients[0].spectra.size(), 2u);
  EXPECT_TRUE(is_standardized(patients[0].spectra[0].values));
}

TEST(Csv, ShortRowNamesTheLine) {
  std::string row = "X1,tumor";
  for (std::size_t i = 0; i < kSpectrumLength - 1; ++i) row += ",1";
  std::istringstream is(csv_header() + "\n" + row + "\n");
  try {
    read_csv(is);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Csv, MalformedInputs) {
  std::string good;
  for (std::size_t i = 0; i < kSpectrumLength; ++i) good += "," + std::to_string(i);
  auto parse = [](const std::string& text) {
    std::istringstream is(text);
    return read_csv(is);
  };
  EXPECT_THROW(parse("id,label\n"), ParseError);
  EXPECT_THROW(parse(csv_header() + "\nX,maybe" + good + "\n"), ParseError);
  EXPECT_THROW(parse(csv_header() + "\nX,tumor" + good + "\nX,non_tumor" + good + "\n"), ParseError);
  EXPECT_THROW(parse(csv_header() + "\nX,tumor,abc" + good.substr(good.find(',', 1)) + "\n"), ParseError);
}

TEST(Csv, RoundTripIsIdentity) {
  const auto patients = synthesize_dataset(small_synth(3));
  std::ostringstream os;
  write_csv(os, patients);
  std::istringstream is(os.str());
  const auto back = read_csv(is);
  ASSERT_EQ(back.size(), patients.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].patient_id, patients[i].patient_id);
    EXPECT_EQ(back[i].label, patients[i].label);
    ASSERT_EQ(back[i].spectra.size(), patients[i].spectra.size());
    for (std::size_t s = 0; s < back[i].spectra.size(); ++s) {
      EXPECT_EQ(back[i].spectra[s].values, patients[i].spectra[s].values);
    }
  }
}

TEST(Rng, NamedStreamsDiffer) {
  EXPECT_EQ(derive_seed(1, "a", 0), derive_seed(1, "a", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(2, "a", 0));
}
