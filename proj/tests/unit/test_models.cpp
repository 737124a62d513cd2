#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "mrsmil/errors.hpp"
#include "mrsmil/models/builders.hpp"
#include "mrsmil/models/checkpoint.hpp"
#include "mrsmil/models/inception.hpp"
#include "mrsmil/nn/loss.hpp"
#include "gradcheck.hpp"

using namespace mrsmil;
using nn::Tensor;

namespace {

models::ModelConfig config(models::Architecture arch, pooling::AggregatorKind agg, std::size_t m,
                           std::size_t n_att = 8) {
  models::ModelConfig c;
  c.architecture = arch;
  c.aggregator = agg;
  c.bag_size = agg == pooling::AggregatorKind::single_instance ? 1 : m;
  c.n_att = n_att;
  c.seed = 3;
  return c;
}

Tensor random_bag(std::size_t m, std::mt19937_64& rng) {
  Tensor t({m, 288});
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

std::size_t hand_count(const models::Model& model) {
  std::size_t total = 0;
  for (const auto* p : model.parameters()) total += p->size();
  return total;
}

}  // namespace

TEST(Models, MlpThreePoolParameterCount) {
  const auto m = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::three_pool, 31));
  EXPECT_EQ(m.parameter_count(), 41314u);
  EXPECT_EQ(m.summary().trainable, 41314u);
}

TEST(Models, MlpAttentionParameterCountWithSingleAttentionUnit) {
  const auto m = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::attention, 31, 1));
  EXPECT_EQ(m.parameter_count(), 41220u);
}

TEST(Models, MlpSingleInstanceParameterCount) {
  const auto m = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::single_instance, 1));
  EXPECT_EQ(m.parameter_count(), 36992u + 4128u + 66u);
}

TEST(Models, SummaryCountEqualsSumOfLayers) {
  for (auto arch : {models::Architecture::mlp, models::Architecture::hatami, models::Architecture::inception}) {
    for (auto agg : {pooling::AggregatorKind::single_instance, pooling::AggregatorKind::three_pool,
                     pooling::AggregatorKind::attention}) {
      const auto m = models::build_model(config(arch, agg, 5));
      const auto s = m.summary();
      std::size_t layers = 0;
      for (const auto& l : s.layers) layers += l.parameters;
      EXPECT_EQ(layers, s.trainable);
      EXPECT_EQ(hand_count(m), s.trainable);
    }
  }
}

TEST(Models, HatamiLayerCountsByHand) {
  const auto m = models::build_model(config(models::Architecture::hatami, pooling::AggregatorKind::three_pool, 5));
  const std::size_t convs = (1 * 5 * 64 + 64) + (64 * 5 * 128 + 128) + (128 * 5 * 256 + 256);
  EXPECT_EQ(m.parameter_count(), convs + 3 * 256 * 2 + 2);
}

TEST(Models, SummaryPrintsTableAndJson) {
  const auto m = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::three_pool, 31));
  std::ostringstream os;
  m.summary().print(os);
  EXPECT_NE(os.str().find("41314"), std::string::npos);
  EXPECT_NE(os.str().find("three_pool"), std::string::npos);
  const nlohmann::json j = m.summary();
  EXPECT_EQ(j.at("trainable").get<std::size_t>(), 41314u);
  EXPECT_FALSE(j.at("layers").empty());
}

TEST(Models, ForwardShapeAndRowOrderInvariance) {
  std::mt19937_64 rng(21);
  for (auto arch : {models::Architecture::mlp, models::Architecture::hatami, models::Architecture::inception}) {
    for (auto agg : {pooling::AggregatorKind::three_pool, pooling::AggregatorKind::attention}) {
      const std::size_t m = arch == models::Architecture::mlp ? 31 : 4;
      auto model = models::build_model(config(arch, agg, m));
      const auto bag = random_bag(m, rng);
      const auto logits = model.forward(bag, pooling::BagLayout::single(m));
      ASSERT_EQ(logits.shape(), (nn::Shape{1, 2}));
      EXPECT_TRUE(std::isfinite(logits[0]) && std::isfinite(logits[1]));

      std::vector<std::size_t> perm(m);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Tensor shuffled({m, 288});
      for (std::size_t k = 0; k < m; ++k) std::copy_n(bag.data() + perm[k] * 288, 288, shuffled.data() + k * 288);
      const auto a = models::predict_bag(model, bag);
      const auto b = models::predict_bag(model, shuffled);
      EXPECT_NEAR(a.probabilities[0], b.probabilities[0], 1e-12);
      EXPECT_NEAR(a.probabilities[0] + a.probabilities[1], 1.0, 1e-12);
    }
  }
}

TEST(Models, PredictBagAttentionOnlyForAttentionModels) {
  std::mt19937_64 rng(22);
  auto att = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::attention, 6));
  auto tp = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::three_pool, 6));
  const auto bag = random_bag(6, rng);
  const auto pa = models::predict_bag(att, bag);
  ASSERT_TRUE(pa.attention.has_value());
  EXPECT_EQ(pa.attention->size(), 6u);
  EXPECT_NEAR(std::accumulate(pa.attention->begin(), pa.attention->end(), 0.0), 1.0, 1e-12);
  EXPECT_FALSE(models::predict_bag(tp, bag).attention.has_value());
}

TEST(Models, PredictBagRejectsNonFiniteInput) {
  std::mt19937_64 rng(23);
  auto model = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::three_pool, 3));
  auto bag = random_bag(3, rng);
  bag[100] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(models::predict_bag(model, bag), InputError);
}

TEST(Models, SingleInstanceModelIsPerSpectrumClassifier) {
  std::mt19937_64 rng(24);
  auto model = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::single_instance, 1));
  const auto x = random_bag(1, rng);
  const auto p = models::predict_bag(model, x);
  // Same computation done by hand through encoder and head.
  auto h = model.encoder().forward(x);
  auto logits = model.head().forward(h);
  const auto ref = nn::softmax(logits);
  EXPECT_NEAR(p.probabilities[1], ref[1], 1e-15);
}

TEST(Models, SingletonThreePoolFeatureIsTriplicated) {
  std::mt19937_64 rng(25);
  auto model = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::three_pool, 1));
  const auto x = random_bag(1, rng);
  const auto h = model.encoder().forward(x);
  const auto pooled = model.aggregator().forward(h, pooling::BagLayout::single(1));
  ASSERT_EQ(pooled.size(), 96u);
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_EQ(pooled[i], h[i]);
    EXPECT_EQ(pooled[32 + i], h[i]);
    EXPECT_EQ(pooled[64 + i], h[i]);
  }
}

TEST(Models, DuplicatedRowsLeaveMinMaxUnchanged) {
  std::mt19937_64 rng(26);
  auto model = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::three_pool, 4));
  const auto x = random_bag(4, rng);
  const auto h = model.encoder().forward(x);
  const auto a = model.aggregator().forward(h, pooling::BagLayout{{{0, 1, 2, 3}}});
  const auto b = model.aggregator().forward(h, pooling::BagLayout{{{0, 1, 2, 3, 2, 2, 0}}});
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Models, BackwardBeforeForwardIsStateError) {
  auto model = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::three_pool, 2));
  EXPECT_THROW(model.backward(Tensor({1, 2})), StateError);
}

TEST(Models, SingleInstanceNeedsBagSizeOne) {
  auto c = config(models::Architecture::mlp, pooling::AggregatorKind::single_instance, 1);
  c.bag_size = 5;
  EXPECT_THROW(models::build_model(c), ConfigError);
}

TEST(Models, SameSeedSameWeights) {
  const auto c = config(models::Architecture::hatami, pooling::AggregatorKind::attention, 3);
  const auto a = models::build_model(c);
  const auto b = models::build_model(c);
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(std::equal(pa[i]->value.values().begin(), pa[i]->value.values().end(), pb[i]->value.values().begin()));
  }
}

TEST(Inception, BranchConcatenationChannelCount) {
  models::InceptionBlock block(3, {});
  const auto ch = block.branch_channels();
  EXPECT_EQ(ch[0] + ch[1] + ch[2] + ch[3], 48u);
  EXPECT_EQ(block.output_shape({3, 20}), (nn::Shape{48, 20}));
  std::mt19937_64 rng(27);
  block.initialize(rng);
  Tensor x({2, 3, 20});
  for (auto& v : x.values()) v = std::normal_distribution<double>(0, 1)(rng);
  EXPECT_EQ(block.forward(x).shape(), (nn::Shape{2, 48, 20}));
}

TEST(Inception, BlockGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(28);
  models::InceptionBlock block(2, {2, 3, 2, 2});
  block.initialize(rng);
  for (auto* p : block.parameters()) {
    if (p->name == "bias") for (auto& v : p->value.values()) v = std::normal_distribution<double>(0, 0.1)(rng);
  }
  Tensor x({2, 2, 9});
  for (auto& v : x.values()) v = std::normal_distribution<double>(0, 1)(rng);
  testing_util::check_layer_gradients(block, x, rng);
}

TEST(Models, EndToEndGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(29);
  for (auto arch : {models::Architecture::mlp, models::Architecture::hatami, models::Architecture::inception}) {
    for (auto agg : {pooling::AggregatorKind::single_instance, pooling::AggregatorKind::three_pool,
                     pooling::AggregatorKind::attention}) {
      auto model = models::build_model(config(arch, agg, 2));
      const bool si = agg == pooling::AggregatorKind::single_instance;
      const Tensor x = random_bag(si ? 2 : 3, rng);
      const pooling::BagLayout layout = si ? pooling::BagLayout{{{0}, {1}}} : pooling::BagLayout{{{0, 1}, {2, 0}}};
      const std::vector<int> labels{1, 0};
      auto loss = [&] { return nn::softmax_cross_entropy(model.forward(x, layout), labels).loss; };
      const auto result = nn::softmax_cross_entropy(model.forward(x, layout), labels);
      model.zero_grad();
      model.backward(result.grad);

      auto params = model.parameters();
      std::size_t total = 0;
      for (auto* p : params) total += p->size();
      std::uniform_int_distribution<std::size_t> pick(0, total - 1);
      for (int s = 0; s < 25; ++s) {
        std::size_t flat = pick(rng);
        std::size_t i = 0;
        while (flat >= params[i]->size()) flat -= params[i++]->size();
        auto& value = params[i]->value[flat];
        const double orig = value;
        value = orig + testing_util::kStep;
        const double up = loss();
        value = orig - testing_util::kStep;
        const double down = loss();
        value = orig;
        const double numeric = (up - down) / (2 * testing_util::kStep);
        EXPECT_LE(testing_util::relative_error(params[i]->value.grad()[flat], numeric), 1e-4)
            << models::to_string(arch) << "/" << pooling::to_string(agg) << " " << params[i]->name;
      }
    }
  }
}

TEST(Checkpoint, RoundTripPreservesParametersAndPredictions) {
  std::mt19937_64 rng(30);
  for (auto agg : {pooling::AggregatorKind::three_pool, pooling::AggregatorKind::attention}) {
    auto model = models::build_model(config(models::Architecture::hatami, agg, 3));
    for (auto* p : model.parameters()) for (auto& v : p->value.values()) v += 0.01;
    const auto bytes = models::serialize_checkpoint(model, {{"note", "x"}});
    auto loaded = models::deserialize_checkpoint(bytes);
    EXPECT_EQ(loaded.model.config(), model.config());
    EXPECT_EQ(loaded.metadata.at("note"), "x");
    const auto a = model.parameters();
    const auto b = loaded.model.parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_TRUE(std::equal(a[i]->value.values().begin(), a[i]->value.values().end(),
                             b[i]->value.values().begin()));
    }
    const auto bag = random_bag(3, rng);
    EXPECT_EQ(models::predict_bag(model, bag).probabilities, models::predict_bag(loaded.model, bag).probabilities);
  }
}

TEST(Checkpoint, LayoutIsDocumentedAndValidated) {
  auto model = models::build_model(config(models::Architecture::mlp, pooling::AggregatorKind::three_pool, 2));
  auto bytes = models::serialize_checkpoint(model);
  EXPECT_EQ(bytes.substr(0, 8), "MRSMILCK");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);  // version, little-endian
  EXPECT_THROW(models::deserialize_checkpoint("garbage"), ArgumentError);
  auto truncated = bytes.substr(0, bytes.size() - 8);
  EXPECT_THROW(models::deserialize_checkpoint(truncated), ArgumentError);
}
