#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrsmil/errors.hpp"
#include "mrsmil/models/config.hpp"
#include "mrsmil/nn/layers.hpp"
#include "mrsmil/nn/loss.hpp"
#include "mrsmil/nn/tensor.hpp"
#include "mrsmil/pooling/aggregator.hpp"

namespace mrsmil::models {

struct LayerSummary {
  std::string name;
  nn::Shape output_shape;  // per instance for encoder layers, per bag afterwards
  std::size_t parameters = 0;
};

struct ModelSummary {
  std::vector<LayerSummary> layers;
  std::size_t trainable = 0;

  void print(std::ostream& os) const {
    os << std::left << std::setw(28) << "layer" << std::setw(20) << "output shape"
       << std::right << std::setw(12) << "params" << '\n';
    os << std::string(60, '-') << '\n';
    for (const auto& l : layers) {
      os << std::left << std::setw(28) << l.name << std::setw(20) << nn::to_string(l.output_shape)
         << std::right << std::setw(12) << l.parameters << '\n';
    }
    os << std::string(60, '-') << '\n';
    os << "trainable parameters: " << trainable << '\n';
  }
};

inline void to_json(nlohmann::json& j, const LayerSummary& l) {
  j = nlohmann::json{{"name", l.name}, {"output_shape", l.output_shape}, {"params", l.parameters}};
}

inline void to_json(nlohmann::json& j, const ModelSummary& s) {
  j = nlohmann::json{{"layers", s.layers}, {"trainable", s.trainable}};
}

/// Output of a trained model on one bag.
struct BagPrediction {
  std::array<double, 2> probabilities{};          // {non_tumor, tumor}
  std::optional<std::vector<double>> attention;  // iff the aggregator is attention
};

/// Per-instance encoder -> permutation-invariant aggregator -> 2-way dense head.
///
/// Input to forward() is a matrix of distinct instances [rows x 288] and a
/// layout saying which rows make up each bag. The encoder runs once per row;
/// a row shared by several bag slots contributes the sum of their gradients.
class Model {
 public:
  Model(ModelConfig config, nn::Shape instance_shape, nn::Sequential encoder,
        std::unique_ptr<pooling::Aggregator> aggregator, nn::Dense head)
      : config_(config), instance_shape_(std::move(instance_shape)),
        encoder_(std::move(encoder)), aggregator_(std::move(aggregator)),
        head_(std::move(head)) {}

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const noexcept { return config_; }
  const nn::Shape& instance_shape() const noexcept { return instance_shape_; }
  std::size_t instance_length() const { return nn::element_count(instance_shape_); }
  pooling::Aggregator& aggregator() noexcept { return *aggregator_; }
  const pooling::Aggregator& aggregator() const noexcept { return *aggregator_; }
  nn::Sequential& encoder() noexcept { return encoder_; }
  nn::Dense& head() noexcept { return head_; }

  /// Switch pattern of the last forward pass across encoder and aggregator.
  std::vector<std::size_t> switches() const {
    std::vector<std::size_t> out;
    encoder_.append_switches(out);
    aggregator_->append_switches(out);
    return out;
  }

  /// Logits [bags x 2].
  nn::Tensor forward(const nn::Tensor& instances, const pooling::BagLayout& layout) {
    const std::size_t len = instance_length();
    if (instances.rank() != 2 || instances.dim(1) != len) {
      throw DimensionError("model: instances " + nn::to_string(instances.shape()) +
                           " expected [rows x " + std::to_string(len) + "]");
    }
    nn::Shape batched{instances.dim(0)};
    batched.insert(batched.end(), instance_shape_.begin(), instance_shape_.end());
    const nn::Tensor features = encoder_.forward(instances.reshaped(batched));
    const nn::Tensor pooled = aggregator_->forward(features, layout);
    nn::Tensor logits = head_.forward(pooled);
    rows_ = instances.dim(0);
    forwarded_ = true;
    return logits;
  }

  /// Accumulates d loss / d parameter for every parameter.
  void backward(const nn::Tensor& grad_logits) {
    if (!forwarded_) throw StateError("model: backward called before forward");
    const nn::Tensor g_pooled = head_.backward(grad_logits);
    const nn::Tensor g_features = aggregator_->backward(g_pooled);
    encoder_.backward(g_features);
  }

  void zero_grad() {
    for (auto* p : parameters()) p->value.zero_grad();
  }

  std::vector<nn::Parameter*> parameters() {
    auto out = encoder_.parameters();
    for (auto* p : aggregator_->parameters()) out.push_back(p);
    for (auto* p : head_.parameters()) out.push_back(p);
    return out;
  }

  std::vector<const nn::Parameter*> parameters() const {
    auto out = static_cast<const nn::Layer&>(encoder_).parameters();
    for (const auto* p : static_cast<const pooling::Aggregator&>(*aggregator_).parameters()) {
      out.push_back(p);
    }
    for (const auto* p : static_cast<const nn::Layer&>(head_).parameters()) out.push_back(p);
    return out;
  }

  /// Parameter names unique within the model, in parameters() order.
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    std::size_t i = 0;
    for (const auto* p : static_cast<const nn::Layer&>(encoder_).parameters()) {
      names.push_back("encoder." + std::to_string(i++) + "." + p->name);
    }
    i = 0;
    for (const auto* p : static_cast<const pooling::Aggregator&>(*aggregator_).parameters()) {
      names.push_back("aggregator." + std::to_string(i++) + "." + p->name);
    }
    i = 0;
    for (const auto* p : static_cast<const nn::Layer&>(head_).parameters()) {
      names.push_back("head." + std::to_string(i++) + "." + p->name);
    }
    return names;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  ModelSummary summary() const {
    ModelSummary s;
    nn::Shape shape = instance_shape_;
    s.layers.push_back({"input", shape, 0});
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
      const auto& layer = encoder_.at(i);
      shape = layer.output_shape(shape);
      s.layers.push_back({layer.kind(), shape, layer.parameter_count()});
    }
    const std::size_t feature_dim = nn::element_count(shape);
    std::size_t agg_params = 0;
    for (const auto* p : static_cast<const pooling::Aggregator&>(*aggregator_).parameters()) {
      agg_params += p->size();
    }
    s.layers.push_back({pooling::to_string(aggregator_->kind()),
                        {aggregator_->output_dim(feature_dim)},
                        agg_params});
    s.layers.push_back({"dense_head", {head_.out_dim()}, head_.parameter_count()});
    for (const auto& l : s.layers) s.trainable += l.parameters;
    return s;
  }

 private:
  ModelConfig config_;
  nn::Shape instance_shape_;
  nn::Sequential encoder_;
  std::unique_ptr<pooling::Aggregator> aggregator_;
  nn::Dense head_;
  std::size_t rows_ = 0;
  bool forwarded_ = false;
};

/// Class probabilities [bags x 2] for a batch of bags.
inline nn::Tensor predict_probabilities(Model& model, const nn::Tensor& instances,
                                        const pooling::BagLayout& layout) {
  return nn::softmax(model.forward(instances, layout));
}

/// Prediction for one bag given as [M x 288].
inline BagPrediction predict_bag(Model& model, const nn::Tensor& bag) {
  if (bag.rank() != 2 || bag.dim(0) == 0) {
    throw DimensionError("predict_bag: expected [M x " + std::to_string(model.instance_length()) +
                         "], got " + nn::to_string(bag.shape()));
  }
  for (double v : bag.values()) {
    if (!std::isfinite(v)) throw InputError("predict_bag: bag contains non-finite values");
  }
  const auto probs = predict_probabilities(model, bag, pooling::BagLayout::single(bag.dim(0)));
  BagPrediction out;
  out.probabilities = {probs[0], probs[1]};
  if (model.aggregator().kind() == pooling::AggregatorKind::attention) {
    out.attention = model.aggregator().last_weights()->front();
  }
  return out;
}

}  // namespace mrsmil::models
