#pragma once

#include <cstddef>
#include <memory>
#include <random>

#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/models/config.hpp"
#include "mrsmil/models/inception.hpp"
#include "mrsmil/models/model.hpp"
#include "mrsmil/nn/layers.hpp"
#include "mrsmil/pooling/attention.hpp"
#include "mrsmil/pooling/three_pool.hpp"

namespace mrsmil::models {

namespace detail {

inline void initialize_layers(nn::Sequential& seq, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    auto& layer = seq.at(i);
    if (auto* d = dynamic_cast<nn::Dense*>(&layer)) d->initialize(rng);
    else if (auto* c = dynamic_cast<nn::Conv1D*>(&layer)) c->initialize(rng);
    else if (auto* b = dynamic_cast<InceptionBlock*>(&layer)) b->initialize(rng);
  }
}

// Attaches aggregator and head to an encoder producing `feature_dim` features.
inline Model assemble(const ModelConfig& config, nn::Shape instance_shape, nn::Sequential encoder,
                      std::size_t feature_dim) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  initialize_layers(encoder, rng);

  std::unique_ptr<pooling::Aggregator> aggregator;
  switch (config.aggregator) {
    case pooling::AggregatorKind::single_instance:
      aggregator = std::make_unique<pooling::SingleInstance>();
      break;
    case pooling::AggregatorKind::three_pool:
      aggregator = std::make_unique<pooling::ThreePool>();
      break;
    case pooling::AggregatorKind::attention: {
      auto att = std::make_unique<pooling::AttentionLayer>(feature_dim, config.n_att);
      att->initialize(rng);
      aggregator = std::move(att);
      break;
    }
  }
  nn::Dense head(aggregator->output_dim(feature_dim), 2);
  head.initialize(rng);
  return Model(config, std::move(instance_shape), std::move(encoder), std::move(aggregator),
               std::move(head));
}

}  // namespace detail

constexpr std::size_t kSpectrumPoints = data::kSpectrumLength;

/// dense(288->128)+ReLU, dense(128->32)+ReLU per instance; head on 32 (SI,
/// attention) or 96 (3Pool) features.
inline Model build_mlp(const ModelConfig& config) {
  nn::Sequential enc;
  enc.emplace<nn::Dense>(kSpectrumPoints, 128);
  enc.emplace<nn::ReLU>();
  enc.emplace<nn::Dense>(128, 32);
  enc.emplace<nn::ReLU>();
  return detail::assemble(config, {kSpectrumPoints}, std::move(enc), 32);
}

/// Three conv blocks (64, 128, 256 kernels of length 5, ReLU) with length-2
/// max pooling between them, then global average pooling per instance.
inline Model build_hatami(const ModelConfig& config) {
  nn::Sequential enc;
  enc.emplace<nn::Conv1D>(nn::Conv1DOptions{1, 64, 5, 1, nn::Padding::same});
  enc.emplace<nn::ReLU>();
  enc.emplace<nn::MaxPool1D>(2, 2);
  enc.emplace<nn::Conv1D>(nn::Conv1DOptions{64, 128, 5, 1, nn::Padding::same});
  enc.emplace<nn::ReLU>();
  enc.emplace<nn::MaxPool1D>(2, 2);
  enc.emplace<nn::Conv1D>(nn::Conv1DOptions{128, 256, 5, 1, nn::Padding::same});
  enc.emplace<nn::ReLU>();
  enc.emplace<nn::GlobalAvgPool1D>();
  return detail::assemble(config, {1, kSpectrumPoints}, std::move(enc), 256);
}

/// Five inception blocks with base branch widths {8, 16, 16, 8}, doubled at
/// the second and fourth block; length-2 max pooling after blocks one and
/// three; global average pooling per instance.
inline Model build_inception(const ModelConfig& config) {
  constexpr std::size_t kMultipliers[] = {1, 2, 2, 4, 4};
  const InceptionWidths base{};
  nn::Sequential enc;
  std::size_t channels = 1;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t m = kMultipliers[i];
    const InceptionWidths w{base.conv1 * m, base.conv3 * m, base.conv5 * m, base.pool * m};
    enc.emplace<InceptionBlock>(channels, w);
    channels = w.total();
    if (i == 0 || i == 2) enc.emplace<nn::MaxPool1D>(2, 2);
  }
  enc.emplace<nn::GlobalAvgPool1D>();
  return detail::assemble(config, {1, kSpectrumPoints}, std::move(enc), channels);
}

inline Model build_model(const ModelConfig& config) {
  switch (config.architecture) {
    case Architecture::mlp: return build_mlp(config);
    case Architecture::hatami: return build_hatami(config);
    case Architecture::inception: return build_inception(config);
  }
  throw ConfigError("unknown architecture");
}

}  // namespace mrsmil::models
