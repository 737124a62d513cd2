#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "mrsmil/errors.hpp"
#include "mrsmil/nn/layers.hpp"
#include "mrsmil/nn/tensor.hpp"
#include "mrsmil/pooling/aggregator.hpp"

namespace mrsmil::pooling {

/// Attention-weighted average of instance features.
///
/// For every instance feature h_k of a bag the layer scores
///     s_k = w . tanh(V h_k + c)
/// and normalizes the scores with a softmax over the bag, a = softmax(s).
/// The bag representation is z = sum_k a_k h_k. V is [n_att x L], c is the
/// bias of V (n_att), and w (n_att) has no bias; a parameter count of
/// n_att * (L + 2).
///
/// Scores depend on the instance only, so z does not depend on the order of
/// the bag and a is permuted along with the instances.
class AttentionLayer final : public Aggregator {
 public:
  AttentionLayer(std::size_t feature_dim, std::size_t n_att)
      : dim_(feature_dim), n_att_(n_att), v_("V", {n_att, feature_dim}),
        c_("V_bias", {n_att}), w_("w", {n_att}) {
    if (feature_dim == 0 || n_att == 0) {
      throw ConfigError("attention: feature dimension and n_att must be >= 1");
    }
  }

  void initialize(std::mt19937_64& rng) {
    nn::glorot_uniform(v_.value, dim_, n_att_, rng);
    nn::glorot_uniform(w_.value, n_att_, 1, rng);
    std::fill(c_.value.values().begin(), c_.value.values().end(), 0.0);
  }

  std::size_t feature_dim() const noexcept { return dim_; }
  std::size_t n_att() const noexcept { return n_att_; }
  nn::Parameter& V() noexcept { return v_; }
  nn::Parameter& V_bias() noexcept { return c_; }
  nn::Parameter& w() noexcept { return w_; }

  AggregatorKind kind() const override { return AggregatorKind::attention; }

  std::size_t output_dim(std::size_t feature_dim) const override {
    if (feature_dim != dim_) {
      throw ConfigError("attention: features of dimension " + std::to_string(feature_dim) +
                        " given to a layer built for " + std::to_string(dim_));
    }
    return dim_;
  }

  struct Evaluation {
    nn::RowMatrix activations;                 // tanh(V h + c), [rows x n_att]
    Eigen::VectorXd scores;                    // per row
    std::vector<std::vector<double>> weights;  // per bag, aligned with layout
    nn::Tensor pooled;                         // [bags x L]
  };

  /// Stateless evaluation of the layer on a feature matrix and bag layout.
  Evaluation evaluate(const nn::Tensor& features, const BagLayout& layout) const {
    if (features.rank() != 2 || features.dim(1) != dim_) {
      throw ConfigError("attention: features " + nn::to_string(features.shape()) +
                        " do not match V " + nn::to_string(v_.value.shape()));
    }
    layout.validate(features.dim(0));
    const std::size_t rows = features.dim(0);
    auto h = features.matrix(rows, dim_);
    auto v = v_.value.matrix(n_att_, dim_);
    nn::ConstVectorMap c(c_.value.data(), static_cast<Eigen::Index>(n_att_));
    nn::ConstVectorMap w(w_.value.data(), static_cast<Eigen::Index>(n_att_));

    Evaluation e;
    e.activations.noalias() = h * v.transpose();
    e.activations.rowwise() += c.transpose();
    e.activations = e.activations.array().tanh();
    e.scores.noalias() = e.activations * w;

    e.pooled = nn::Tensor({layout.size(), dim_});
    e.weights.resize(layout.size());
    for (std::size_t b = 0; b < layout.size(); ++b) {
      const auto& bag = layout.bags[b];
      auto& a = e.weights[b];
      a.resize(bag.size());
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t r : bag) top = std::max(top, e.scores[static_cast<Eigen::Index>(r)]);
      double sum = 0.0;
      for (std::size_t k = 0; k < bag.size(); ++k) {
        a[k] = std::exp(e.scores[static_cast<Eigen::Index>(bag[k])] - top);
        sum += a[k];
      }
      double* z = e.pooled.data() + b * dim_;
      for (std::size_t k = 0; k < bag.size(); ++k) {
        a[k] /= sum;
        const double* row = features.data() + bag[k] * dim_;
        for (std::size_t j = 0; j < dim_; ++j) z[j] += a[k] * row[j];
      }
    }
    return e;
  }

  nn::Tensor forward(const nn::Tensor& features, const BagLayout& layout) override {
    cache_ = evaluate(features, layout);
    features_ = features;
    layout_ = layout;
    cached_ = true;
    return cache_.pooled;
  }

  nn::Tensor backward(const nn::Tensor& grad_output) override {
    if (!cached_) throw StateError("attention: backward called before forward");
    const std::size_t bags = layout_.size();
    if (grad_output.size() != bags * dim_) {
      throw DimensionError("attention: upstream gradient " + nn::to_string(grad_output.shape()) +
                           " expected " + nn::to_string({bags, dim_}));
    }
    const std::size_t rows = features_.dim(0);
    nn::Tensor grad({rows, dim_});
    Eigen::VectorXd d_scores = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));

    for (std::size_t b = 0; b < bags; ++b) {
      const auto& bag = layout_.bags[b];
      const auto& a = cache_.weights[b];
      const double* dz = grad_output.data() + b * dim_;
      std::vector<double> da(bag.size());
      double weighted = 0.0;
      for (std::size_t k = 0; k < bag.size(); ++k) {
        const double* h = features_.data() + bag[k] * dim_;
        double* gh = grad.data() + bag[k] * dim_;
        double dot = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
          gh[j] += a[k] * dz[j];
          dot += dz[j] * h[j];
        }
        da[k] = dot;
        weighted += a[k] * dot;
      }
      for (std::size_t k = 0; k < bag.size(); ++k) {
        d_scores[static_cast<Eigen::Index>(bag[k])] += a[k] * (da[k] - weighted);
      }
    }

    nn::ConstVectorMap w(w_.value.data(), static_cast<Eigen::Index>(n_att_));
    nn::VectorMap dw(w_.value.grad().data(), static_cast<Eigen::Index>(n_att_));
    dw.noalias() += cache_.activations.transpose() * d_scores;

    // d/du of tanh(u): (1 - t^2), with du = ds * w
    nn::RowMatrix du = (d_scores * w.transpose()).array() *
                       (1.0 - cache_.activations.array().square());
    auto h = features_.matrix(rows, dim_);
    v_.value.grad_matrix(n_att_, dim_).noalias() += du.transpose() * h;
    nn::VectorMap dc(c_.value.grad().data(), static_cast<Eigen::Index>(n_att_));
    dc += du.colwise().sum().transpose();
    grad.matrix(rows, dim_).noalias() += du * v_.value.matrix(n_att_, dim_);
    return grad;
  }

  std::vector<nn::Parameter*> parameters() override { return {&v_, &c_, &w_}; }
  std::vector<const nn::Parameter*> parameters() const override { return {&v_, &c_, &w_}; }

  std::optional<std::vector<std::vector<double>>> last_weights() const override {
    if (!cached_) return std::nullopt;
    return cache_.weights;
  }

 private:
  std::size_t dim_;
  std::size_t n_att_;
  nn::Parameter v_;
  nn::Parameter c_;
  nn::Parameter w_;

  Evaluation cache_;
  nn::Tensor features_;
  BagLayout layout_;
  bool cached_ = false;
};

struct AttentionOutput {
  nn::Tensor z;                 // [L]
  std::vector<double> weights;  // [M], positive, summing to one
};

/// Attention pooling of a single bag of instance features [M x L].
inline AttentionOutput attention_aggregate(const AttentionLayer& layer, const nn::Tensor& features) {
  if (features.rank() != 2 || features.dim(0) == 0) {
    throw ArgumentError("attention: bag must be a non-empty [M x L] tensor, got " +
                        nn::to_string(features.shape()));
  }
  auto e = layer.evaluate(features, BagLayout::single(features.dim(0)));
  return {std::move(e.pooled).reshaped({layer.feature_dim()}), std::move(e.weights[0])};
}

}  // namespace mrsmil::pooling
