#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mrsmil/errors.hpp"
#include "mrsmil/nn/tensor.hpp"

namespace mrsmil::pooling {

enum class AggregatorKind { single_instance, three_pool, attention };

inline std::string to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::single_instance: return "si";
    case AggregatorKind::three_pool: return "three_pool";
    case AggregatorKind::attention: return "attention";
  }
  return "?";
}

inline AggregatorKind parse_aggregator(std::string_view s) {
  if (s == "si" || s == "single_instance") return AggregatorKind::single_instance;
  if (s == "three_pool" || s == "3pool") return AggregatorKind::three_pool;
  if (s == "attention" || s == "att") return AggregatorKind::attention;
  throw ConfigError("unknown aggregator '" + std::string(s) + "'");
}

/// Bags as lists of row indices into a feature matrix. A row may appear in
/// several bags, or several times in one bag; gradients accumulate per row.
struct BagLayout {
  std::vector<std::vector<std::size_t>> bags;

  std::size_t size() const noexcept { return bags.size(); }

  /// One bag holding rows 0..rows-1 in order.
  static BagLayout single(std::size_t rows) {
    BagLayout layout;
    layout.bags.emplace_back(rows);
    for (std::size_t i = 0; i < rows; ++i) layout.bags[0][i] = i;
    return layout;
  }

  void validate(std::size_t rows) const {
    for (std::size_t b = 0; b < bags.size(); ++b) {
      if (bags[b].empty()) throw ArgumentError("bag " + std::to_string(b) + " is empty");
      for (std::size_t r : bags[b]) {
        if (r >= rows) {
          throw DimensionError("bag " + std::to_string(b) + " references row " +
                               std::to_string(r) + " of " + std::to_string(rows));
        }
      }
    }
  }
};

/// Maps instance features [rows x L] to one vector per bag [bags x out].
class Aggregator {
 public:
  virtual ~Aggregator() = default;

  virtual AggregatorKind kind() const = 0;
  virtual std::size_t output_dim(std::size_t feature_dim) const = 0;
  virtual nn::Tensor forward(const nn::Tensor& features, const BagLayout& layout) = 0;
  virtual nn::Tensor backward(const nn::Tensor& grad_output) = 0;

  virtual std::vector<nn::Parameter*> parameters() { return {}; }
  virtual std::vector<const nn::Parameter*> parameters() const { return {}; }

  /// Per-bag instance weights of the last forward pass, if the aggregator has any.
  virtual std::optional<std::vector<std::vector<double>>> last_weights() const {
    return std::nullopt;
  }

  /// Discrete choices of the last forward pass; see nn::Layer::append_switches.
  virtual void append_switches(std::vector<std::size_t>&) const {}
};

/// Pass-through for single-instance models: every bag must hold exactly one row.
class SingleInstance final : public Aggregator {
 public:
  AggregatorKind kind() const override { return AggregatorKind::single_instance; }
  std::size_t output_dim(std::size_t feature_dim) const override { return feature_dim; }

  nn::Tensor forward(const nn::Tensor& features, const BagLayout& layout) override {
    if (features.rank() != 2) {
      throw DimensionError("single instance: expected [rows x features], got " +
                           nn::to_string(features.shape()));
    }
    layout.validate(features.dim(0));
    const std::size_t dim = features.dim(1);
    rows_ = features.dim(0);
    picks_.clear();
    nn::Tensor out({layout.size(), dim});
    for (std::size_t b = 0; b < layout.size(); ++b) {
      if (layout.bags[b].size() != 1) {
        throw ArgumentError("single-instance model given a bag of " +
                            std::to_string(layout.bags[b].size()) + " instances");
      }
      const std::size_t r = layout.bags[b][0];
      picks_.push_back(r);
      std::copy_n(features.data() + r * dim, dim, out.data() + b * dim);
    }
    dim_ = dim;
    cached_ = true;
    return out;
  }

  nn::Tensor backward(const nn::Tensor& grad_output) override {
    if (!cached_) throw StateError("single instance: backward called before forward");
    if (grad_output.size() != picks_.size() * dim_) {
      throw DimensionError("single instance: upstream gradient " +
                           nn::to_string(grad_output.shape()));
    }
    nn::Tensor grad({rows_, dim_});
    for (std::size_t b = 0; b < picks_.size(); ++b) {
      for (std::size_t j = 0; j < dim_; ++j) grad[picks_[b] * dim_ + j] += grad_output[b * dim_ + j];
    }
    return grad;
  }

 private:
  std::vector<std::size_t> picks_;
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  bool cached_ = false;
};

}  // namespace mrsmil::pooling
