#pragma once

#include <cstddef>
#include <vector>

#include "mrsmil/errors.hpp"
#include "mrsmil/nn/tensor.hpp"
#include "mrsmil/pooling/aggregator.hpp"

namespace mrsmil::pooling {

/// Concatenation of column-wise min, max and mean over each bag:
/// [rows x L] -> [bags x 3L], laid out as (min | max | mean).
///
/// Min and max are exact under any reordering of a bag; the mean is summed
/// in bag order, so it agrees up to rounding. In backward the min/max
/// gradient goes to the first bag position attaining the extremum.
class ThreePool final : public Aggregator {
 public:
  AggregatorKind kind() const override { return AggregatorKind::three_pool; }
  std::size_t output_dim(std::size_t feature_dim) const override { return 3 * feature_dim; }

  nn::Tensor forward(const nn::Tensor& features, const BagLayout& layout) override {
    if (features.rank() != 2) {
      throw DimensionError("three_pool: expected [rows x features], got " +
                           nn::to_string(features.shape()));
    }
    layout.validate(features.dim(0));
    rows_ = features.dim(0);
    dim_ = features.dim(1);
    const std::size_t bags = layout.size();
    nn::Tensor out({bags, 3 * dim_});
    argmin_.assign(bags * dim_, 0);
    argmax_.assign(bags * dim_, 0);
    layout_ = layout;

    for (std::size_t b = 0; b < bags; ++b) {
      const auto& rows = layout.bags[b];
      double* mn = out.data() + b * 3 * dim_;
      double* mx = mn + dim_;
      double* mean = mx + dim_;
      const double* first = features.data() + rows[0] * dim_;
      for (std::size_t j = 0; j < dim_; ++j) {
        mn[j] = mx[j] = mean[j] = first[j];
        argmin_[b * dim_ + j] = argmax_[b * dim_ + j] = rows[0];
      }
      for (std::size_t k = 1; k < rows.size(); ++k) {
        const double* row = features.data() + rows[k] * dim_;
        for (std::size_t j = 0; j < dim_; ++j) {
          if (row[j] < mn[j]) {
            mn[j] = row[j];
            argmin_[b * dim_ + j] = rows[k];
          }
          if (row[j] > mx[j]) {
            mx[j] = row[j];
            argmax_[b * dim_ + j] = rows[k];
          }
          mean[j] += row[j];
        }
      }
      const double inv = 1.0 / static_cast<double>(rows.size());
      for (std::size_t j = 0; j < dim_; ++j) mean[j] *= inv;
    }
    cached_ = true;
    return out;
  }

  nn::Tensor backward(const nn::Tensor& grad_output) override {
    if (!cached_) throw StateError("three_pool: backward called before forward");
    const std::size_t bags = layout_.size();
    if (grad_output.size() != bags * 3 * dim_) {
      throw DimensionError("three_pool: upstream gradient " + nn::to_string(grad_output.shape()) +
                           " expected " + nn::to_string({bags, 3 * dim_}));
    }
    nn::Tensor grad({rows_, dim_});
    for (std::size_t b = 0; b < bags; ++b) {
      const double* g_min = grad_output.data() + b * 3 * dim_;
      const double* g_max = g_min + dim_;
      const double* g_mean = g_max + dim_;
      for (std::size_t j = 0; j < dim_; ++j) {
        grad[argmin_[b * dim_ + j] * dim_ + j] += g_min[j];
        grad[argmax_[b * dim_ + j] * dim_ + j] += g_max[j];
      }
      const auto& rows = layout_.bags[b];
      const double inv = 1.0 / static_cast<double>(rows.size());
      for (std::size_t r : rows) {
        double* dst = grad.data() + r * dim_;
        for (std::size_t j = 0; j < dim_; ++j) dst[j] += g_mean[j] * inv;
      }
    }
    return grad;
  }

  void append_switches(std::vector<std::size_t>& out) const override {
    out.insert(out.end(), argmin_.begin(), argmin_.end());
    out.insert(out.end(), argmax_.begin(), argmax_.end());
  }

 private:
  BagLayout layout_;
  std::vector<std::size_t> argmin_;
  std::vector<std::size_t> argmax_;
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  bool cached_ = false;
};

/// 3Pool of a single bag of instance features [M x L] -> [3L].
inline nn::Tensor three_pool(const nn::Tensor& features) {
  if (features.rank() != 2 || features.dim(0) == 0) {
    throw ArgumentError("three_pool: bag must be a non-empty [M x L] tensor, got " +
                        nn::to_string(features.shape()));
  }
  ThreePool pool;
  auto out = pool.forward(features, BagLayout::single(features.dim(0)));
  return std::move(out).reshaped({out.size()});
}

/// Gradient of three_pool(features) with respect to features for upstream [3L].
inline nn::Tensor three_pool_backward(const nn::Tensor& features, const nn::Tensor& upstream) {
  if (features.rank() != 2 || features.dim(0) == 0) {
    throw ArgumentError("three_pool: bag must be a non-empty [M x L] tensor, got " +
                        nn::to_string(features.shape()));
  }
  ThreePool pool;
  pool.forward(features, BagLayout::single(features.dim(0)));
  return pool.backward(upstream.reshaped({1, upstream.size()}));
}

}  // namespace mrsmil::pooling
