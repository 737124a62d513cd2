#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mrsmil/errors.hpp"
#include "mrsmil/nn/tensor.hpp"

namespace mrsmil::nn {

/// Row-wise softmax of a [batch x classes] tensor (max-subtracted).
inline Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw DimensionError("softmax: expected [batch x classes], got " + to_string(logits.shape()));
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = logits.data() + b * classes;
    double* dst = out.data() + b * classes;
    const double top = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      dst[c] = std::exp(row[c] - top);
      sum += dst[c];
    }
    for (std::size_t c = 0; c < classes; ++c) dst[c] /= sum;
  }
  return out;
}

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d logits
};

/// Mean over the batch of -log softmax(logits)[label], computed through
/// log-sum-exp. The gradient is (softmax - onehot) / batch.
inline LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || logits.dim(0) == 0) {
    throw DimensionError("cross entropy: logits " + to_string(logits.shape()) + " with " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  LossResult result;
  result.grad = softmax(logits);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ArgumentError("cross entropy: label " + std::to_string(label) + " out of range");
    }
    const double* row = logits.data() + b * classes;
    const double top = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - top);
    result.loss += (top + std::log(sum)) - row[label];
    double* g = result.grad.data() + b * classes;
    g[label] -= 1.0;
    for (std::size_t c = 0; c < classes; ++c) g[c] *= inv_batch;
  }
  result.loss *= inv_batch;
  return result;
}

}  // namespace mrsmil::nn
