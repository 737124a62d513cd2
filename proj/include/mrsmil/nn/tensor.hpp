#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mrsmil/errors.hpp"

namespace mrsmil::nn {

using Shape = std::vector<std::size_t>;

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
// Storage is aligned to Eigen's widest packet so vectorized kernels split
// work the same way on every run, independent of where the heap puts data.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major f64 array with an optional gradient buffer of the same
/// shape. Holds inputs, activations and parameters alike.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(values.begin(), values.end()) {
    if (element_count(shape_) != values_.size()) {
      throw DimensionError("tensor shape " + nn::to_string(shape_) +
                           " does not match " + std::to_string(values_.size()) +
                           " values");
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool has_grad() const noexcept { return grad_.has_value(); }

  void ensure_grad() {
    if (!grad_) grad_.emplace(values_.size(), 0.0);
  }

  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
  }

  std::span<double> grad() {
    if (!grad_) throw StateError("tensor has no gradient buffer");
    return *grad_;
  }
  std::span<const double> grad() const {
    if (!grad_) throw StateError("tensor has no gradient buffer");
    return *grad_;
  }

  /// Same values viewed under a new shape with equal element count.
  Tensor reshaped(Shape shape) const& {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }
  Tensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }

  void reshape(Shape shape) {
    if (element_count(shape) != values_.size()) {
      throw DimensionError("cannot reshape " + nn::to_string(shape_) + " to " +
                           nn::to_string(shape));
    }
    shape_ = std::move(shape);
  }

  RowMatrixMap matrix(std::size_t rows, std::size_t cols) {
    check_matrix(rows, cols);
    return {values_.data(), static_cast<Eigen::Index>(rows),
            static_cast<Eigen::Index>(cols)};
  }
  ConstRowMatrixMap matrix(std::size_t rows, std::size_t cols) const {
    check_matrix(rows, cols);
    return {values_.data(), static_cast<Eigen::Index>(rows),
            static_cast<Eigen::Index>(cols)};
  }

  /// View of a rank-2 tensor (or a rank-1 tensor as a single row).
  RowMatrixMap matrix() { return matrix(rows2d(), cols2d()); }
  ConstRowMatrixMap matrix() const { return matrix(rows2d(), cols2d()); }

  RowMatrixMap grad_matrix(std::size_t rows, std::size_t cols) {
    check_matrix(rows, cols);
    return {grad().data(), static_cast<Eigen::Index>(rows),
            static_cast<Eigen::Index>(cols)};
  }

 private:
  void check_matrix(std::size_t rows, std::size_t cols) const {
    if (rows * cols != values_.size()) {
      throw DimensionError("matrix view " + std::to_string(rows) + "x" +
                           std::to_string(cols) + " of tensor " +
                           nn::to_string(shape_));
    }
  }
  std::size_t rows2d() const { return shape_.size() >= 2 ? shape_[0] : 1; }
  std::size_t cols2d() const {
    return shape_.empty() ? 0 : values_.size() / rows2d();
  }

  Shape shape_;
  Buffer values_;
  std::optional<Buffer> grad_;
};

/// Trainable tensor with a name; the gradient buffer is always allocated.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name_, Shape shape) : name(std::move(name_)), value(std::move(shape)) {
    value.ensure_grad();
  }

  std::string name;
  Tensor value;

  std::size_t size() const noexcept { return value.size(); }
};

}  // namespace mrsmil::nn
