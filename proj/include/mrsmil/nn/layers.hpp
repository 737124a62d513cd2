#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mrsmil/errors.hpp"
#include "mrsmil/nn/tensor.hpp"

namespace mrsmil::nn {

// Layers operate on a leading batch axis; `output_shape` works on the
// per-sample shape (batch axis stripped). forward() caches what backward()
// needs, backward() accumulates into parameter gradients and returns the
// gradient with respect to the input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& input) = 0;
  virtual Tensor backward(const Tensor& grad_output) = 0;

  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::vector<const Parameter*> parameters() const { return {}; }

  /// Appends the discrete choices of the last forward pass (ReLU signs,
  /// pooling winners). Two passes with equal switches lie on the same linear
  /// piece, which gradient checks use to detect kinks. Smooth layers add nothing.
  virtual void append_switches(std::vector<std::size_t>&) const {}

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }
};

/// Glorot/Xavier uniform: U(-sqrt(6/(fan_in+fan_out)), +sqrt(...)).
inline void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out,
                           std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.values()) v = dist(rng);
}

inline Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = std::max(v, 0.0);
  return out;
}

inline Tensor tanh_forward(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = std::tanh(v);
  return out;
}

namespace detail {
inline void require_cache(bool cached, const char* layer) {
  if (!cached) {
    throw StateError(std::string(layer) + ": backward called before forward");
  }
}
}  // namespace detail

// ---------------------------------------------------------------------------

class Dense final : public Layer {
 public:
  Dense(std::size_t in_dim, std::size_t out_dim)
      : in_(in_dim), out_(out_dim), weights_("weights", {out_dim, in_dim}),
        bias_("bias", {out_dim}) {
    if (in_dim == 0 || out_dim == 0) throw ConfigError("dense: zero dimension");
  }

  void initialize(std::mt19937_64& rng) {
    glorot_uniform(weights_.value, in_, out_, rng);
    std::fill(bias_.value.values().begin(), bias_.value.values().end(), 0.0);
  }

  std::size_t in_dim() const noexcept { return in_; }
  std::size_t out_dim() const noexcept { return out_; }
  Parameter& weights() noexcept { return weights_; }
  Parameter& bias() noexcept { return bias_; }

  std::string kind() const override { return "dense"; }

  Shape output_shape(const Shape& input) const override {
    if (input.size() != 1 || input[0] != in_) {
      throw DimensionError("dense: input " + to_string(input) +
                           " incompatible with weights " +
                           to_string(weights_.value.shape()));
    }
    return {out_};
  }

  Tensor forward(const Tensor& input) override {
    if (input.rank() != 2 || input.dim(1) != in_) {
      throw DimensionError("dense: input " + to_string(input.shape()) +
                           " incompatible with weights " +
                           to_string(weights_.value.shape()));
    }
    input_ = input;
    cached_ = true;
    const std::size_t batch = input.dim(0);
    Tensor out({batch, out_});
    auto x = input.matrix(batch, in_);
    auto w = weights_.value.matrix(out_, in_);
    ConstVectorMap b(bias_.value.data(), static_cast<Eigen::Index>(out_));
    out.matrix(batch, out_).noalias() = x * w.transpose();
    out.matrix(batch, out_).rowwise() += b.transpose();
    return out;
  }

  Tensor backward(const Tensor& grad_output) override {
    detail::require_cache(cached_, "dense");
    const std::size_t batch = input_.dim(0);
    if (grad_output.shape() != Shape{batch, out_}) {
      throw DimensionError("dense: upstream gradient " +
                           to_string(grad_output.shape()) + " expected " +
                           to_string({batch, out_}));
    }
    auto g = grad_output.matrix(batch, out_);
    auto x = input_.matrix(batch, in_);
    weights_.value.grad_matrix(out_, in_).noalias() += g.transpose() * x;
    VectorMap db(bias_.value.grad().data(), static_cast<Eigen::Index>(out_));
    db += g.colwise().sum().transpose();
    Tensor grad_in({batch, in_});
    grad_in.matrix(batch, in_).noalias() = g * weights_.value.matrix(out_, in_);
    return grad_in;
  }

  std::vector<Parameter*> parameters() override { return {&weights_, &bias_}; }
  std::vector<const Parameter*> parameters() const override {
    return {&weights_, &bias_};
  }

 private:
  std::size_t in_;
  std::size_t out_;
  Parameter weights_;
  Parameter bias_;
  Tensor input_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

enum class Padding { valid, same };

struct Window1D {
  std::size_t out_len = 0;
  std::size_t pad_left = 0;
};

/// Output length and left padding for a sliding window over `len` samples.
inline Window1D window_geometry(std::size_t len, std::size_t kernel,
                                std::size_t stride, Padding padding) {
  if (padding == Padding::same) {
    const std::size_t out = (len + stride - 1) / stride;
    const std::size_t needed = (out - 1) * stride + kernel;
    const std::size_t total = needed > len ? needed - len : 0;
    return {out, total / 2};
  }
  if (len < kernel) {
    throw ConfigError("kernel of length " + std::to_string(kernel) +
                      " longer than input of length " + std::to_string(len));
  }
  return {(len - kernel) / stride + 1, 0};
}

struct Conv1DOptions {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  Padding padding = Padding::valid;
};

/// Cross-correlation over the last axis of [batch x channels x length].
/// Each batch row is an independent instance.
class Conv1D final : public Layer {
 public:
  explicit Conv1D(Conv1DOptions options)
      : opt_(options),
        kernels_("kernels", {options.out_channels, options.in_channels, options.kernel}),
        bias_("bias", {options.out_channels}) {
    if (opt_.in_channels == 0 || opt_.out_channels == 0 || opt_.kernel == 0 ||
        opt_.stride == 0) {
      throw ConfigError("conv1d: channels, kernel and stride must be positive");
    }
  }

  void initialize(std::mt19937_64& rng) {
    glorot_uniform(kernels_.value, opt_.in_channels * opt_.kernel,
                   opt_.out_channels * opt_.kernel, rng);
    std::fill(bias_.value.values().begin(), bias_.value.values().end(), 0.0);
  }

  const Conv1DOptions& options() const noexcept { return opt_; }
  Parameter& kernels() noexcept { return kernels_; }
  Parameter& bias() noexcept { return bias_; }

  std::string kind() const override { return "conv1d"; }

  Shape output_shape(const Shape& input) const override {
    if (input.size() != 2 || input[0] != opt_.in_channels) {
      throw DimensionError("conv1d: input " + to_string(input) + " expected " +
                           std::to_string(opt_.in_channels) + " channels");
    }
    const auto geo = window_geometry(input[1], opt_.kernel, opt_.stride, opt_.padding);
    return {opt_.out_channels, geo.out_len};
  }

  Tensor forward(const Tensor& input) override {
    if (input.rank() != 3) {
      throw DimensionError("conv1d: expected [batch x channels x length], got " +
                           to_string(input.shape()));
    }
    const Shape out_shape = output_shape({input.dim(1), input.dim(2)});
    input_ = input;
    cached_ = true;
    const std::size_t batch = input.dim(0);
    const std::size_t len = input.dim(2);
    const auto geo = window_geometry(len, opt_.kernel, opt_.stride, opt_.padding);
    const std::size_t out_len = geo.out_len;
    const std::size_t fo = opt_.out_channels;
    const std::size_t ck = opt_.in_channels * opt_.kernel;

    Tensor out({batch, out_shape[0], out_shape[1]});
    if (opt_.stride == 1) {
      forward_shifted(input, geo, out);
      return out;
    }
    auto w = kernels_.value.matrix(fo, ck);
    ConstVectorMap b(bias_.value.data(), static_cast<Eigen::Index>(fo));
    const std::size_t chunk = chunk_size(ck, out_len);
    RowMatrix cols;
    RowMatrix result;
    for (std::size_t n0 = 0; n0 < batch; n0 += chunk) {
      const std::size_t nc = std::min(chunk, batch - n0);
      im2col(input, n0, nc, len, geo, cols);
      result.noalias() = w * cols;
      for (std::size_t j = 0; j < nc; ++j) {
        double* dst = out.data() + (n0 + j) * fo * out_len;
        for (std::size_t f = 0; f < fo; ++f) {
          const double bf = b[static_cast<Eigen::Index>(f)];
          const double* src = result.data() + f * nc * out_len + j * out_len;
          for (std::size_t t = 0; t < out_len; ++t) dst[f * out_len + t] = src[t] + bf;
        }
      }
    }
    return out;
  }

  Tensor backward(const Tensor& grad_output) override {
    detail::require_cache(cached_, "conv1d");
    const std::size_t batch = input_.dim(0);
    const std::size_t len = input_.dim(2);
    const auto geo = window_geometry(len, opt_.kernel, opt_.stride, opt_.padding);
    const std::size_t out_len = geo.out_len;
    const std::size_t fo = opt_.out_channels;
    const std::size_t ck = opt_.in_channels * opt_.kernel;
    if (grad_output.shape() != Shape{batch, fo, out_len}) {
      throw DimensionError("conv1d: upstream gradient " +
                           to_string(grad_output.shape()) + " expected " +
                           to_string({batch, fo, out_len}));
    }

    Tensor grad_in(input_.shape());
    if (opt_.stride == 1) {
      backward_shifted(grad_output, geo, grad_in);
      return grad_in;
    }
    auto w = kernels_.value.matrix(fo, ck);
    auto dw = kernels_.value.grad_matrix(fo, ck);
    VectorMap db(bias_.value.grad().data(), static_cast<Eigen::Index>(fo));
    const std::size_t chunk = chunk_size(ck, out_len);
    RowMatrix cols;
    RowMatrix g;
    RowMatrix dcols;
    for (std::size_t n0 = 0; n0 < batch; n0 += chunk) {
      const std::size_t nc = std::min(chunk, batch - n0);
      im2col(input_, n0, nc, len, geo, cols);
      g.resize(static_cast<Eigen::Index>(fo), static_cast<Eigen::Index>(nc * out_len));
      for (std::size_t j = 0; j < nc; ++j) {
        const double* src = grad_output.data() + (n0 + j) * fo * out_len;
        for (std::size_t f = 0; f < fo; ++f) {
          double* dst = g.data() + f * nc * out_len + j * out_len;
          std::copy_n(src + f * out_len, out_len, dst);
        }
      }
      dw.noalias() += g * cols.transpose();
      db += g.rowwise().sum();
      dcols.noalias() = w.transpose() * g;
      col2im(dcols, n0, nc, len, geo, grad_in);
    }
    return grad_in;
  }

  std::vector<Parameter*> parameters() override { return {&kernels_, &bias_}; }
  std::vector<const Parameter*> parameters() const override {
    return {&kernels_, &bias_};
  }

 private:
  // Stride-1 path. A chunk of instances is laid out channel-major with
  // padding, X[c, j*lp + p], so that every kernel tap k is one GEMM
  // W_k [F x C] * X[:, k : k + width]. Columns that straddle two instances
  // are computed and discarded.
  using StridedMap = Eigen::Map<const RowMatrix, Eigen::Unaligned, Eigen::OuterStride<>>;

  std::size_t padded_length(std::size_t out_len) const { return out_len + opt_.kernel - 1; }

  std::size_t shifted_chunk(std::size_t lp) const {
    constexpr std::size_t kBudget = std::size_t{1} << 17;
    const std::size_t per = std::max(opt_.in_channels, opt_.out_channels) * lp;
    return std::max<std::size_t>(1, kBudget / std::max<std::size_t>(1, per));
  }

  void pack_padded(const Tensor& x, std::size_t n0, std::size_t nc, std::size_t len, const Window1D& geo,
                   RowMatrix& packed) const {
    const std::size_t cin = opt_.in_channels;
    const std::size_t lp = padded_length(geo.out_len);
    packed.setZero(static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(nc * lp));
    const std::size_t copy = std::min(len, lp - geo.pad_left);
    for (std::size_t c = 0; c < cin; ++c) {
      double* row = packed.data() + c * nc * lp;
      for (std::size_t j = 0; j < nc; ++j) {
        std::copy_n(x.data() + ((n0 + j) * cin + c) * len, copy, row + j * lp + geo.pad_left);
      }
    }
  }

  // Taps of the kernel as a [F x C] matrix (column stride K in the kernel tensor).
  Eigen::Map<const RowMatrix, Eigen::Unaligned, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>> tap(
      const double* base, std::size_t k) const {
    using S = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
    return {base + k, static_cast<Eigen::Index>(opt_.out_channels), static_cast<Eigen::Index>(opt_.in_channels),
            S(static_cast<Eigen::Index>(opt_.in_channels * opt_.kernel), static_cast<Eigen::Index>(opt_.kernel))};
  }

  void forward_shifted(const Tensor& input, const Window1D& geo, Tensor& out) const {
    const std::size_t batch = input.dim(0);
    const std::size_t len = input.dim(2);
    const std::size_t fo = opt_.out_channels;
    const std::size_t out_len = geo.out_len;
    const std::size_t lp = padded_length(out_len);
    const std::size_t chunk = shifted_chunk(lp);
    RowMatrix packed;
    RowMatrix result;
    RowMatrix w_tap;
    for (std::size_t n0 = 0; n0 < batch; n0 += chunk) {
      const std::size_t nc = std::min(chunk, batch - n0);
      pack_padded(input, n0, nc, len, geo, packed);
      const std::size_t width = nc * lp - (opt_.kernel - 1);
      result.setZero(static_cast<Eigen::Index>(fo), static_cast<Eigen::Index>(width));
      for (std::size_t k = 0; k < opt_.kernel; ++k) {
        w_tap = tap(kernels_.value.data(), k);
        StridedMap xk(packed.data() + k, packed.rows(), static_cast<Eigen::Index>(width),
                      Eigen::OuterStride<>(packed.cols()));
        result.noalias() += w_tap * xk;
      }
      for (std::size_t j = 0; j < nc; ++j) {
        double* dst = out.data() + (n0 + j) * fo * out_len;
        for (std::size_t f = 0; f < fo; ++f) {
          const double bf = bias_.value[f];
          const double* src = result.data() + f * width + j * lp;
          for (std::size_t t = 0; t < out_len; ++t) dst[f * out_len + t] = src[t] + bf;
        }
      }
    }
  }

  void backward_shifted(const Tensor& grad_output, const Window1D& geo, Tensor& grad_in) {
    const std::size_t batch = input_.dim(0);
    const std::size_t len = input_.dim(2);
    const std::size_t cin = opt_.in_channels;
    const std::size_t fo = opt_.out_channels;
    const std::size_t out_len = geo.out_len;
    const std::size_t lp = padded_length(out_len);
    const std::size_t chunk = shifted_chunk(lp);
    const std::size_t kernel = opt_.kernel;
    auto dkernels = kernels_.value.grad();
    auto dbias = bias_.value.grad();
    RowMatrix packed;
    RowMatrix g;
    RowMatrix dpacked;
    RowMatrix w_tap;
    RowMatrix dw_tap;
    for (std::size_t n0 = 0; n0 < batch; n0 += chunk) {
      const std::size_t nc = std::min(chunk, batch - n0);
      pack_padded(input_, n0, nc, len, geo, packed);
      const std::size_t width = nc * lp - (kernel - 1);
      g.setZero(static_cast<Eigen::Index>(fo), static_cast<Eigen::Index>(width));
      for (std::size_t j = 0; j < nc; ++j) {
        const double* src = grad_output.data() + (n0 + j) * fo * out_len;
        for (std::size_t f = 0; f < fo; ++f) {
          double* dst = g.data() + f * width + j * lp;
          double sum = 0.0;
          for (std::size_t t = 0; t < out_len; ++t) sum += (dst[t] = src[f * out_len + t]);
          dbias[f] += sum;
        }
      }
      dpacked.setZero(static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(nc * lp));
      for (std::size_t k = 0; k < kernel; ++k) {
        StridedMap xk(packed.data() + k, packed.rows(), static_cast<Eigen::Index>(width),
                      Eigen::OuterStride<>(packed.cols()));
        dw_tap.noalias() = g * xk.transpose();
        for (std::size_t f = 0; f < fo; ++f)
          for (std::size_t c = 0; c < cin; ++c) dkernels[(f * cin + c) * kernel + k] += dw_tap(f, c);
        w_tap = tap(kernels_.value.data(), k);
        Eigen::Map<RowMatrix, Eigen::Unaligned, Eigen::OuterStride<>> dxk(
            dpacked.data() + k, dpacked.rows(), static_cast<Eigen::Index>(width), Eigen::OuterStride<>(dpacked.cols()));
        dxk.noalias() += w_tap.transpose() * g;
      }
      const std::size_t copy = std::min(len, lp - geo.pad_left);
      for (std::size_t c = 0; c < cin; ++c) {
        const double* row = dpacked.data() + c * nc * lp;
        for (std::size_t j = 0; j < nc; ++j) {
          std::copy_n(row + j * lp + geo.pad_left, copy, grad_in.data() + ((n0 + j) * cin + c) * len);
        }
      }
    }
  }

  static std::size_t chunk_size(std::size_t ck, std::size_t out_len) {
    constexpr std::size_t kBudget = std::size_t{1} << 21;
    return std::max<std::size_t>(1, kBudget / std::max<std::size_t>(1, ck * out_len));
  }

  // cols(c*K + k, j*out_len + t) = x[n0+j][c][t*stride + k - pad_left]
  void im2col(const Tensor& x, std::size_t n0, std::size_t nc, std::size_t len,
              const Window1D& geo, RowMatrix& cols) const {
    const std::size_t cin = opt_.in_channels;
    const std::size_t k = opt_.kernel;
    const std::size_t out_len = geo.out_len;
    const std::size_t width = nc * out_len;
    cols.resize(static_cast<Eigen::Index>(cin * k), static_cast<Eigen::Index>(width));
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        double* row = cols.data() + (c * k + kk) * width;
        for (std::size_t j = 0; j < nc; ++j) {
          const double* src = x.data() + ((n0 + j) * cin + c) * len;
          double* dst = row + j * out_len;
          for (std::size_t t = 0; t < out_len; ++t) {
            const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * opt_.stride + kk) -
                                       static_cast<std::ptrdiff_t>(geo.pad_left);
            dst[t] = (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) ? src[pos] : 0.0;
          }
        }
      }
    }
  }

  void col2im(const RowMatrix& dcols, std::size_t n0, std::size_t nc, std::size_t len,
              const Window1D& geo, Tensor& grad_in) const {
    const std::size_t cin = opt_.in_channels;
    const std::size_t k = opt_.kernel;
    const std::size_t out_len = geo.out_len;
    const std::size_t width = nc * out_len;
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double* row = dcols.data() + (c * k + kk) * width;
        for (std::size_t j = 0; j < nc; ++j) {
          double* dst = grad_in.data() + ((n0 + j) * cin + c) * len;
          const double* src = row + j * out_len;
          for (std::size_t t = 0; t < out_len; ++t) {
            const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * opt_.stride + kk) -
                                       static_cast<std::ptrdiff_t>(geo.pad_left);
            if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) dst[pos] += src[t];
          }
        }
      }
    }
  }

  Conv1DOptions opt_;
  Parameter kernels_;
  Parameter bias_;
  Tensor input_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

class ReLU final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Shape output_shape(const Shape& input) const override { return input; }

  Tensor forward(const Tensor& input) override {
    output_ = relu(input);
    cached_ = true;
    return output_;
  }

  Tensor backward(const Tensor& grad_output) override {
    detail::require_cache(cached_, "relu");
    if (grad_output.shape() != output_.shape()) {
      throw DimensionError("relu: upstream gradient " + to_string(grad_output.shape()) +
                           " expected " + to_string(output_.shape()));
    }
    Tensor grad = grad_output;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (output_[i] <= 0.0) grad[i] = 0.0;
    }
    return grad;
  }

  void append_switches(std::vector<std::size_t>& out) const override {
    for (std::size_t i = 0; i < output_.size(); ++i) out.push_back(output_[i] > 0.0);
  }

 private:
  Tensor output_;
  bool cached_ = false;
};

/// Max over sliding windows of the last axis; "same" pads with -inf.
/// Backward routes to the first index attaining the maximum.
class MaxPool1D final : public Layer {
 public:
  MaxPool1D(std::size_t kernel, std::size_t stride, Padding padding = Padding::valid)
      : kernel_(kernel), stride_(stride), padding_(padding) {
    if (kernel == 0 || stride == 0) throw ConfigError("maxpool1d: kernel and stride must be positive");
  }

  std::string kind() const override { return "maxpool1d"; }

  Shape output_shape(const Shape& input) const override {
    if (input.size() != 2) {
      throw DimensionError("maxpool1d: expected [channels x length], got " + to_string(input));
    }
    return {input[0], window_geometry(input[1], kernel_, stride_, padding_).out_len};
  }

  Tensor forward(const Tensor& input) override {
    if (input.rank() != 3) {
      throw DimensionError("maxpool1d: expected [batch x channels x length], got " +
                           to_string(input.shape()));
    }
    const std::size_t rows = input.dim(0) * input.dim(1);
    const std::size_t len = input.dim(2);
    const auto geo = window_geometry(len, kernel_, stride_, padding_);
    Tensor out({input.dim(0), input.dim(1), geo.out_len});
    argmax_.assign(out.size(), 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* src = input.data() + r * len;
      for (std::size_t t = 0; t < geo.out_len; ++t) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_at = 0;
        bool found = false;
        for (std::size_t kk = 0; kk < kernel_; ++kk) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride_ + kk) -
                                     static_cast<std::ptrdiff_t>(geo.pad_left);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
          if (!found || src[pos] > best) {
            best = src[pos];
            best_at = static_cast<std::size_t>(pos);
            found = true;
          }
        }
        out[r * geo.out_len + t] = best;
        argmax_[r * geo.out_len + t] = r * len + best_at;
      }
    }
    input_shape_ = input.shape();
    cached_ = true;
    return out;
  }

  Tensor backward(const Tensor& grad_output) override {
    detail::require_cache(cached_, "maxpool1d");
    if (grad_output.size() != argmax_.size()) {
      throw DimensionError("maxpool1d: upstream gradient " + to_string(grad_output.shape()));
    }
    Tensor grad(input_shape_);
    for (std::size_t i = 0; i < argmax_.size(); ++i) grad[argmax_[i]] += grad_output[i];
    return grad;
  }

  void append_switches(std::vector<std::size_t>& out) const override {
    out.insert(out.end(), argmax_.begin(), argmax_.end());
  }

 private:
  std::size_t kernel_;
  std::size_t stride_;
  Padding padding_;
  std::vector<std::size_t> argmax_;
  Shape input_shape_;
  bool cached_ = false;
};

/// [batch x channels x length] -> [batch x channels] by averaging over length.
class GlobalAvgPool1D final : public Layer {
 public:
  std::string kind() const override { return "global_avg_pool1d"; }

  Shape output_shape(const Shape& input) const override {
    if (input.size() != 2) {
      throw DimensionError("global_avg_pool1d: expected [channels x length], got " +
                           to_string(input));
    }
    return {input[0]};
  }

  Tensor forward(const Tensor& input) override {
    if (input.rank() != 3 || input.dim(2) == 0) {
      throw DimensionError("global_avg_pool1d: expected [batch x channels x length], got " +
                           to_string(input.shape()));
    }
    input_shape_ = input.shape();
    cached_ = true;
    const std::size_t rows = input.dim(0) * input.dim(1);
    const std::size_t len = input.dim(2);
    Tensor out({input.dim(0), input.dim(1)});
    auto m = input.matrix(rows, len);
    for (std::size_t r = 0; r < rows; ++r) {
      out[r] = m.row(static_cast<Eigen::Index>(r)).mean();
    }
    return out;
  }

  Tensor backward(const Tensor& grad_output) override {
    detail::require_cache(cached_, "global_avg_pool1d");
    const std::size_t rows = input_shape_[0] * input_shape_[1];
    const std::size_t len = input_shape_[2];
    if (grad_output.size() != rows) {
      throw DimensionError("global_avg_pool1d: upstream gradient " +
                           to_string(grad_output.shape()));
    }
    Tensor grad(input_shape_);
    const double scale = 1.0 / static_cast<double>(len);
    for (std::size_t r = 0; r < rows; ++r) {
      std::fill_n(grad.data() + r * len, len, grad_output[r] * scale);
    }
    return grad;
  }

 private:
  Shape input_shape_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

class Sequential final : public Layer {
 public:
  Sequential() = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  void push_back(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }
  const Layer& at(std::size_t i) const { return *layers_.at(i); }

  std::string kind() const override { return "sequential"; }

  Shape output_shape(const Shape& input) const override {
    Shape s = input;
    for (const auto& l : layers_) s = l->output_shape(s);
    return s;
  }

  Tensor forward(const Tensor& input) override {
    Tensor x = input;
    for (auto& l : layers_) x = l->forward(x);
    return x;
  }

  Tensor backward(const Tensor& grad_output) override {
    Tensor g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
      auto p = l->parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }
  std::vector<const Parameter*> parameters() const override {
    std::vector<const Parameter*> out;
    for (const auto& l : layers_) {
      auto p = static_cast<const Layer&>(*l).parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  void append_switches(std::vector<std::size_t>& out) const override {
    for (const auto& l : layers_) l->append_switches(out);
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace mrsmil::nn
