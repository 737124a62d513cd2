#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mrsmil/errors.hpp"
#include "mrsmil/nn/layers.hpp"

namespace mrsmil::models {

/// Channel widths of the four parallel branches of an inception block:
/// 1-length conv, 3-length conv, 5-length conv, 3-length max pool + 1-length conv.
struct InceptionWidths {
  std::size_t conv1 = 8;
  std::size_t conv3 = 16;
  std::size_t conv5 = 16;
  std::size_t pool = 8;

  std::size_t total() const noexcept { return conv1 + conv3 + conv5 + pool; }
};

/// 1-D inception block on [batch x channels x length]. All branches use
/// "same" padding and stride 1, so outputs concatenate along channels.
class InceptionBlock final : public nn::Layer {
 public:
  InceptionBlock(std::size_t in_channels, InceptionWidths widths)
      : in_(in_channels), widths_(widths) {
    add_conv_branch(widths.conv1, 1);
    add_conv_branch(widths.conv3, 3);
    add_conv_branch(widths.conv5, 5);
    auto& pooled = branches_.emplace_back();
    pooled.emplace<nn::MaxPool1D>(3, 1, nn::Padding::same);
    pooled.emplace<nn::Conv1D>(nn::Conv1DOptions{in_, widths.pool, 1, 1, nn::Padding::same});
    pooled.emplace<nn::ReLU>();
  }

  void initialize(std::mt19937_64& rng) {
    for (auto& b : branches_) {
      for (std::size_t i = 0; i < b.size(); ++i) {
        if (auto* conv = dynamic_cast<nn::Conv1D*>(&b.at(i))) conv->initialize(rng);
      }
    }
  }

  const InceptionWidths& widths() const noexcept { return widths_; }
  std::size_t branch_count() const noexcept { return branches_.size(); }
  std::array<std::size_t, 4> branch_channels() const {
    return {widths_.conv1, widths_.conv3, widths_.conv5, widths_.pool};
  }

  std::string kind() const override { return "inception_block"; }

  nn::Shape output_shape(const nn::Shape& input) const override {
    std::size_t channels = 0;
    std::size_t len = 0;
    for (const auto& b : branches_) {
      const auto s = b.output_shape(input);
      channels += s[0];
      len = s[1];
    }
    return {channels, len};
  }

  nn::Tensor forward(const nn::Tensor& input) override {
    if (input.rank() != 3 || input.dim(1) != in_) {
      throw DimensionError("inception block: input " + nn::to_string(input.shape()) +
                           " expected " + std::to_string(in_) + " channels");
    }
    const std::size_t batch = input.dim(0);
    const std::size_t len = input.dim(2);
    const std::size_t total = widths_.total();
    nn::Tensor out({batch, total, len});
    std::size_t offset = 0;
    for (auto& b : branches_) {
      const nn::Tensor y = b.forward(input);
      const std::size_t ch = y.dim(1);
      for (std::size_t n = 0; n < batch; ++n) {
        std::copy_n(y.data() + n * ch * len, ch * len, out.data() + (n * total + offset) * len);
      }
      offset += ch;
    }
    batch_ = batch;
    len_ = len;
    cached_ = true;
    return out;
  }

  nn::Tensor backward(const nn::Tensor& grad_output) override {
    if (!cached_) throw StateError("inception block: backward called before forward");
    const std::size_t total = widths_.total();
    if (grad_output.shape() != nn::Shape{batch_, total, len_}) {
      throw DimensionError("inception block: upstream gradient " +
                           nn::to_string(grad_output.shape()));
    }
    nn::Tensor grad_in({batch_, in_, len_});
    std::size_t offset = 0;
    const auto channels = branch_channels();
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      const std::size_t ch = channels[i];
      nn::Tensor g({batch_, ch, len_});
      for (std::size_t n = 0; n < batch_; ++n) {
        std::copy_n(grad_output.data() + (n * total + offset) * len_, ch * len_,
                    g.data() + n * ch * len_);
      }
      const nn::Tensor gi = branches_[i].backward(g);
      for (std::size_t k = 0; k < gi.size(); ++k) grad_in[k] += gi[k];
      offset += ch;
    }
    return grad_in;
  }

  std::vector<nn::Parameter*> parameters() override {
    std::vector<nn::Parameter*> out;
    for (auto& b : branches_) {
      auto p = b.parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }
  std::vector<const nn::Parameter*> parameters() const override {
    std::vector<const nn::Parameter*> out;
    for (const auto& b : branches_) {
      auto p = b.parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  void append_switches(std::vector<std::size_t>& out) const override {
    for (const auto& b : branches_) b.append_switches(out);
  }

 private:
  void add_conv_branch(std::size_t width, std::size_t kernel) {
    auto& branch = branches_.emplace_back();
    branch.emplace<nn::Conv1D>(nn::Conv1DOptions{in_, width, kernel, 1, nn::Padding::same});
    branch.emplace<nn::ReLU>();
  }

  std::size_t in_;
  InceptionWidths widths_;
  std::vector<nn::Sequential> branches_;
  std::size_t batch_ = 0;
  std::size_t len_ = 0;
  bool cached_ = false;
};

}  // namespace mrsmil::models
