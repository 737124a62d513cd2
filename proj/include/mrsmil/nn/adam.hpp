#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <vector>

#include "mrsmil/errors.hpp"
#include "mrsmil/nn/tensor.hpp"

namespace mrsmil::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers mirror the parameter list they were created for.
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  AdamState() = default;
  AdamState(std::span<Parameter* const> params, AdamOptions opts) : options(opts) {
    first_moment.reserve(params.size());
    second_moment.reserve(params.size());
    for (const auto* p : params) {
      first_moment.emplace_back(p->size(), 0.0);
      second_moment.emplace_back(p->size(), 0.0);
    }
  }
};

/// One bias-corrected Adam update. Throws TrainingError naming the offending
/// parameter if any gradient is non-finite; nothing is modified in that case.
inline void adam_step(AdamState& state, std::span<Parameter* const> params) {
  if (params.size() != state.first_moment.size()) {
    throw DimensionError("adam: state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->size() != state.first_moment[i].size()) {
      throw DimensionError("adam: parameter '" + params[i]->name + "' changed shape");
    }
    const auto g = params[i]->value.grad();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j])) {
        std::ostringstream os;
        os << "non-finite gradient " << g[j] << " in parameter '" << params[i]->name
           << "' at element " << j << " (step " << state.step + 1 << ")";
        throw TrainingError(os.str());
      }
    }
  }

  ++state.step;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i]->value.values();
    const auto g = params[i]->value.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace mrsmil::nn
