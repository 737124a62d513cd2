#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrsmil/errors.hpp"

namespace mrsmil::data {

inline constexpr std::size_t kSpectrumLength = 288;

enum class Label { non_tumor = 0, tumor = 1 };

inline std::string to_string(Label l) { return l == Label::tumor ? "tumor" : "non_tumor"; }

inline Label parse_label(std::string_view s) {
  if (s == "tumor") return Label::tumor;
  if (s == "non_tumor") return Label::non_tumor;
  throw ArgumentError("unknown label '" + std::string(s) + "'");
}

inline int class_id(Label l) { return static_cast<int>(l); }

/// Which generator produced a spectrum; only known for synthetic data.
enum class SpectrumOrigin { unknown, healthy, tumor };

struct Spectrum {
  std::array<double, kSpectrumLength> values{};
  bool normalized = false;
  SpectrumOrigin origin = SpectrumOrigin::unknown;
};

struct PatientRecord {
  std::string patient_id;
  Label label = Label::non_tumor;
  std::vector<Spectrum> spectra;
};

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline Moments moments(std::span<const double> values) {
  Moments m;
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return m;
}

/// Zero mean, unit population standard deviation.
inline std::vector<double> standardize(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("spectrum contains non-finite values");
  }
  const auto m = moments(values);
  if (!(m.stddev > 0.0)) throw DegenerateInputError("constant spectrum has zero variance");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - m.mean) / m.stddev;
  return out;
}

inline Spectrum normalize_spectrum(std::span<const double> raw) {
  if (raw.size() != kSpectrumLength) {
    throw DimensionError("spectrum has " + std::to_string(raw.size()) + " points, expected " +
                         std::to_string(kSpectrumLength));
  }
  const auto z = standardize(raw);
  Spectrum s;
  std::copy(z.begin(), z.end(), s.values.begin());
  s.normalized = true;
  return s;
}

/// True if mean is 0 and std is 1 within `tol`.
inline bool is_standardized(std::span<const double> values, double tol = 1e-9) {
  const auto m = moments(values);
  return std::abs(m.mean) <= tol && std::abs(m.stddev - 1.0) <= tol;
}

inline std::size_t total_spectra(std::span<const PatientRecord> patients) {
  std::size_t n = 0;
  for (const auto& p : patients) n += p.spectra.size();
  return n;
}

}  // namespace mrsmil::data
