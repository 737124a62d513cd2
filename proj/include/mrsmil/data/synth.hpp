#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrsmil/data/rng.hpp"
#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/errors.hpp"

namespace mrsmil::data {

// The spectrum axis runs from 4.3 ppm (index 0) down to 0.5 ppm (index 287).
inline constexpr double kPpmHigh = 4.3;
inline constexpr double kPpmLow = 0.5;

inline double ppm_at(std::size_t index) {
  return kPpmHigh - static_cast<double>(index) * (kPpmHigh - kPpmLow) /
                        static_cast<double>(kSpectrumLength - 1);
}

inline double index_of_ppm(double ppm) {
  return (kPpmHigh - ppm) * static_cast<double>(kSpectrumLength - 1) / (kPpmHigh - kPpmLow);
}

/// One metabolite resonance: a Gaussian line at `ppm` with standard
/// deviation `width` (ppm). Each patient draws a healthy-tissue amplitude
/// from [healthy_min, healthy_max]; tumor tissue multiplies it by a factor
/// drawn per spectrum from [tumor_min, tumor_max].
struct PeakSpec {
  std::string name;
  double ppm = 0.0;
  double width = 0.03;
  double healthy_min = 0.0;
  double healthy_max = 0.0;
  double tumor_min = 1.0;
  double tumor_max = 1.0;
};

inline std::vector<PeakSpec> default_peaks() {
  // name, ppm, width, healthy amplitude range, tumor factor range
  return {
      {"Cr2", 3.90, 0.030, 0.40, 0.60, 0.80, 0.90},
      {"MI/Gly", 3.50, 0.030, 0.30, 0.50, 1.10, 1.30},
      {"Ins", 3.61, 0.030, 0.50, 0.70, 0.80, 0.90},
      {"Cho", 3.19, 0.030, 0.72, 0.85, 1.40, 1.60},
      {"Cr", 3.03, 0.030, 0.90, 1.00, 0.80, 0.90},
      {"Glu", 2.30, 0.080, 0.30, 0.50, 1.10, 1.30},
      {"NAA", 2.01, 0.030, 1.50, 2.00, 0.60, 0.70},
      {"Lac", 1.40, 0.040, 0.10, 0.20, 1.50, 2.00},
      {"Lip", 0.90, 0.080, 0.10, 0.20, 1.50, 2.00},
  };
}

struct SynthConfig {
  std::size_t patients_per_class = 200;
  double spectra_mean = 17.0;  // spectra per patient ~ max(min, round(N(mean, std)))
  double spectra_std = 15.0;
  std::size_t spectra_min = 1;
  std::vector<PeakSpec> peaks = default_peaks();
  double healthy_fraction = 0.3;  // share of a tumor patient's spectra from healthy tissue
  // Inter-subject variation along the tumor direction: each patient draws
  // s ~ U(0, patient_shift) and every healthy amplitude is scaled by g^s,
  // g being the geometric mean of the peak's tumor factor range.
  double patient_shift = 1.5;
  double instance_jitter = 0.03;  // per-spectrum relative amplitude variation
  double noise_std = 0.2;         // white noise before normalization
  std::uint64_t seed = 0;

  void validate() const {
    if (patients_per_class == 0) throw ConfigError("patients_per_class must be >= 1");
    if (!(spectra_mean > 0.0) || !(spectra_std >= 0.0) || spectra_min == 0) {
      throw ConfigError("spectra-per-patient distribution needs mean > 0, std >= 0, min >= 1");
    }
    if (!(healthy_fraction >= 0.0 && healthy_fraction < 1.0)) {
      throw ConfigError("healthy_fraction must lie in [0, 1), got " + std::to_string(healthy_fraction));
    }
    // A tumor patient with the mean spectrum count must keep at least one
    // tumor-like spectrum.
    if (healthy_fraction > 1.0 - 1.0 / std::max(spectra_mean, 1.0)) {
      throw ConfigError("healthy_fraction " + std::to_string(healthy_fraction) +
                        " leaves no tumor-like spectra at the mean of " + std::to_string(spectra_mean) +
                        " spectra per patient");
    }
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
    if (!(patient_shift >= 0.0)) throw ConfigError("patient_shift must be >= 0");
    if (!(instance_jitter >= 0.0 && instance_jitter < 1.0)) {
      throw ConfigError("instance_jitter must lie in [0, 1)");
    }
    if (peaks.empty()) throw ConfigError("peak table is empty");
    for (const auto& p : peaks) {
      const std::string where = "peak '" + p.name + "': ";
      if (!(p.ppm >= kPpmLow && p.ppm <= kPpmHigh)) {
        throw ConfigError(where + "position outside the modeled ppm axis");
      }
      if (!(p.width > 0.0)) throw ConfigError(where + "width must be positive");
      if (!(p.healthy_min >= 0.0 && p.healthy_min <= p.healthy_max)) {
        throw ConfigError(where + "invalid healthy amplitude range");
      }
      if (!(p.tumor_min >= 0.0 && p.tumor_min <= p.tumor_max)) {
        throw ConfigError(where + "invalid tumor factor range");
      }
    }
  }
};

inline void to_json(nlohmann::json& j, const PeakSpec& p) {
  j = nlohmann::json{{"name", p.name},
                     {"ppm", p.ppm},
                     {"width", p.width},
                     {"healthy", {p.healthy_min, p.healthy_max}},
                     {"tumor_factor", {p.tumor_min, p.tumor_max}}};
}

inline void from_json(const nlohmann::json& j, PeakSpec& p) {
  p.name = j.at("name").get<std::string>();
  p.ppm = j.at("ppm").get<double>();
  p.width = j.at("width").get<double>();
  const auto& h = j.at("healthy");
  const auto& t = j.at("tumor_factor");
  if (!h.is_array() || h.size() != 2 || !t.is_array() || t.size() != 2) {
    throw ConfigError("peak '" + p.name + "': ranges must be [min, max] pairs");
  }
  p.healthy_min = h[0].get<double>();
  p.healthy_max = h[1].get<double>();
  p.tumor_min = t[0].get<double>();
  p.tumor_max = t[1].get<double>();
}

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"patients_per_class", c.patients_per_class},
                     {"spectra_mean", c.spectra_mean},
                     {"spectra_std", c.spectra_std},
                     {"spectra_min", c.spectra_min},
                     {"peaks", c.peaks},
                     {"healthy_fraction", c.healthy_fraction},
                     {"patient_shift", c.patient_shift},
                     {"instance_jitter", c.instance_jitter},
                     {"noise_std", c.noise_std},
                     {"seed", c.seed}};
}

/// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, SynthConfig& c) {
  const SynthConfig d;
  c.patients_per_class = j.value("patients_per_class", d.patients_per_class);
  c.spectra_mean = j.value("spectra_mean", d.spectra_mean);
  c.spectra_std = j.value("spectra_std", d.spectra_std);
  c.spectra_min = j.value("spectra_min", d.spectra_min);
  c.peaks = j.contains("peaks") ? j.at("peaks").get<std::vector<PeakSpec>>() : d.peaks;
  c.healthy_fraction = j.value("healthy_fraction", d.healthy_fraction);
  c.patient_shift = j.value("patient_shift", d.patient_shift);
  c.instance_jitter = j.value("instance_jitter", d.instance_jitter);
  c.noise_std = j.value("noise_std", d.noise_std);
  c.seed = j.value("seed", d.seed);
}

/// Noise-free line shape sum at `ppm` for the given peak amplitudes.
inline double peak_profile(const std::vector<PeakSpec>& peaks, const std::vector<double>& amplitudes,
                           double ppm) {
  double y = 0.0;
  for (std::size_t m = 0; m < peaks.size(); ++m) {
    const double d = (ppm - peaks[m].ppm) / peaks[m].width;
    y += amplitudes[m] * std::exp(-0.5 * d * d);
  }
  return y;
}

/// A spectrum before normalization, with the amplitudes it was built from.
struct RawSpectrum {
  std::vector<double> amplitudes;
  std::vector<double> values;
  SpectrumOrigin origin = SpectrumOrigin::unknown;
};

/// Synthesizes one patient (`index` selects an independent random stream).
inline std::vector<RawSpectrum> synthesize_patient_raw(const SynthConfig& config, Label label,
                                                        std::size_t index) {
  auto rng = make_stream(config.seed, "synth.patient", index);
  std::normal_distribution<double> count_dist(config.spectra_mean, config.spectra_std);
  const double drawn = std::round(count_dist(rng));
  const std::size_t n = drawn < static_cast<double>(config.spectra_min)
                            ? config.spectra_min
                            : static_cast<std::size_t>(drawn);

  const double shift = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * config.patient_shift;
  std::vector<double> baseline(config.peaks.size());
  for (std::size_t m = 0; m < config.peaks.size(); ++m) {
    const auto& p = config.peaks[m];
    baseline[m] = std::uniform_real_distribution<double>(p.healthy_min, p.healthy_max)(rng) *
                  std::pow(std::sqrt(p.tumor_min * p.tumor_max), shift);
  }

  std::vector<SpectrumOrigin> origins(n, label == Label::tumor ? SpectrumOrigin::tumor
                                                               : SpectrumOrigin::healthy);
  if (label == Label::tumor) {
    std::size_t healthy = static_cast<std::size_t>(std::round(config.healthy_fraction * static_cast<double>(n)));
    healthy = std::min(healthy, n - 1);
    std::fill_n(origins.begin(), healthy, SpectrumOrigin::healthy);
    std::shuffle(origins.begin(), origins.end(), rng);
  }

  std::uniform_real_distribution<double> jitter(1.0 - config.instance_jitter, 1.0 + config.instance_jitter);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<RawSpectrum> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    auto& raw = out[s];
    raw.origin = origins[s];
    raw.amplitudes.resize(config.peaks.size());
    for (std::size_t m = 0; m < config.peaks.size(); ++m) {
      const auto& p = config.peaks[m];
      double a = baseline[m] * jitter(rng);
      if (raw.origin == SpectrumOrigin::tumor) {
        a *= std::uniform_real_distribution<double>(p.tumor_min, p.tumor_max)(rng);
      }
      raw.amplitudes[m] = a;
    }
    raw.values.resize(kSpectrumLength);
    for (std::size_t i = 0; i < kSpectrumLength; ++i) {
      raw.values[i] = peak_profile(config.peaks, raw.amplitudes, ppm_at(i)) + config.noise_std * noise(rng);
    }
  }
  return out;
}

inline std::string synthetic_patient_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "P%04zu", index + 1);
  return buf;
}

/// Patients alternate non_tumor / tumor; every spectrum is normalized.
inline std::vector<PatientRecord> synthesize_dataset(const SynthConfig& config) {
  config.validate();
  std::vector<PatientRecord> patients;
  const std::size_t total = 2 * config.patients_per_class;
  patients.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    PatientRecord rec;
    rec.patient_id = synthetic_patient_id(i);
    rec.label = (i % 2 == 0) ? Label::non_tumor : Label::tumor;
    for (auto& raw : synthesize_patient_raw(config, rec.label, i)) {
      Spectrum s = normalize_spectrum(raw.values);
      s.origin = raw.origin;
      rec.spectra.push_back(s);
    }
    patients.push_back(std::move(rec));
  }
  return patients;
}

}  // namespace mrsmil::data
