#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/errors.hpp"

namespace mrsmil::data {

// Spectra CSV: header `patient_id,label,v0,...,v287`, one spectrum per row,
// label in {tumor, non_tumor}, LF line endings, shortest round-trip decimals.

inline std::string csv_header() {
  std::string h = "patient_id,label";
  for (std::size_t i = 0; i < kSpectrumLength; ++i) h += ",v" + std::to_string(i);
  return h;
}

inline void write_csv(std::ostream& os, std::span<const PatientRecord> patients) {
  os << csv_header() << '\n';
  char buf[64];
  for (const auto& p : patients) {
    if (p.patient_id.find_first_of(",\n\r") != std::string::npos) {
      throw ArgumentError("patient id '" + p.patient_id + "' cannot be written to CSV");
    }
    for (const auto& s : p.spectra) {
      os << p.patient_id << ',' << to_string(p.label);
      for (double v : s.values) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        os << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
      }
      os << '\n';
    }
  }
}

inline void write_csv(const std::string& path, std::span<const PatientRecord> patients) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("cannot open '" + path + "' for writing");
  write_csv(os, patients);
  if (!os) throw Error("failed writing '" + path + "'");
}

/// Reads spectra grouped by patient id in order of first appearance.
/// Rows that are already standardized are kept verbatim; others are normalized.
inline std::vector<PatientRecord> read_csv(std::istream& is) {
  std::vector<PatientRecord> patients;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t expected_fields = kSpectrumLength + 2;

  if (!std::getline(is, line)) throw ParseError("missing header", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) throw ParseError("unexpected header", line_no);

  std::vector<std::string_view> fields;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    fields.clear();
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != expected_fields) {
      throw ParseError("expected " + std::to_string(expected_fields) + " columns, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const std::string id(fields[0]);
    if (id.empty()) throw ParseError("empty patient_id", line_no);
    Label label;
    if (fields[1] == "tumor") label = Label::tumor;
    else if (fields[1] == "non_tumor") label = Label::non_tumor;
    else throw ParseError("unknown label '" + std::string(fields[1]) + "'", line_no);

    std::array<double, kSpectrumLength> values{};
    for (std::size_t i = 0; i < kSpectrumLength; ++i) {
      const auto f = fields[i + 2];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError("invalid number '" + std::string(f) + "' in column v" + std::to_string(i), line_no);
      }
      if (!std::isfinite(v)) throw ParseError("non-finite value in column v" + std::to_string(i), line_no);
      values[i] = v;
    }

    auto [it, inserted] = index.emplace(id, patients.size());
    if (inserted) {
      PatientRecord rec;
      rec.patient_id = id;
      rec.label = label;
      patients.push_back(std::move(rec));
    }
    auto& rec = patients[it->second];
    if (rec.label != label) throw ParseError("conflicting label for patient '" + id + "'", line_no);

    Spectrum s;
    if (is_standardized(values)) {
      s.values = values;
      s.normalized = true;
    } else {
      try {
        s = normalize_spectrum(values);
      } catch (const DegenerateInputError&) {
        throw ParseError("constant spectrum cannot be normalized", line_no);
      }
    }
    rec.spectra.push_back(s);
  }
  return patients;
}

inline std::vector<PatientRecord> load_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open '" + path + "'");
  return read_csv(is);
}

}  // namespace mrsmil::data
