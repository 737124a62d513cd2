#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrsmil/data/bags.hpp"
#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/errors.hpp"
#include "mrsmil/models/model.hpp"
#include "mrsmil/pipeline/cross_validation.hpp"

namespace mrsmil::pipeline {

struct AttentionRow {
  std::string bag_id;  // "<patient_id>#<bag index within patient>"
  std::size_t instance_index = 0;
  std::size_t spectrum_index = 0;  // row of the patient's spectrum list
  double weight = 0.0;
};

/// Attention weights of every test-time bag of every patient.
inline std::vector<AttentionRow> export_attention(models::Model& model,
                                                  std::span<const data::PatientRecord> patients) {
  if (model.aggregator().kind() != pooling::AggregatorKind::attention) {
    throw UnsupportedError("attention export needs a model with the attention aggregator, this one uses " +
                           pooling::to_string(model.aggregator().kind()));
  }
  const std::size_t m = model.config().bag_size;
  std::vector<data::Bag> bags;
  std::vector<std::size_t> bag_in_patient;
  for (std::size_t p = 0; p < patients.size(); ++p) {
    auto pb = data::generate_test_bags(patients[p], p, m);
    for (std::size_t b = 0; b < pb.size(); ++b) bag_in_patient.push_back(b);
    bags.insert(bags.end(), pb.begin(), pb.end());
  }
  const auto scores = score_bags(model, bags, patients);
  std::vector<AttentionRow> rows;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const std::string id = bags[b].patient_id + "#" + std::to_string(bag_in_patient[b]);
    for (std::size_t k = 0; k < bags[b].size(); ++k) {
      rows.push_back({id, k, bags[b].provenance[k], scores.attention[b][k]});
    }
  }
  return rows;
}

inline std::string attention_csv(const std::vector<AttentionRow>& rows) {
  std::string out = "bag_id,instance_index,weight\n";
  for (const auto& r : rows) {
    out += r.bag_id + "," + std::to_string(r.instance_index) + "," + nlohmann::json(r.weight).dump() + "\n";
  }
  return out;
}

}  // namespace mrsmil::pipeline
