// SPDX-License-Identifier: Apache-2.0
#include "wsgully/types.hpp"

#include <cmath>
#include <utility>

namespace wsgully {

void validate_location_id(std::string_view id) {
  if (id.empty()) throw ParseError("empty location id");
  if (id.find_first_of(",\r\n") != std::string_view::npos) {
    throw ParseError("location id '" + std::string(id) + "' contains a comma or newline");
  }
}

std::vector<LocationId> DatasetManifest::ids() const {
  std::vector<LocationId> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.location_id);
  return out;
}

LabelMatrix::LabelMatrix(std::vector<LocationId> location_ids, std::vector<std::string> lf_names)
    : location_ids_(std::move(location_ids)),
      lf_names_(std::move(lf_names)),
      votes_(location_ids_.size() * lf_names_.size(), Vote::Abstain) {}

LabelMatrix::LabelMatrix(std::vector<LocationId> location_ids, std::vector<std::string> lf_names,
                         std::vector<Vote> votes)
    : location_ids_(std::move(location_ids)),
      lf_names_(std::move(lf_names)),
      votes_(std::move(votes)) {
  if (votes_.size() != location_ids_.size() * lf_names_.size()) {
    throw Error("label matrix vote count does not match K x m");
  }
}

std::vector<Vote> LabelMatrix::column(std::size_t j) const {
  std::vector<Vote> out(rows());
  for (std::size_t k = 0; k < rows(); ++k) out[k] = (*this)(k, j);
  return out;
}

std::size_t LabelMatrix::column_index(std::string_view lf_name) const {
  for (std::size_t j = 0; j < lf_names_.size(); ++j) {
    if (lf_names_[j] == lf_name) return j;
  }
  throw ConfigError("label matrix has no column '" + std::string(lf_name) + "'");
}

LabelMatrix LabelMatrix::slice(std::size_t begin, std::size_t end) const {
  std::vector<LocationId> ids(location_ids_.begin() + begin, location_ids_.begin() + end);
  std::vector<Vote> v(votes_.begin() + begin * cols(), votes_.begin() + end * cols());
  return LabelMatrix(std::move(ids), lf_names_, std::move(v));
}

bool ClassDistribution::valid() const noexcept {
  return std::isfinite(p_neg) && std::isfinite(p_pos) && p_neg >= 0.0 && p_neg <= 1.0 &&
         p_pos >= 0.0 && p_pos <= 1.0 && std::abs(p_neg + p_pos - 1.0) <= kTolerance;
}

PseudoLabelSet PseudoLabelSet::slice(std::size_t begin, std::size_t end) const {
  return {{location_ids.begin() + begin, location_ids.begin() + end},
          {distributions.begin() + begin, distributions.begin() + end}};
}

GroundTruthSet GroundTruthSet::slice(std::size_t begin, std::size_t end) const {
  return {{location_ids.begin() + begin, location_ids.begin() + end},
          {labels.begin() + begin, labels.begin() + end}};
}

FeatureStore::FeatureStore(std::vector<LocationId> location_ids, std::size_t n_images,
                           std::size_t dim, std::vector<float> values)
    : location_ids_(std::move(location_ids)),
      n_images_(n_images),
      dim_(dim),
      values_(std::move(values)) {
  if (values_.size() != location_ids_.size() * n_images_ * dim_) {
    throw Error("feature store payload does not match K x N x D");
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw Error("feature store contains a non-finite value");
  }
}

FeatureStore FeatureStore::slice(std::size_t begin, std::size_t end) const {
  std::vector<LocationId> ids(location_ids_.begin() + begin, location_ids_.begin() + end);
  std::vector<float> v(values_.begin() + begin * row_length(),
                       values_.begin() + end * row_length());
  return FeatureStore(std::move(ids), n_images_, dim_, std::move(v));
}

void require_aligned(const std::vector<LocationId>& expected, const std::vector<LocationId>& actual,
                     std::string_view what) {
  if (expected.size() != actual.size()) {
    throw AlignmentError(std::string(what) + ": expected " + std::to_string(expected.size()) +
                         " locations, found " + std::to_string(actual.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] != actual[i]) {
      throw AlignmentError(std::string(what) + ": row " + std::to_string(i + 1) + " is '" +
                           actual[i] + "', expected '" + expected[i] + "'");
    }
  }
}

}  // namespace wsgully
