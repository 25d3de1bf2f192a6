// SPDX-License-Identifier: Apache-2.0
#ifndef WSGULLY_TYPES_HPP
#define WSGULLY_TYPES_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wsgully {

// Error hierarchy. The CLI maps each family onto a distinct exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct AlignmentError : Error {
  using Error::Error;
};
struct EndpointError : Error {
  using Error::Error;
};

using LocationId = std::string;

/// Throws ParseError unless `id` is non-empty and free of commas/newlines.
void validate_location_id(std::string_view id);

/// Weak vote emitted by a labeling function. The integer values are the CSV tokens.
enum class Vote : std::int8_t { Abstain = -1, Negative = 0, Positive = 1 };

/// Binary class.
enum class Label : std::uint8_t { Negative = 0, Positive = 1 };

constexpr Vote to_vote(Label y) noexcept {
  return y == Label::Positive ? Vote::Positive : Vote::Negative;
}

struct ImageRef {
  std::string path;
  double gsd_cm = 0.0;
  int year = 0;

  bool operator==(const ImageRef&) const = default;
};

struct LocationRecord {
  LocationId location_id;
  std::vector<ImageRef> images;

  bool operator==(const LocationRecord&) const = default;
};

struct DatasetManifest {
  std::vector<LocationRecord> records;
  std::size_t n_images = 0;

  std::size_t size() const noexcept { return records.size(); }
  std::vector<LocationId> ids() const;

  bool operator==(const DatasetManifest&) const = default;
};

/// K x m grid of weak votes, stored row-major.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::vector<LocationId> location_ids, std::vector<std::string> lf_names);
  LabelMatrix(std::vector<LocationId> location_ids, std::vector<std::string> lf_names,
              std::vector<Vote> votes);

  std::size_t rows() const noexcept { return location_ids_.size(); }
  std::size_t cols() const noexcept { return lf_names_.size(); }

  const std::vector<LocationId>& location_ids() const noexcept { return location_ids_; }
  const std::vector<std::string>& lf_names() const noexcept { return lf_names_; }
  const std::vector<Vote>& votes() const noexcept { return votes_; }

  std::span<const Vote> row(std::size_t k) const { return {votes_.data() + k * cols(), cols()}; }
  Vote operator()(std::size_t k, std::size_t j) const { return votes_[k * cols() + j]; }
  Vote& operator()(std::size_t k, std::size_t j) { return votes_[k * cols() + j]; }

  std::vector<Vote> column(std::size_t j) const;
  std::size_t column_index(std::string_view lf_name) const;

  /// Rows [begin, end) as a new matrix.
  LabelMatrix slice(std::size_t begin, std::size_t end) const;

  bool operator==(const LabelMatrix&) const = default;

 private:
  std::vector<LocationId> location_ids_;
  std::vector<std::string> lf_names_;
  std::vector<Vote> votes_;
};

/// Probabilistic label (p_neg, p_pos).
struct ClassDistribution {
  double p_neg = 0.5;
  double p_pos = 0.5;

  static constexpr double kTolerance = 1e-6;

  bool valid() const noexcept;
  bool operator==(const ClassDistribution&) const = default;
};

struct PseudoLabelSet {
  std::vector<LocationId> location_ids;
  std::vector<ClassDistribution> distributions;

  std::size_t size() const noexcept { return location_ids.size(); }
  PseudoLabelSet slice(std::size_t begin, std::size_t end) const;
  bool operator==(const PseudoLabelSet&) const = default;
};

struct ExpertAnnotation {
  LocationId location_id;
  std::string labeler_id;
  std::vector<int> scores;

  bool operator==(const ExpertAnnotation&) const = default;
};

/// Hard labels aligned to an id sequence. Also used for binary predictions.
struct GroundTruthSet {
  std::vector<LocationId> location_ids;
  std::vector<Label> labels;

  std::size_t size() const noexcept { return location_ids.size(); }
  GroundTruthSet slice(std::size_t begin, std::size_t end) const;
  bool operator==(const GroundTruthSet&) const = default;
};

/// K x N x D float32 array, location-major, image-second, feature-innermost.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(std::vector<LocationId> location_ids, std::size_t n_images, std::size_t dim,
               std::vector<float> values);

  std::size_t rows() const noexcept { return location_ids_.size(); }
  std::size_t n_images() const noexcept { return n_images_; }
  std::size_t dim() const noexcept { return dim_; }
  /// Length of one location's concatenated feature vector (N * D).
  std::size_t row_length() const noexcept { return n_images_ * dim_; }

  const std::vector<LocationId>& location_ids() const noexcept { return location_ids_; }
  const std::vector<float>& values() const noexcept { return values_; }
  std::span<const float> row(std::size_t k) const {
    return {values_.data() + k * row_length(), row_length()};
  }

  FeatureStore slice(std::size_t begin, std::size_t end) const;

  bool operator==(const FeatureStore&) const = default;

 private:
  std::vector<LocationId> location_ids_;
  std::size_t n_images_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

/// Throws AlignmentError when the two id sequences differ.
void require_aligned(const std::vector<LocationId>& expected, const std::vector<LocationId>& actual,
                     std::string_view what);

}  // namespace wsgully

#endif  // WSGULLY_TYPES_HPP
