// SPDX-License-Identifier: Apache-2.0
//
// Readers and writers for every on-disk artifact of the pipeline.
//
//   manifest        JSONL, one {"location_id", "images":[{"path","gsd_cm","year"}]} per line
//   label matrix    CSV, header `location_id,<lf_1>,...`, cells 1 / 0 / -1 (abstain)
//   feature store   "EGF1" + u32le K, N, D + K*N*D f32le; ids in the `<path>.ids` sidecar
//   annotations     JSONL, {"location_id", "labeler_id", "scores":[0..4, ...]}
//   ground truth    CSV `location_id,label`, label in {0,1}
//   pseudo-labels   CSV `location_id,p_neg,p_pos`
//
// Writers go through a temporary file that is renamed into place on success.
#ifndef WSGULLY_IO_HPP
#define WSGULLY_IO_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wsgully/types.hpp"

namespace wsgully {

namespace fs = std::filesystem;

DatasetManifest read_manifest(const fs::path& path);
void write_manifest(const DatasetManifest& manifest, const fs::path& path);

LabelMatrix read_label_matrix(const fs::path& path);
void write_label_matrix(const LabelMatrix& matrix, const fs::path& path);

FeatureStore read_feature_store(const fs::path& path);
void write_feature_store(const FeatureStore& store, const fs::path& path);
fs::path feature_ids_path(const fs::path& path);

/// When `n_images` is given, every annotation must carry exactly that many scores.
std::vector<ExpertAnnotation> read_annotations(const fs::path& path,
                                               std::optional<std::size_t> n_images = std::nullopt);
void write_annotations(const std::vector<ExpertAnnotation>& annotations, const fs::path& path);

GroundTruthSet read_ground_truth(const fs::path& path);
void write_ground_truth(const GroundTruthSet& truth, const fs::path& path);

PseudoLabelSet read_pseudo_labels(const fs::path& path);
void write_pseudo_labels(const PseudoLabelSet& labels, const fs::path& path);

/// Parses one label-matrix cell token ("1", "0", "-1").
Vote parse_vote_token(std::string_view token);
std::string_view vote_token(Vote v) noexcept;

/// Shortest-safe decimal form with 17 significant digits.
std::string format_double(double value);

std::string read_text_file(const fs::path& path);
/// Writes `contents` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view contents);

}  // namespace wsgully

#endif  // WSGULLY_IO_HPP
