// SPDX-License-Identifier: Apache-2.0
#ifndef WSGULLY_VOTING_HPP
#define WSGULLY_VOTING_HPP

#include <string>
#include <string_view>
#include <vector>

#include "wsgully/types.hpp"

namespace wsgully {

/// Rules for turning per-image 0-4 expert confidence scores into one binary label.
///
///   StrictPositive   Positive iff every labeler has an image scored 4 and at least
///                    two images scored above 2.
///   LenientPositive  Positive iff every labeler has an image scored 4.
///   LenientNegative  Negative iff every labeler scored every image at most 1.
///   StrictNegative   Negative iff every labeler scored every image 0.
enum class VotingScheme { StrictPositive, LenientPositive, LenientNegative, StrictNegative };

inline constexpr VotingScheme kAllSchemes[] = {
    VotingScheme::StrictPositive, VotingScheme::LenientPositive, VotingScheme::LenientNegative,
    VotingScheme::StrictNegative};

/// "strict-positive", "lenient-positive", "lenient-negative", "strict-negative".
VotingScheme parse_scheme(std::string_view name);
std::string_view scheme_name(VotingScheme scheme) noexcept;

struct LocationAnnotations {
  LocationId location_id;
  std::vector<std::vector<int>> per_labeler;
};

Label aggregate_location(const LocationAnnotations& annotations, VotingScheme scheme);

/// Groups `annotations` by location and aggregates them in `location_order`.
/// Throws Error when a location has no annotations or an annotation names an unknown location.
GroundTruthSet build_ground_truth(const std::vector<ExpertAnnotation>& annotations,
                                  const std::vector<LocationId>& location_order,
                                  VotingScheme scheme = VotingScheme::StrictNegative);

}  // namespace wsgully

#endif  // WSGULLY_VOTING_HPP
