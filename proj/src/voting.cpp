// SPDX-License-Identifier: Apache-2.0
#include "wsgully/voting.hpp"

#include <algorithm>
#include <unordered_map>

namespace wsgully {
namespace {

bool has_score(const std::vector<int>& scores, int value) {
  return std::find(scores.begin(), scores.end(), value) != scores.end();
}

int max_score(const std::vector<int>& scores) {
  return *std::max_element(scores.begin(), scores.end());
}

}  // namespace

VotingScheme parse_scheme(std::string_view name) {
  for (auto s : kAllSchemes) {
    if (scheme_name(s) == name) return s;
  }
  throw ConfigError("unknown voting scheme '" + std::string(name) + "'");
}

std::string_view scheme_name(VotingScheme scheme) noexcept {
  switch (scheme) {
    case VotingScheme::StrictPositive:
      return "strict-positive";
    case VotingScheme::LenientPositive:
      return "lenient-positive";
    case VotingScheme::LenientNegative:
      return "lenient-negative";
    case VotingScheme::StrictNegative:
      break;
  }
  return "strict-negative";
}

Label aggregate_location(const LocationAnnotations& annotations, VotingScheme scheme) {
  if (annotations.per_labeler.empty()) {
    throw Error("location '" + annotations.location_id + "' has no annotations");
  }
  const auto& labelers = annotations.per_labeler;
  auto all = [&](auto pred) { return std::all_of(labelers.begin(), labelers.end(), pred); };

  switch (scheme) {
    case VotingScheme::StrictPositive:
      return all([](const std::vector<int>& s) {
               return has_score(s, 4) && std::count_if(s.begin(), s.end(),
                                                       [](int v) { return v > 2; }) >= 2;
             })
                 ? Label::Positive
                 : Label::Negative;
    case VotingScheme::LenientPositive:
      return all([](const std::vector<int>& s) { return has_score(s, 4); }) ? Label::Positive
                                                                             : Label::Negative;
    case VotingScheme::LenientNegative:
      return all([](const std::vector<int>& s) { return max_score(s) <= 1; }) ? Label::Negative
                                                                               : Label::Positive;
    case VotingScheme::StrictNegative:
      break;
  }
  return all([](const std::vector<int>& s) { return max_score(s) == 0; }) ? Label::Negative
                                                                           : Label::Positive;
}

GroundTruthSet build_ground_truth(const std::vector<ExpertAnnotation>& annotations,
                                  const std::vector<LocationId>& location_order,
                                  VotingScheme scheme) {
  std::unordered_map<LocationId, LocationAnnotations> grouped;
  for (const auto& id : location_order) grouped[id].location_id = id;
  for (const auto& a : annotations) {
    auto it = grouped.find(a.location_id);
    if (it == grouped.end()) {
      throw AlignmentError("annotation for unknown location '" + a.location_id + "'");
    }
    it->second.per_labeler.push_back(a.scores);
  }

  GroundTruthSet out;
  out.location_ids = location_order;
  out.labels.reserve(location_order.size());
  for (const auto& id : location_order) {
    out.labels.push_back(aggregate_location(grouped.at(id), scheme));
  }
  return out;
}

}  // namespace wsgully
