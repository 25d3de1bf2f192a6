// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "wsgully/rng.hpp"
#include "wsgully/voting.hpp"

using namespace wsgully;
using S = VotingScheme;

namespace {

LocationAnnotations one(std::vector<int> scores) { return {"loc", {std::move(scores)}}; }

LocationAnnotations random_location(Rng& rng, std::size_t n_images) {
  LocationAnnotations a{"loc", {}};
  const std::size_t labelers = 1 + rng.below(4);
  // Skewed towards low scores so every scheme sees both outcomes.
  for (std::size_t l = 0; l < labelers; ++l) {
    std::vector<int> s(n_images);
    for (auto& v : s) v = rng.uniform() < 0.6 ? 0 : static_cast<int>(rng.below(5));
    a.per_labeler.push_back(std::move(s));
  }
  return a;
}

}  // namespace

TEST_CASE("all zeros is negative under every scheme") {
  for (auto s : kAllSchemes) CHECK(aggregate_location(one(std::vector<int>(8, 0)), s) == Label::Negative);
}

TEST_CASE("strict positive needs a 4 and a second image above 2") {
  CHECK(aggregate_location(one({4, 3, 0, 0, 0, 0, 0, 0}), S::StrictPositive) == Label::Positive);
  CHECK(aggregate_location(one({4, 0, 0, 0, 0, 0, 0, 0}), S::StrictPositive) == Label::Negative);
  CHECK(aggregate_location(one({4, 0, 0, 0, 0, 0, 0, 0}), S::LenientPositive) == Label::Positive);
  CHECK(aggregate_location(one({4, 4, 0, 0, 0, 0, 0, 0}), S::StrictPositive) == Label::Positive);
  CHECK(aggregate_location(one({3, 3, 3, 0, 0, 0, 0, 0}), S::StrictPositive) == Label::Negative);
}

TEST_CASE("negative schemes") {
  CHECK(aggregate_location(one({1, 0, 0, 0, 0, 0, 0, 0}), S::LenientNegative) == Label::Negative);
  CHECK(aggregate_location(one({1, 0, 0, 0, 0, 0, 0, 0}), S::StrictNegative) == Label::Positive);
  CHECK(aggregate_location(one({2, 0, 0, 0, 0, 0, 0, 0}), S::LenientNegative) == Label::Positive);
}

TEST_CASE("every labeler must agree") {
  LocationAnnotations a{"loc", {{4, 4, 0}, {0, 0, 0}}};
  CHECK(aggregate_location(a, S::LenientPositive) == Label::Negative);
  CHECK(aggregate_location(a, S::StrictPositive) == Label::Negative);
  CHECK(aggregate_location(a, S::StrictNegative) == Label::Positive);
  CHECK(aggregate_location(a, S::LenientNegative) == Label::Positive);
}

TEST_CASE("scheme names round trip") {
  for (auto s : kAllSchemes) CHECK(parse_scheme(scheme_name(s)) == s);
  CHECK(scheme_name(S::StrictNegative) == "strict-negative");
  CHECK_THROWS_AS(parse_scheme("strictest"), ConfigError);
}

TEST_CASE("monotonicity, permutation invariance, zero labelers on 1000 random sets") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = random_location(rng, 8);
    const auto sp = aggregate_location(a, S::StrictPositive);
    const auto lp = aggregate_location(a, S::LenientPositive);
    const auto ln = aggregate_location(a, S::LenientNegative);
    const auto sn = aggregate_location(a, S::StrictNegative);
    if (sp == Label::Positive) CHECK(lp == Label::Positive);
    if (ln == Label::Positive) CHECK(sn == Label::Positive);

    auto shuffled = a;
    for (auto& s : shuffled.per_labeler) rng.shuffle(s.begin(), s.end());
    for (auto s : kAllSchemes) CHECK(aggregate_location(shuffled, s) == aggregate_location(a, s));

    auto with_zero = a;
    with_zero.per_labeler.push_back(std::vector<int>(8, 0));
    CHECK(aggregate_location(with_zero, S::StrictPositive) == Label::Negative);
    CHECK(aggregate_location(with_zero, S::LenientPositive) == Label::Negative);
  }
}

TEST_CASE("build_ground_truth") {
  std::vector<ExpertAnnotation> anns = {
      {"b", "e1", {4, 3, 0}}, {"a", "e1", {0, 0, 0}}, {"b", "e2", {4, 0, 0}}, {"c", "e1", {1, 0, 0}}};
  const auto gt = build_ground_truth(anns, {"a", "b", "c"});
  CHECK(gt.location_ids == std::vector<LocationId>{"a", "b", "c"});
  CHECK(gt.labels == std::vector<Label>{Label::Negative, Label::Positive, Label::Positive});

  const auto sp = build_ground_truth(anns, {"a", "b", "c"}, S::StrictPositive);
  CHECK(sp.labels[1] == Label::Negative);
  const auto lp = build_ground_truth(anns, {"a", "b", "c"}, S::LenientPositive);
  CHECK(lp.labels[1] == Label::Positive);

  const auto single = build_ground_truth({{"z", "e", {4, 4}}}, {"z"}, S::StrictPositive);
  CHECK(single.labels.front() == aggregate_location({"z", {{4, 4}}}, S::StrictPositive));

  CHECK_THROWS_AS(build_ground_truth(anns, {"a", "b", "c", "d"}), Error);
  CHECK_THROWS_AS(build_ground_truth(anns, {"a", "b"}), AlignmentError);
}

TEST_CASE("designed fixture yields at least three distinct labelings") {
  std::vector<ExpertAnnotation> anns = {
      {"p1", "e", {4, 3, 0, 0}},  // positive everywhere
      {"p2", "e", {4, 0, 0, 0}},  // lenient positive only
      {"p3", "e", {2, 0, 0, 0}},  // negative schemes say positive
      {"p4", "e", {1, 0, 0, 0}},  // strict negative only
      {"p5", "e", {0, 0, 0, 0}},
  };
  const std::vector<LocationId> order = {"p1", "p2", "p3", "p4", "p5"};
  std::set<std::vector<Label>> distinct;
  for (auto s : kAllSchemes) distinct.insert(build_ground_truth(anns, order, s).labels);
  CHECK(distinct.size() >= 3);
}
