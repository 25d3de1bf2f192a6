// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "wsgully/metrics.hpp"
#include "wsgully/rng.hpp"

using namespace wsgully;
using doctest::Approx;

namespace {

GroundTruthSet labels_of(std::vector<int> v) {
  GroundTruthSet out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.location_ids.push_back("l" + std::to_string(i));
    out.labels.push_back(v[i] ? Label::Positive : Label::Negative);
  }
  return out;
}

}  // namespace

TEST_CASE("confusion") {
  const auto gt = labels_of({1, 1, 0, 0});
  CHECK(confusion(gt, gt) == ConfusionMatrix{2, 0, 2, 0});
  CHECK(confusion(labels_of({1, 1, 0, 0}), labels_of({1, 0, 0, 1})) == ConfusionMatrix{1, 1, 1, 1});
  CHECK_THROWS(confusion(labels_of({}), labels_of({})));
  auto shifted = gt;
  shifted.location_ids[0] = "other";
  CHECK_THROWS_AS(confusion(shifted, gt), AlignmentError);
}

TEST_CASE("compute_metrics") {
  const auto half = compute_metrics({1, 1, 1, 1});
  for (const auto& m : {half.accuracy, half.precision, half.recall, half.f1, half.npv}) {
    REQUIRE(m.has_value());
    CHECK(*m == 0.5);
  }
  const auto perfect = compute_metrics({3, 0, 5, 0});
  for (const auto& m : {perfect.accuracy, perfect.precision, perfect.recall, perfect.f1, perfect.npv}) {
    CHECK(*m == 1.0);
  }
  const auto no_pos = compute_metrics({0, 0, 4, 0});
  CHECK_FALSE(no_pos.precision.has_value());
  CHECK_FALSE(no_pos.recall.has_value());
  CHECK_FALSE(no_pos.f1.has_value());
  CHECK(*no_pos.accuracy == 1.0);
  CHECK_THROWS(compute_metrics({0, 0, 0, 0}));
}

TEST_CASE("f1 from reported precision and recall") {
  CHECK(*f1_score(0.63, 0.83) == Approx(2.0 * 0.63 * 0.83 / (0.63 + 0.83)).epsilon(1e-15));
  CHECK(std::abs(*f1_score(0.63, 0.83) - 0.72) <= 0.015);
  CHECK_FALSE(f1_score(0.0, 0.0).has_value());
  CHECK_FALSE(f1_score(std::nullopt, 0.5).has_value());
}

TEST_CASE("swap symmetry and scale invariance") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a(20), b(20);
    for (auto& v : a) v = static_cast<int>(rng.below(2));
    for (auto& v : b) v = static_cast<int>(rng.below(2));
    const auto ab = confusion(labels_of(a), labels_of(b));
    const auto ba = confusion(labels_of(b), labels_of(a));
    CHECK(ab.fp == ba.fn);
    CHECK(ab.fn == ba.fp);
    CHECK(*compute_metrics(ab).accuracy == *compute_metrics(ba).accuracy);

    const auto r1 = compute_metrics(ab);
    const auto r7 = compute_metrics({ab.tp * 7, ab.fp * 7, ab.tn * 7, ab.fn * 7});
    CHECK(r1.accuracy == r7.accuracy);
    CHECK(r1.precision.has_value() == r7.precision.has_value());
    if (r1.precision) CHECK(*r1.precision == Approx(*r7.precision).epsilon(1e-15));
    if (r1.npv) CHECK(*r1.npv == Approx(*r7.npv).epsilon(1e-15));
    if (r1.f1) CHECK(*r1.f1 == Approx(*r7.f1).epsilon(1e-15));
  }
}

TEST_CASE("binarize") {
  CHECK(binarize({0.5, 0.5}) == Label::Positive);
  CHECK(binarize({0.9, 0.1}) == Label::Negative);
  CHECK(binarize({0.2, 0.8}, 0.9) == Label::Negative);
  CHECK_THROWS_AS(binarize({0.5, 0.5}, 0.0), ConfigError);
  CHECK_THROWS_AS(binarize({0.5, 0.5}, 1.0), ConfigError);
}

TEST_CASE("votes as predictions treat abstain as positive") {
  const auto p = votes_as_predictions({"a", "b", "c"}, {Vote::Positive, Vote::Negative, Vote::Abstain});
  CHECK(p.labels == std::vector<Label>{Label::Positive, Label::Negative, Label::Positive});
}

TEST_CASE("serialization") {
  const ConfusionMatrix cm{0, 0, 4, 0};
  const auto doc = nlohmann::json::parse(metrics_to_json(compute_metrics(cm), cm));
  CHECK(doc["precision"].is_null());
  CHECK(doc["accuracy"].get<double>() == 1.0);

  const auto table = metrics_table({{"LM", compute_metrics({1, 1, 1, 1})}, {"none", compute_metrics(cm)}});
  const auto header_end = table.find('\n');
  const auto header = table.substr(0, header_end);
  CHECK(header.find("NPV") < header.find("Recall"));
  CHECK(header.find("Recall") < header.find("Precision"));
  CHECK(header.find("Precision") < header.find("F1"));
  CHECK(header.find("F1") < header.find("Accuracy"));
  CHECK(table.find("0.5000") != std::string::npos);
  CHECK(table.find("n/a") != std::string::npos);
}
