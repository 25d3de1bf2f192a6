// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if
// any criterion fails. Every reference value is computed here from first principles
// (enumeration, finite differences, closed forms) rather than taken from the library.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wsgully/io.hpp"
#include "wsgully/label_model.hpp"
#include "wsgully/lf_client.hpp"
#include "wsgully/metrics.hpp"
#include "wsgully/pipeline.hpp"
#include "wsgully/rng.hpp"
#include "wsgully/student.hpp"
#include "wsgully/voting.hpp"

#include "mock_ollama.hpp"
#include "test_util.hpp"

using namespace wsgully;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Accumulates failures; the first failing condition's message is kept.
struct Checker {
  Outcome out;
  void require(bool ok, const std::string& what) {
    if (!ok && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Label-model oracles: scores straight from the three factor definitions.

double joint_score(const Vec& w, const std::vector<int>& votes, int y, const CorrelationSet& c) {
  const std::size_t m = votes.size();
  double s = 0;
  for (std::size_t j = 0; j < m; ++j) {
    if (votes[j] != -1) s += w(static_cast<Eigen::Index>(j));
    if (votes[j] == y) s += w(static_cast<Eigen::Index>(m + j));
  }
  for (std::size_t p = 0; p < c.size(); ++p) {
    if (votes[c.pairs[p].first] == votes[c.pairs[p].second]) s += w(static_cast<Eigen::Index>(2 * m + p));
  }
  return s;
}

double oracle_z(const Vec& w, std::size_t m, const CorrelationSet& c) {
  std::size_t n = 1;
  for (std::size_t j = 0; j < m; ++j) n *= 3;
  std::vector<int> votes(m);
  double z = 0;
  for (std::size_t code = 0; code < n; ++code) {
    std::size_t r = code;
    for (std::size_t j = 0; j < m; ++j, r /= 3) votes[j] = static_cast<int>(r % 3) - 1;
    z += std::exp(joint_score(w, votes, 0, c)) + std::exp(joint_score(w, votes, 1, c));
  }
  return z;
}

double oracle_nll(const Vec& w, const std::vector<std::vector<int>>& rows, const CorrelationSet& c) {
  const double log_z = std::log(oracle_z(w, rows.front().size(), c));
  double total = 0;
  for (const auto& r : rows) {
    total += log_z - std::log(std::exp(joint_score(w, r, 0, c)) + std::exp(joint_score(w, r, 1, c)));
  }
  return total;
}

LabelMatrix matrix_of(const std::vector<std::vector<int>>& rows) {
  std::vector<LocationId> ids;
  std::vector<std::string> names;
  std::vector<Vote> votes;
  for (std::size_t j = 0; j < rows.front().size(); ++j) names.push_back("lf" + std::to_string(j));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ids.push_back("r" + std::to_string(k));
    for (int v : rows[k]) votes.push_back(static_cast<Vote>(v));
  }
  return LabelMatrix(ids, names, votes);
}

double accuracy(const GroundTruthSet& pred, const GroundTruthSet& truth) {
  return *compute_metrics(confusion(pred, truth)).accuracy;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome gradient_correctness() {
  Checker c;
  Rng rng(101);
  const CorrelationSet corr{{{0, 1}}};
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<int>> rows(50, std::vector<int>(3));
    for (auto& r : rows) {
      for (auto& v : r) v = static_cast<int>(rng.below(3)) - 1;
    }
    FactorWeights<double> w(3, 1);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.flat()(i) = 2.0 * rng.uniform() - 1.0;
    const Vec analytic = nll_gradient(w, matrix_of(rows), corr);
    Vec numeric(w.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      Vec plus = w.flat(), minus = w.flat();
      plus(i) += h;
      minus(i) -= h;
      numeric(i) = (oracle_nll(plus, rows, corr) - oracle_nll(minus, rows, corr)) / (2 * h);
    }
    const double rel = (analytic - numeric).norm() / std::max(analytic.norm(), numeric.norm());
    worst = std::max(worst, rel);
  }
  c.require(worst <= 1e-4, "max rel. err " + fmt("%.3g", worst));
  c.out.detail = c.out.pass ? "100 instances, max rel. err " + fmt("%.3g", worst) : c.out.detail;
  return c.out;
}

Outcome partition_oracle() {
  Checker c;
  Rng rng(202);
  double worst = 0;
  for (std::size_t m = 1; m <= 5; ++m) {
    for (int trial = 0; trial < 100; ++trial) {
      CorrelationSet corr;
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t d = j + 1; d < m; ++d) {
          if (rng.uniform() < 0.4) corr.pairs.emplace_back(j, d);
        }
      }
      FactorWeights<double> w(m, corr.size());
      for (Eigen::Index i = 0; i < w.size(); ++i) w.flat()(i) = 4.0 * rng.uniform() - 2.0;
      const double fast = partition_function(w, corr);
      const double brute = brute_force_partition(w, corr);
      const double independent = oracle_z(w.flat(), m, corr);
      worst = std::max({worst, std::abs(fast - brute) / brute, std::abs(fast - independent) / independent});
    }
  }
  c.require(worst <= 1e-10, "max rel. err " + fmt("%.3g", worst));
  if (c.out.pass) c.out.detail = "m=1..5 x 100 draws, max rel. err " + fmt("%.3g", worst);
  return c.out;
}

Outcome conditional_invariance() {
  Checker c;
  Rng rng(303);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 1 + rng.below(6);
    CorrelationSet corr;
    for (std::size_t j = 0; j + 1 < m; ++j) {
      if (rng.uniform() < 0.5) corr.pairs.emplace_back(j, j + 1);
    }
    FactorWeights<double> w(m, corr.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w.flat()(i) = 6.0 * rng.uniform() - 3.0;
    std::vector<Vote> row(m);
    for (auto& v : row) v = static_cast<Vote>(static_cast<int>(rng.below(3)) - 1);
    const auto base = predict_proba(w, row);

    auto perturbed = w;
    for (Eigen::Index i = 0; i < perturbed.lab().size(); ++i) perturbed.lab()(i) += 100.0 * rng.normal();
    for (Eigen::Index i = 0; i < perturbed.corr().size(); ++i) perturbed.corr()(i) += 100.0 * rng.normal();
    const auto moved = predict_proba(perturbed, row);
    c.require(moved.p_pos == base.p_pos && moved.p_neg == base.p_neg, "lab/corr perturbation changed the posterior");

    auto flipped = w;
    flipped.acc() = -flipped.acc();
    const auto f = predict_proba(flipped, row);
    c.require(f.p_pos == base.p_neg && f.p_neg == base.p_pos, "negating w_acc did not swap p_pos/p_neg");
    ++checked;
  }
  if (c.out.pass) c.out.detail = std::to_string(checked) + " random rows, exact equality";
  return c.out;
}

/// Bayes-optimal prediction under the true generative process, by enumerating y.
GroundTruthSet bayes_optimal(const LabelMatrix& lm, const BenchmarkParams& p) {
  GroundTruthSet out;
  out.location_ids = lm.location_ids();
  for (std::size_t k = 0; k < lm.rows(); ++k) {
    double like[2];
    for (int y = 0; y <= 1; ++y) {
      double l = y == 1 ? p.class_prior : 1.0 - p.class_prior;
      for (std::size_t j = 0; j < lm.cols(); ++j) {
        const int v = static_cast<int>(lm(k, j));
        const double a = p.accuracies[j], b = p.abstain_rates[j];
        l *= v == -1 ? b : (v == y ? (1 - b) * a : (1 - b) * (1 - a));
      }
      like[y] = l;
    }
    out.labels.push_back(like[1] >= like[0] ? Label::Positive : Label::Negative);
  }
  return out;
}

Outcome synthetic_recovery() {
  Checker c;
  BenchmarkParams p;
  p.num_locations = 10000;
  p.feature_dim = 1;
  p.num_images = 1;
  p.seed = 404;
  const auto bench = generate_benchmark(p);
  const auto model = fit(bench.label_matrix, {});
  const auto acc = model.weights.acc();
  c.require(acc(0) > acc(1) && acc(1) > acc(2),
            "w_acc ordering " + fmt("%.4f", acc(0)) + "," + fmt("%.4f", acc(1)) + "," + fmt("%.4f", acc(2)));

  const double pseudo = accuracy(binarize_all(predict_all(model, bench.label_matrix)), bench.ground_truth);
  const double mv = accuracy(majority_vote(bench.label_matrix), bench.ground_truth);
  const double bayes = accuracy(bayes_optimal(bench.label_matrix, p), bench.ground_truth);
  c.require(pseudo >= mv, "pseudo-label acc " + fmt("%.4f", pseudo) + " < majority " + fmt("%.4f", mv));
  c.require(std::abs(pseudo - bayes) <= 0.02,
            "pseudo-label acc " + fmt("%.4f", pseudo) + " vs Bayes " + fmt("%.4f", bayes));
  if (c.out.pass) {
    c.out.detail = "w_acc " + fmt("%.3f", acc(0)) + ">" + fmt("%.3f", acc(1)) + ">" + fmt("%.3f", acc(2)) +
                   ", pseudo " + fmt("%.4f", pseudo) + ", majority " + fmt("%.4f", mv) + ", Bayes " +
                   fmt("%.4f", bayes);
  }
  return c.out;
}

Outcome end_to_end_improvement() {
  Checker c;
  BenchmarkParams p;
  p.num_locations = 12000;
  p.num_images = 8;
  p.feature_dim = 16;
  p.separation = 0.5;
  p.seed = 505;
  const auto bench = generate_benchmark(p);
  const std::size_t n_train = 10000;
  const auto train_lm = bench.label_matrix.slice(0, n_train);
  const auto model = fit(train_lm, {});
  const auto pseudo = predict_all(model, train_lm);
  const auto student = train_student(bench.features.slice(0, n_train), pseudo,
                                     MlpConfig::linear(bench.features.row_length(), p.seed), {});

  const auto held_truth = bench.ground_truth.slice(n_train, p.num_locations);
  const auto held_features = bench.features.slice(n_train, p.num_locations);
  const auto held_lm = bench.label_matrix.slice(n_train, p.num_locations);
  const double student_acc = accuracy(binarize_all(predict_student(student.params, held_features)), held_truth);
  double best_lf = 0;
  for (std::size_t j = 0; j < held_lm.cols(); ++j) {
    best_lf = std::max(best_lf, accuracy(votes_as_predictions(held_lm.location_ids(), held_lm.column(j)), held_truth));
  }
  const double mv = accuracy(majority_vote(held_lm), held_truth);
  c.require(student_acc > best_lf, "student " + fmt("%.4f", student_acc) + " <= best LF " + fmt("%.4f", best_lf));
  c.require(student_acc >= mv, "student " + fmt("%.4f", student_acc) + " < majority " + fmt("%.4f", mv));
  if (c.out.pass) {
    c.out.detail = "held-out: student " + fmt("%.4f", student_acc) + ", best LF " + fmt("%.4f", best_lf) +
                   ", majority " + fmt("%.4f", mv);
  }
  return c.out;
}

Outcome table_consistency() {
  struct Row {
    const char* name;
    double precision, recall, f1;
  };
  const Row rows[] = {
      {"Llama SQ", 0.73, 0.42, 0.53}, {"Llama MQ", 0.57, 0.80, 0.66}, {"Qwen SQ", 0.63, 0.83, 0.72},
      {"SM + reference", 0.60, 0.81, 0.69}, {"LM", 0.64, 0.76, 0.69}, {"SM + LM", 0.68, 0.81, 0.74},
  };
  Checker c;
  double worst = 0;
  for (const auto& r : rows) {
    const double f1 = *f1_score(r.precision, r.recall);
    const double direct = 2 * r.precision * r.recall / (r.precision + r.recall);
    c.require(std::abs(f1 - direct) <= 1e-15, std::string(r.name) + ": f1_score disagrees with 2PR/(P+R)");
    worst = std::max(worst, std::abs(f1 - r.f1));
    c.require(std::abs(f1 - r.f1) <= 0.015, std::string(r.name) + ": recomputed " + fmt("%.4f", f1));
  }
  if (c.out.pass) c.out.detail = "6 rows, max |dF1| " + fmt("%.4f", worst);
  return c.out;
}

/// Loop forward pass over the flat layout. `kink` receives the smallest |hidden pre-activation|.
double oracle_student_loss(const std::vector<std::size_t>& dims, const Vec& flat, const Mat& x, const Mat& t,
                           double* kink = nullptr) {
  double total = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<double> a(x.col(j).data(), x.col(j).data() + x.rows());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const std::size_t in = dims[l], out = dims[l + 1];
      std::vector<double> z(out);
      for (std::size_t r = 0; r < out; ++r) {
        double s = flat(static_cast<Eigen::Index>(off + out * in + r));
        for (std::size_t q = 0; q < in; ++q) s += flat(static_cast<Eigen::Index>(off + r * in + q)) * a[q];
        if (l + 2 < dims.size() && kink) *kink = std::min(*kink, std::abs(s));
        z[r] = l + 2 < dims.size() ? std::max(0.0, s) : s;
      }
      off += out * (in + 1);
      a = z;
    }
    const double mx = std::max(a[0], a[1]);
    const double lse = mx + std::log(std::exp(a[0] - mx) + std::exp(a[1] - mx));
    for (int k = 0; k < 2; ++k) {
      if (t(k, j) > 0) total += t(k, j) * (std::log(t(k, j)) - (a[k] - lse));
    }
  }
  return total / static_cast<double>(x.cols());
}

Outcome student_gradient() {
  Checker c;
  Rng rng(707);
  double worst = 0;
  int configs = 0;
  bool saw_linear = false;
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::size_t> dims{2 + rng.below(10)};
    const std::size_t hidden = trial % 3 == 0 ? 0 : 1 + rng.below(2);
    for (std::size_t h = 0; h < hidden; ++h) dims.push_back(1 + rng.below(6));
    dims.push_back(2);
    saw_linear |= dims.size() == 2;
    auto params = MlpParams<double>::initialize({dims, static_cast<std::uint64_t>(trial)});
    for (Eigen::Index i = 0; i < params.flat().size(); ++i) params.flat()(i) += 0.1 * rng.normal();
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(8));
    Mat x(static_cast<Eigen::Index>(dims.front()), n);
    Mat t(2, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = rng.uniform();
      t(0, j) = 1 - p;
      t(1, j) = p;
    }
    const double h = 1e-4;
    // central differences are only meaningful away from the ReLU kink
    double kink = 0;
    do {
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
      kink = std::numeric_limits<double>::infinity();
      oracle_student_loss(dims, params.flat(), x, t, &kink);
    } while (kink < 10 * h);
    const auto lg = loss_gradient(params, x, t);
    Vec numeric(params.flat().size());
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      Vec plus = params.flat(), minus = params.flat();
      plus(i) += h;
      minus(i) -= h;
      numeric(i) = (oracle_student_loss(dims, plus, x, t) - oracle_student_loss(dims, minus, x, t)) / (2 * h);
    }
    worst = std::max(worst, (lg.gradient - numeric).norm() / std::max(lg.gradient.norm(), numeric.norm()));
    ++configs;
  }
  c.require(saw_linear, "no single-layer configuration exercised");
  c.require(worst <= 1e-4, "max rel. err " + fmt("%.3g", worst));

  double kl_worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    const ClassDistribution t{1 - a, a}, p{1 - b, b};
    kl_worst = std::max(kl_worst, std::abs(noise_aware_loss(t, t)));
    kl_worst = std::max(kl_worst, std::abs(noise_aware_loss(p, {0.0, 1.0}) + std::log(p.p_pos)));
    kl_worst = std::max(kl_worst, std::abs(noise_aware_loss(p, {1.0, 0.0}) + std::log(p.p_neg)));
  }
  c.require(kl_worst <= 1e-12, "KL identity error " + fmt("%.3g", kl_worst));
  if (c.out.pass) {
    c.out.detail = std::to_string(configs) + " configs, max rel. err " + fmt("%.3g", worst) + ", KL identities " +
                   fmt("%.3g", kl_worst);
  }
  return c.out;
}

Outcome voting_invariants() {
  Checker c;
  Rng rng(808);
  for (int trial = 0; trial < 1000; ++trial) {
    LocationAnnotations a{"loc", {}};
    const std::size_t labelers = 1 + rng.below(4);
    for (std::size_t l = 0; l < labelers; ++l) {
      std::vector<int> s(8);
      for (auto& v : s) v = rng.uniform() < 0.6 ? 0 : static_cast<int>(rng.below(5));
      a.per_labeler.push_back(s);
    }
    const bool sp = aggregate_location(a, VotingScheme::StrictPositive) == Label::Positive;
    const bool lp = aggregate_location(a, VotingScheme::LenientPositive) == Label::Positive;
    const bool ln = aggregate_location(a, VotingScheme::LenientNegative) == Label::Positive;
    const bool sn = aggregate_location(a, VotingScheme::StrictNegative) == Label::Positive;
    c.require(!sp || lp, "StrictPositive positive but LenientPositive negative");
    c.require(!ln || sn, "LenientNegative positive but StrictNegative negative");
  }
  const std::vector<ExpertAnnotation> fixture = {
      {"p1", "e1", {4, 3, 0, 0}}, {"p2", "e1", {4, 0, 0, 0}}, {"p3", "e1", {2, 0, 0, 0}},
      {"p4", "e1", {1, 0, 0, 0}}, {"p5", "e1", {0, 0, 0, 0}},
  };
  std::set<std::vector<Label>> distinct;
  for (auto s : kAllSchemes) distinct.insert(build_ground_truth(fixture, {"p1", "p2", "p3", "p4", "p5"}, s).labels);
  c.require(distinct.size() >= 3, "only " + std::to_string(distinct.size()) + " distinct labelings");
  if (c.out.pass) c.out.detail = "1000 random sets; fixture gives " + std::to_string(distinct.size()) + " labelings";
  return c.out;
}

Outcome http_conformance() {
  Checker c;
  const std::filesystem::path golden = WSGULLY_GOLDEN_DIR;
  using wsgully::testing::ChatCall;
  using wsgully::testing::MockReply;

  const std::vector<std::string> images = {"\x89PNG\r\n\x1a\nfirst", std::string("second\0\xff", 8)};
  const std::string question = "Is there an ephemeral gully in these images? Answer yes or no.";
  c.require(build_chat_request("qwen2.5vl:72b", question, {}) ==
                wsgully::testing::slurp(golden / "chat_request_text.json"),
            "text-only request differs from golden file");
  {
    wsgully::testing::MockOllama mock([](const ChatCall&) { return MockReply{200, "yes"}; });
    VlmEndpointConfig cfg;
    cfg.base_url = mock.base_url();
    ChatClient client(cfg);
    client.chat("llama3.2-vision:90b", question, images);
    const auto calls = mock.calls();
    c.require(calls.size() == 1 && calls[0].body == wsgully::testing::slurp(golden / "chat_request_images.json"),
              "request body on the wire differs from golden file");
  }

  wsgully::testing::TempDir dir;
  DatasetManifest manifest;
  manifest.n_images = 1;
  for (int k = 0; k < 10; ++k) {
    const std::string id = "loc" + std::to_string(k);
    wsgully::testing::write_text(dir / (id + ".png"), "pixels of " + id);
    manifest.records.push_back({id, {{id + ".png", 100.0, 2020}}});
  }
  auto has = [](const ChatCall& call, int k) {
    return call.body.find(base64_encode("pixels of loc" + std::to_string(k))) != std::string::npos;
  };

  {
    wsgully::testing::MockOllama mock([&](const ChatCall& call) {
      if (has(call, 4)) return MockReply{200, "yes", "", 1.0};
      return MockReply{200, "No gully."};
    });
    LabelingContext ctx;
    ctx.image_root = dir.path();
    VlmEndpointConfig cfg;
    cfg.base_url = mock.base_url();
    cfg.request_timeout_s = 0.25;
    cfg.max_retries = 2;
    cfg.backoff_base_s = 0.01;
    ctx.endpoints["e"] = cfg;
    const auto column = run_labeling_function({"sq", VlmSingleQuestion{"e", "m", "q"}}, manifest, ctx);
    for (std::size_t k = 0; k < 10; ++k) {
      c.require(column[k] == (k == 4 ? Vote::Abstain : Vote::Negative), "timeout handling wrong at row " + std::to_string(k));
    }
    std::size_t attempts = 0;
    for (const auto& call : mock.calls()) attempts += has(call, 4);
    c.require(attempts == 3, "expected 3 attempts for the failing location, saw " + std::to_string(attempts));
  }
  {
    wsgully::testing::MockOllama mock([&](const ChatCall& call) {
      for (int k = 0; k < 10; ++k) {
        if (has(call, k)) return MockReply{200, k % 2 ? "no" : "yes", "", 0.03 * (10 - k)};
      }
      return MockReply{500, ""};
    });
    LabelingContext ctx;
    ctx.image_root = dir.path();
    VlmEndpointConfig cfg;
    cfg.base_url = mock.base_url();
    cfg.max_in_flight = 4;
    ctx.endpoints["e"] = cfg;
    std::vector<std::size_t> completion;
    ctx.on_result = [&](std::size_t k, Vote) { completion.push_back(k); };
    const auto column = run_labeling_function({"sq", VlmSingleQuestion{"e", "m", "q"}}, manifest, ctx);
    for (std::size_t k = 0; k < 10; ++k) {
      c.require(column[k] == (k % 2 ? Vote::Negative : Vote::Positive), "row " + std::to_string(k) + " out of order");
    }
    c.require(mock.max_in_flight() <= 4, "more than 4 concurrent requests");
    c.require(completion != std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9},
              "completion order never differed from manifest order");
  }
  if (c.out.pass) c.out.detail = "golden bytes match; timeout -> Abstain for loc4 only; 10 rows ordered at 4 in flight";
  return c.out;
}

Outcome determinism() {
  Checker c;
  const std::string config = R"({
    "lfs": [
      {"name": "a", "kind": "synthetic", "accuracy": 0.85, "abstain_rate": 0.1, "seed": 1},
      {"name": "b", "kind": "synthetic", "accuracy": 0.75, "abstain_rate": 0.1, "seed": 2},
      {"name": "c", "kind": "synthetic", "accuracy": 0.65, "abstain_rate": 0.1, "seed": 3}
    ],
    "synth": {"num_locations": 2000},
    "student": {"layer_dims": [128, 16, 2], "epochs": 5, "holdout_fraction": 0.2},
    "eval": {"source": "student", "subset": "holdout"},
    "paths": {"manifest": "manifest.jsonl", "features": "features.egf", "ground_truth": "ground_truth.csv",
              "label_matrix": "labels.csv"}
  })";
  const char* artifacts[] = {"manifest.jsonl", "features.egf", "features.egf.ids", "ground_truth.csv",
                             "label_matrix.csv", "labels.csv", "label_model.json", "pseudo_labels.csv",
                             "student.json", "student_loss.csv", "metrics.json"};
  wsgully::testing::TempDir a, b;
  for (const auto* dir : {&a, &b}) {
    wsgully::testing::write_text(*dir / "config.json", config);
    for (const char* stage : {"synth", "label", "fit", "infer", "train", "eval"}) {
      std::ostringstream out, err;
      const int code = run_cli({stage, "--config", (*dir / "config.json").string(), "--seed", "77"}, out, err);
      c.require(code == kExitOk, std::string(stage) + " exited " + std::to_string(code) + ": " + err.str());
    }
  }
  for (const char* f : artifacts) {
    c.require(std::filesystem::exists(a / f), std::string(f) + " missing");
    c.require(wsgully::testing::slurp(a / f) == wsgully::testing::slurp(b / f), std::string(f) + " differs");
  }
  if (c.out.pass) c.out.detail = "11 artifacts byte-identical across two runs";
  return c.out;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "label-model gradient vs finite differences", 10, gradient_correctness},
      {2, "partition function vs brute force", 5, partition_oracle},
      {3, "posterior invariance and label-flip antisymmetry", 0, conditional_invariance},
      {4, "synthetic recovery", 60, synthetic_recovery},
      {5, "student beats labeling functions on held-out data", 300, end_to_end_improvement},
      {6, "reported F1 consistent with precision/recall", 0, table_consistency},
      {7, "student gradient and KL identities", 0, student_gradient},
      {8, "voting-scheme invariants", 0, voting_invariants},
      {9, "HTTP conformance against a mock endpoint", 0, http_conformance},
      {10, "pipeline determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.pass && cr.budget_s > 0 && secs >= cr.budget_s) {
      o = {false, "took " + fmt("%.2f", secs) + " s, budget " + fmt("%.0f", cr.budget_s) + " s"};
    }
    failed += !o.pass;
    std::printf("%s  %2d  %-50s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", cr.id, cr.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
