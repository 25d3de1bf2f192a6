// SPDX-License-Identifier: Apache-2.0
//
// Labeling functions: synthetic noisy annotators and VLM-backed labelers that talk to
// an Ollama-compatible `/api/chat` endpoint, in either the single-question or the
// multi-question (VLM answers, LLM aggregates) form.
#ifndef WSGULLY_LF_CLIENT_HPP
#define WSGULLY_LF_CLIENT_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "wsgully/rng.hpp"
#include "wsgully/types.hpp"

namespace wsgully {

struct VlmEndpointConfig {
  std::string base_url;
  double request_timeout_s = 120.0;
  int max_retries = 3;
  /// First retry waits about this long; each further retry doubles it (jittered x0.5..1.5).
  double backoff_base_s = 2.0;
  std::size_t max_in_flight = 4;
  std::size_t max_payload_bytes = std::size_t{64} << 20;

  void validate() const;
};

struct SyntheticLf {
  double accuracy = 0.5;
  double abstain_rate = 0.0;
  std::uint64_t seed = 0;
};

struct VlmSingleQuestion {
  std::string endpoint;
  std::string model;
  std::string question;
};

struct VlmMultiQuestion {
  std::string endpoint;
  std::string vlm_model;
  std::string llm_model;
  std::vector<std::string> questions;
  std::string aggregation_prompt;
};

struct LfSpec {
  std::string name;
  std::variant<SyntheticLf, VlmSingleQuestion, VlmMultiQuestion> kind;

  /// Name of the endpoint this labeler talks to; nullopt for synthetic labelers.
  std::optional<std::string> endpoint() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Synthetic labelers

/// Abstain with probability `abstain_rate`, otherwise the true class with probability
/// `accuracy` and the flipped class otherwise. Always consumes exactly two uniforms.
Vote synthetic_label(Label truth, double accuracy, double abstain_rate, Rng& rng);

/// Column for `truth`; location k draws from its own stream seeded by (lf seed, k).
std::vector<Vote> synthetic_column(const SyntheticLf& lf, std::span<const Label> truth);
Vote synthetic_vote_at(const SyntheticLf& lf, std::size_t k, Label truth);

// ---------------------------------------------------------------------------
// Chat protocol

std::string base64_encode(std::string_view bytes);

/// `{"model":..,"stream":false,"messages":[{"role":"user","content":..,"images":[..]}]}`.
/// The "images" key is omitted when there are none. Throws Error above `max_payload_bytes`.
std::string build_chat_request(std::string_view model, std::string_view text,
                               std::span<const std::string> images,
                               std::size_t max_payload_bytes = std::size_t{64} << 20);

/// `message.content` of a chat response body; throws ParseError when absent.
std::string extract_chat_content(std::string_view response_body);

/// First standalone "yes"/"no" (case-insensitive) decides; neither -> Abstain.
Vote parse_binary_answer(std::string_view response_text);

inline constexpr std::string_view kNoAnswer = "(no answer)";

/// Aggregation prompt followed by the numbered question/answer transcript.
std::string multi_question_transcript(std::string_view aggregation_prompt,
                                      std::span<const std::string> questions,
                                      std::span<const std::string> answers);

using LogSink = std::function<void(const std::string&)>;

/// Blocking chat client for one endpoint with timeout, bounded retries and backoff.
/// Not thread-safe; create one per worker.
class ChatClient {
 public:
  explicit ChatClient(VlmEndpointConfig config, std::uint64_t jitter_seed = 0);
  ~ChatClient();
  ChatClient(ChatClient&&) noexcept;
  ChatClient& operator=(ChatClient&&) noexcept;

  /// Throws EndpointError when no HTTP response can be obtained from the server.
  void probe();

  /// Content of the reply, or nullopt once every attempt failed. Failures go to `log`.
  std::optional<std::string> chat(std::string_view model, std::string_view text,
                                  std::span<const std::string> images, const LogSink& log = {});

  const VlmEndpointConfig& config() const noexcept { return config_; }

 private:
  struct Impl;
  VlmEndpointConfig config_;
  std::unique_ptr<Impl> impl_;
};

Vote single_question_label(ChatClient& client, const VlmSingleQuestion& lf,
                           std::span<const std::string> images, const LogSink& log = {});

/// Asks every question in order, then has the LLM classify the transcript. A failed
/// question is recorded as "(no answer)"; a failed aggregation call yields Abstain.
Vote multi_question_label(ChatClient& client, const VlmMultiQuestion& lf,
                          std::span<const std::string> images, const LogSink& log = {});

/// Reads the raw bytes of every image of `record`, resolving relative paths against `root`.
std::vector<std::string> load_location_images(const LocationRecord& record,
                                              const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Running a labeler over a manifest

struct LabelingContext {
  /// Required by synthetic labelers, aligned with the manifest.
  const GroundTruthSet* truth = nullptr;
  std::filesystem::path image_root;
  std::map<std::string, VlmEndpointConfig> endpoints;
  LogSink log;
  /// Locations already labeled by an earlier run; they are not relabeled.
  const std::unordered_map<LocationId, Vote>* completed = nullptr;
  /// Invoked (serialized) for every newly labeled location.
  std::function<void(std::size_t index, Vote vote)> on_result;
  /// Skips the startup probe (the caller already probed).
  bool skip_probe = false;
};

/// One vote per manifest location, in manifest order. Per-location failures become
/// Abstain; an unreachable endpoint at startup throws EndpointError.
std::vector<Vote> run_labeling_function(const LfSpec& spec, const DatasetManifest& manifest,
                                        const LabelingContext& context);

// ---------------------------------------------------------------------------
// Synthetic benchmark

struct BenchmarkParams {
  std::size_t num_locations = 1000;
  double class_prior = 0.5;
  std::vector<double> accuracies{0.85, 0.75, 0.65};
  std::vector<double> abstain_rates{0.1, 0.1, 0.1};
  std::size_t num_images = 8;
  std::size_t feature_dim = 16;
  double separation = 0.5;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid parameters.
  void validate() const;
};

struct SyntheticBenchmark {
  BenchmarkParams params;
  DatasetManifest manifest;
  LabelMatrix label_matrix;
  FeatureStore features;
  GroundTruthSet ground_truth;
};

/// Synthetic labelers matching the benchmark's label-matrix columns ("lf1", "lf2", ...).
std::vector<LfSpec> benchmark_lf_specs(const BenchmarkParams& params);

SyntheticBenchmark generate_benchmark(const BenchmarkParams& params);

}  // namespace wsgully

#endif  // WSGULLY_LF_CLIENT_HPP
