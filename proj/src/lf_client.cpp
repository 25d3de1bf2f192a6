// SPDX-License-Identifier: Apache-2.0
#include "wsgully/lf_client.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "wsgully/io.hpp"

namespace wsgully {

// ---------------------------------------------------------------------------
// Configuration

void VlmEndpointConfig::validate() const {
  if (base_url.rfind("http://", 0) != 0) {
    throw ConfigError("endpoint base_url must start with http:// (got '" + base_url + "')");
  }
  if (!(request_timeout_s > 0.0)) throw ConfigError("request_timeout_s must be positive");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (!(backoff_base_s >= 0.0)) throw ConfigError("backoff_base_s must be >= 0");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (max_payload_bytes < 1) throw ConfigError("max_payload_bytes must be >= 1");
}

std::optional<std::string> LfSpec::endpoint() const {
  if (const auto* s = std::get_if<VlmSingleQuestion>(&kind)) return s->endpoint;
  if (const auto* m = std::get_if<VlmMultiQuestion>(&kind)) return m->endpoint;
  return std::nullopt;
}

void LfSpec::validate() const {
  if (name.empty() || name.find_first_of(",\r\n") != std::string::npos) {
    throw ConfigError("labeling function name '" + name + "' must be non-empty and CSV-safe");
  }
  if (const auto* s = std::get_if<SyntheticLf>(&kind)) {
    if (!(s->accuracy >= 0.0 && s->accuracy <= 1.0)) {
      throw ConfigError(name + ": accuracy must lie in [0, 1]");
    }
    if (!(s->abstain_rate >= 0.0 && s->abstain_rate < 1.0)) {
      throw ConfigError(name + ": abstain_rate must lie in [0, 1)");
    }
  } else if (const auto* q = std::get_if<VlmSingleQuestion>(&kind)) {
    if (q->model.empty() || q->question.empty()) {
      throw ConfigError(name + ": model and question are required");
    }
  } else if (const auto* mq = std::get_if<VlmMultiQuestion>(&kind)) {
    if (mq->vlm_model.empty() || mq->llm_model.empty()) {
      throw ConfigError(name + ": vlm_model and llm_model are required");
    }
    if (mq->questions.empty()) throw ConfigError(name + ": question list is empty");
  }
}

// ---------------------------------------------------------------------------
// Synthetic labelers

Vote synthetic_label(Label truth, double accuracy, double abstain_rate, Rng& rng) {
  const double u_abstain = rng.uniform();
  const double u_correct = rng.uniform();
  if (u_abstain < abstain_rate) return Vote::Abstain;
  const bool correct = u_correct < accuracy;
  if (correct) return to_vote(truth);
  return truth == Label::Positive ? Vote::Negative : Vote::Positive;
}

Vote synthetic_vote_at(const SyntheticLf& lf, std::size_t k, Label truth) {
  Rng rng(mix_seed(lf.seed, k));
  return synthetic_label(truth, lf.accuracy, lf.abstain_rate, rng);
}

std::vector<Vote> synthetic_column(const SyntheticLf& lf, std::span<const Label> truth) {
  std::vector<Vote> out(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) out[k] = synthetic_vote_at(lf, k, truth[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Chat protocol

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const auto n = (static_cast<unsigned char>(bytes[i]) << 16) |
                   (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                   static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    unsigned n = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) n |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += rest == 2 ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string build_chat_request(std::string_view model, std::string_view text,
                               std::span<const std::string> images,
                               std::size_t max_payload_bytes) {
  nlohmann::ordered_json message;
  message["role"] = "user";
  message["content"] = std::string(text);
  if (!images.empty()) {
    auto encoded = nlohmann::ordered_json::array();
    for (const auto& img : images) encoded.push_back(base64_encode(img));
    message["images"] = std::move(encoded);
  }
  nlohmann::ordered_json body;
  body["model"] = std::string(model);
  body["stream"] = false;
  body["messages"] = nlohmann::ordered_json::array({std::move(message)});
  std::string out = body.dump();
  if (out.size() > max_payload_bytes) {
    throw Error("chat request of " + std::to_string(out.size()) + " bytes exceeds the " +
                std::to_string(max_payload_bytes) + "-byte payload cap");
  }
  return out;
}

std::string extract_chat_content(std::string_view response_body) {
  try {
    const auto doc = nlohmann::json::parse(response_body);
    return doc.at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed chat response: ") + e.what());
  }
}

Vote parse_binary_answer(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    std::string token;
    for (std::size_t c = i; c < j; ++c) {
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(text[c])));
    }
    if (token == "yes") return Vote::Positive;
    if (token == "no") return Vote::Negative;
    i = j;
  }
  return Vote::Abstain;
}

std::string multi_question_transcript(std::string_view aggregation_prompt,
                                      std::span<const std::string> questions,
                                      std::span<const std::string> answers) {
  std::string out(aggregation_prompt);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  out += "\n";
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto n = std::to_string(i + 1);
    out += "\nQuestion " + n + ": " + questions[i] + "\n";
    out += "Answer " + n + ": " + (i < answers.size() ? answers[i] : std::string(kNoAnswer)) + "\n";
  }
  return out;
}

struct ChatClient::Impl {
  httplib::Client http;
  std::string prefix;
  Rng jitter;

  Impl(const std::string& host_port, std::string path_prefix, std::uint64_t seed)
      : http(host_port), prefix(std::move(path_prefix)), jitter(seed) {}
};

namespace {

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const auto after_scheme = base_url.find("://") + 3;
  const auto slash = base_url.find('/', after_scheme);
  if (slash == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, slash), prefix};
}

}  // namespace

ChatClient::ChatClient(VlmEndpointConfig config, std::uint64_t jitter_seed)
    : config_(std::move(config)) {
  config_.validate();
  auto [host_port, prefix] = split_base_url(config_.base_url);
  impl_ = std::make_unique<Impl>(host_port, prefix, jitter_seed);
  const auto timeout = std::chrono::duration<double>(config_.request_timeout_s);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  impl_->http.set_connection_timeout(usec);
  impl_->http.set_read_timeout(usec);
  impl_->http.set_write_timeout(usec);
}

ChatClient::~ChatClient() = default;
ChatClient::ChatClient(ChatClient&&) noexcept = default;
ChatClient& ChatClient::operator=(ChatClient&&) noexcept = default;

void ChatClient::probe() {
  auto res = impl_->http.Get(impl_->prefix + "/api/tags");
  if (!res) {
    throw EndpointError("endpoint " + config_.base_url +
                        " unreachable: " + httplib::to_string(res.error()));
  }
}

std::optional<std::string> ChatClient::chat(std::string_view model, std::string_view text,
                                            std::span<const std::string> images,
                                            const LogSink& log) {
  std::string body;
  try {
    body = build_chat_request(model, text, images, config_.max_payload_bytes);
  } catch (const Error& e) {
    if (log) log(e.what());
    return std::nullopt;
  }
  const std::string path = impl_->prefix + "/api/chat";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait = config_.backoff_base_s * std::ldexp(1.0, attempt - 1) *
                          (0.5 + impl_->jitter.uniform());
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    auto res = impl_->http.Post(path, body, "application/json");
    std::string failure;
    if (!res) {
      failure = httplib::to_string(res.error());
    } else if (res->status != 200) {
      failure = "HTTP " + std::to_string(res->status);
    } else {
      try {
        return extract_chat_content(res->body);
      } catch (const ParseError& e) {
        failure = e.what();
      }
    }
    if (log) {
      log("chat attempt " + std::to_string(attempt + 1) + "/" +
          std::to_string(config_.max_retries + 1) + " failed: " + failure);
    }
  }
  return std::nullopt;
}

Vote single_question_label(ChatClient& client, const VlmSingleQuestion& lf,
                           std::span<const std::string> images, const LogSink& log) {
  const auto reply = client.chat(lf.model, lf.question, images, log);
  if (!reply) return Vote::Abstain;
  return parse_binary_answer(*reply);
}

Vote multi_question_label(ChatClient& client, const VlmMultiQuestion& lf,
                          std::span<const std::string> images, const LogSink& log) {
  std::vector<std::string> answers;
  answers.reserve(lf.questions.size());
  for (const auto& q : lf.questions) {
    auto reply = client.chat(lf.vlm_model, q, images, log);
    answers.push_back(reply ? std::move(*reply) : std::string(kNoAnswer));
  }
  const auto transcript = multi_question_transcript(lf.aggregation_prompt, lf.questions, answers);
  const auto verdict = client.chat(lf.llm_model, transcript, {}, log);
  if (!verdict) return Vote::Abstain;
  return parse_binary_answer(*verdict);
}

std::vector<std::string> load_location_images(const LocationRecord& record,
                                              const std::filesystem::path& root) {
  std::vector<std::string> out;
  out.reserve(record.images.size());
  for (const auto& img : record.images) {
    std::filesystem::path p(img.path);
    if (p.is_relative() && !root.empty()) p = root / p;
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read image '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    out.push_back(ss.str());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running a labeler

std::vector<Vote> run_labeling_function(const LfSpec& spec, const DatasetManifest& manifest,
                                        const LabelingContext& ctx) {
  spec.validate();
  if (manifest.size() == 0) throw Error("manifest is empty");
  const std::size_t k_total = manifest.size();
  std::vector<Vote> column(k_total, Vote::Abstain);

  std::mutex mu;
  auto log = [&](const std::string& line) {
    if (!ctx.log) return;
    std::lock_guard lock(mu);
    ctx.log(line);
  };

  std::vector<std::size_t> pending;
  for (std::size_t k = 0; k < k_total; ++k) {
    const auto& id = manifest.records[k].location_id;
    if (ctx.completed) {
      if (auto it = ctx.completed->find(id); it != ctx.completed->end()) {
        column[k] = it->second;
        continue;
      }
    }
    pending.push_back(k);
  }

  if (const auto* synth = std::get_if<SyntheticLf>(&spec.kind)) {
    if (!ctx.truth) throw ConfigError(spec.name + ": synthetic labelers need ground truth");
    require_aligned(manifest.ids(), ctx.truth->location_ids, "ground truth vs manifest");
    for (std::size_t k : pending) {
      column[k] = synthetic_vote_at(*synth, k, ctx.truth->labels[k]);
      if (ctx.on_result) ctx.on_result(k, column[k]);
    }
    return column;
  }

  const std::string endpoint_name = *spec.endpoint();
  const auto cfg_it = ctx.endpoints.find(endpoint_name);
  if (cfg_it == ctx.endpoints.end()) {
    throw ConfigError(spec.name + ": unknown endpoint '" + endpoint_name + "'");
  }
  const VlmEndpointConfig& cfg = cfg_it->second;
  if (!ctx.skip_probe) ChatClient(cfg).probe();

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  auto worker = [&](std::size_t worker_id) {
    ChatClient client(cfg, mix_seed(worker_id, 0x6a6974));
    while (!stop) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= pending.size()) return;
      const std::size_t k = pending[idx];
      const auto& record = manifest.records[k];
      const std::string where = spec.name + " [" + record.location_id + "] ";
      auto location_log = [&](const std::string& msg) { log(where + msg); };
      Vote vote = Vote::Abstain;
      try {
        const auto images = load_location_images(record, ctx.image_root);
        if (const auto* sq = std::get_if<VlmSingleQuestion>(&spec.kind)) {
          vote = single_question_label(client, *sq, images, location_log);
        } else {
          vote = multi_question_label(client, std::get<VlmMultiQuestion>(spec.kind), images,
                                      location_log);
        }
      } catch (const std::exception& e) {
        location_log(std::string("failed, abstaining: ") + e.what());
        vote = Vote::Abstain;
      }
      column[k] = vote;
      location_log("vote " + std::string(vote_token(vote)));
      if (ctx.on_result) {
        std::lock_guard lock(mu);
        if (stop) return;
        try {
          ctx.on_result(k, vote);
        } catch (...) {
          failure = std::current_exception();
          stop = true;
        }
      }
    }
  };

  const std::size_t n_workers = std::min(cfg.max_in_flight, pending.size());
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker, w);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return column;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

void BenchmarkParams::validate() const {
  if (num_locations < 1) throw ConfigError("synth.num_locations must be >= 1");
  if (accuracies.empty()) throw ConfigError("synth.accuracies must list at least one labeler");
  if (abstain_rates.size() != accuracies.size()) {
    throw ConfigError("synth.abstain_rates must have one entry per labeler");
  }
  if (!(class_prior >= 0.0 && class_prior <= 1.0)) {
    throw ConfigError("synth.class_prior must lie in [0, 1]");
  }
  for (std::size_t j = 0; j < accuracies.size(); ++j) {
    if (!(accuracies[j] >= 0.0 && accuracies[j] <= 1.0)) {
      throw ConfigError("synth.accuracies must lie in [0, 1]");
    }
    if (!(abstain_rates[j] >= 0.0 && abstain_rates[j] < 1.0)) {
      throw ConfigError("synth.abstain_rates must lie in [0, 1)");
    }
  }
  if (num_images < 1 || feature_dim < 1) {
    throw ConfigError("synth.num_images and synth.feature_dim must be >= 1");
  }
  if (!(separation > 0.0) || !std::isfinite(separation)) {
    throw ConfigError("synth.separation must be positive");
  }
}

std::vector<LfSpec> benchmark_lf_specs(const BenchmarkParams& params) {
  std::vector<LfSpec> out;
  for (std::size_t j = 0; j < params.accuracies.size(); ++j) {
    out.push_back({"lf" + std::to_string(j + 1),
                   SyntheticLf{params.accuracies[j], params.abstain_rates[j],
                               mix_seed(params.seed, 100 + j)}});
  }
  return out;
}

SyntheticBenchmark generate_benchmark(const BenchmarkParams& params) {
  params.validate();
  SyntheticBenchmark b;
  b.params = params;
  const std::size_t k_total = params.num_locations;

  const std::size_t width = std::max<std::size_t>(6, std::to_string(k_total).size());
  std::vector<LocationId> ids;
  ids.reserve(k_total);
  for (std::size_t k = 0; k < k_total; ++k) {
    std::string n = std::to_string(k + 1);
    ids.push_back("loc" + std::string(width - n.size(), '0') + n);
  }

  b.manifest.n_images = params.num_images;
  for (std::size_t k = 0; k < k_total; ++k) {
    LocationRecord rec{ids[k], {}};
    for (std::size_t n = 0; n < params.num_images; ++n) {
      const bool high_res = n % 2 == 1;
      rec.images.push_back({"synthetic/" + ids[k] + "/img" + std::to_string(n) + ".png",
                            high_res ? 15.0 : 100.0, 2010 + static_cast<int>(n)});
    }
    b.manifest.records.push_back(std::move(rec));
  }

  Rng label_rng(mix_seed(params.seed, 1));
  b.ground_truth.location_ids = ids;
  b.ground_truth.labels.reserve(k_total);
  for (std::size_t k = 0; k < k_total; ++k) {
    b.ground_truth.labels.push_back(label_rng.uniform() < params.class_prior ? Label::Positive
                                                                             : Label::Negative);
  }

  const auto specs = benchmark_lf_specs(params);
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);
  b.label_matrix = LabelMatrix(ids, names);
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const auto col = synthetic_column(std::get<SyntheticLf>(specs[j].kind), b.ground_truth.labels);
    for (std::size_t k = 0; k < k_total; ++k) b.label_matrix(k, j) = col[k];
  }

  Rng feature_rng(mix_seed(params.seed, 2));
  const std::size_t row = params.num_images * params.feature_dim;
  std::vector<float> values(k_total * row);
  for (std::size_t k = 0; k < k_total; ++k) {
    const double mean =
        b.ground_truth.labels[k] == Label::Positive ? params.separation : -params.separation;
    for (std::size_t i = 0; i < row; ++i) {
      values[k * row + i] = static_cast<float>(mean + feature_rng.normal());
    }
  }
  b.features = FeatureStore(ids, params.num_images, params.feature_dim, std::move(values));
  return b;
}

}  // namespace wsgully
