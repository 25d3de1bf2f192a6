// SPDX-License-Identifier: Apache-2.0
#include "wsgully/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "wsgully/io.hpp"
#include "wsgully/metrics.hpp"

namespace wsgully {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Strict config parsing

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& section) {
  if (!obj.is_object()) throw ConfigError(section + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + section);
    }
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& dst, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + " has the wrong type");
  }
}

template <typename T>
T read_req(const json& obj, const char* key, const std::string& section) {
  if (!obj.contains(key)) throw ConfigError(section + "." + key + " is required");
  T v{};
  read_opt(obj, key, v, section);
  return v;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_relative() ? base / path : path;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) out.push_back(line);
  }
  return out;
}

VlmEndpointConfig parse_endpoint(const json& obj, const std::string& section) {
  check_keys(obj,
             {"base_url", "request_timeout_s", "max_retries", "backoff_base_s", "max_in_flight",
              "max_payload_bytes"},
             section);
  VlmEndpointConfig cfg;
  cfg.base_url = read_req<std::string>(obj, "base_url", section);
  read_opt(obj, "request_timeout_s", cfg.request_timeout_s, section);
  read_opt(obj, "max_retries", cfg.max_retries, section);
  read_opt(obj, "backoff_base_s", cfg.backoff_base_s, section);
  read_opt(obj, "max_in_flight", cfg.max_in_flight, section);
  read_opt(obj, "max_payload_bytes", cfg.max_payload_bytes, section);
  cfg.validate();
  return cfg;
}

LfSpec parse_lf(const json& obj, const fs::path& base, const std::string& section) {
  if (!obj.is_object()) throw ConfigError(section + " must be a JSON object");
  LfSpec spec;
  spec.name = read_req<std::string>(obj, "name", section);
  const auto kind = read_req<std::string>(obj, "kind", section);
  if (kind == "synthetic") {
    check_keys(obj, {"name", "kind", "accuracy", "abstain_rate", "seed"}, section);
    SyntheticLf s;
    s.accuracy = read_req<double>(obj, "accuracy", section);
    read_opt(obj, "abstain_rate", s.abstain_rate, section);
    read_opt(obj, "seed", s.seed, section);
    spec.kind = s;
  } else if (kind == "vlm_single_question") {
    check_keys(obj, {"name", "kind", "endpoint", "model", "question", "question_file"}, section);
    VlmSingleQuestion q;
    q.endpoint = read_req<std::string>(obj, "endpoint", section);
    q.model = read_req<std::string>(obj, "model", section);
    read_opt(obj, "question", q.question, section);
    if (obj.contains("question_file")) {
      const auto lines = read_lines(resolve(base, read_req<std::string>(obj, "question_file", section)));
      if (lines.size() != 1) throw ConfigError(section + ".question_file must hold one question");
      q.question = lines.front();
    }
    spec.kind = q;
  } else if (kind == "vlm_multi_question") {
    check_keys(obj,
               {"name", "kind", "endpoint", "vlm_model", "llm_model", "questions", "questions_file",
                "aggregation_prompt", "aggregation_prompt_file"},
               section);
    VlmMultiQuestion q;
    q.endpoint = read_req<std::string>(obj, "endpoint", section);
    q.vlm_model = read_req<std::string>(obj, "vlm_model", section);
    q.llm_model = read_req<std::string>(obj, "llm_model", section);
    read_opt(obj, "questions", q.questions, section);
    if (obj.contains("questions_file")) {
      q.questions = read_lines(resolve(base, read_req<std::string>(obj, "questions_file", section)));
    }
    read_opt(obj, "aggregation_prompt", q.aggregation_prompt, section);
    if (obj.contains("aggregation_prompt_file")) {
      q.aggregation_prompt =
          read_text_file(resolve(base, read_req<std::string>(obj, "aggregation_prompt_file", section)));
    }
    spec.kind = q;
  } else {
    throw ConfigError(section + ".kind '" + kind + "' is not one of synthetic, "
                      "vlm_single_question, vlm_multi_question");
  }
  spec.validate();
  return spec;
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("paths.") + what + " is required");
  if (!fs::exists(path)) {
    throw ConfigError(std::string("paths.") + what + " '" + path.string() + "' does not exist");
  }
}

void require_output(const fs::path& path, const char* what) {
  if (!fs::exists(path)) {
    throw ConfigError(std::string(what) + " '" + path.string() +
                      "' does not exist; run the stage that produces it first");
  }
}

void ensure_output_dir(const PathsConfig& paths) {
  std::error_code ec;
  fs::create_directories(paths.output_dir, ec);
  if (ec || !fs::is_directory(paths.output_dir)) {
    throw ConfigError("cannot create output directory '" + paths.output_dir.string() + "'");
  }
}

GroundTruthSet subset_rows(const GroundTruthSet& set, const PipelineConfig& cfg) {
  const std::size_t n_train = training_rows(set.size(), cfg.student.holdout_fraction);
  if (cfg.eval.subset == "all") return set;
  if (cfg.eval.subset == "train") return set.slice(0, n_train);
  if (cfg.eval.subset == "holdout") return set.slice(n_train, set.size());
  throw ConfigError("eval.subset must be all, train or holdout");
}

// Journal of completed cells for `label --resume`: "<lf>,<location_id>,<token>" per line.
using Journal = std::unordered_map<std::string, std::unordered_map<LocationId, Vote>>;

Journal read_journal(const fs::path& path) {
  Journal journal;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.rfind(',');
    // A torn final line from an interrupted write is ignored.
    if (a == std::string::npos || a == b) continue;
    try {
      journal[line.substr(0, a)][line.substr(a + 1, b - a - 1)] = parse_vote_token(line.substr(b + 1));
    } catch (const ParseError&) {
    }
  }
  return journal;
}

}  // namespace

fs::path PathsConfig::label_matrix_path() const {
  return label_matrix.empty() ? output_dir / "label_matrix.csv" : label_matrix;
}

std::size_t training_rows(std::size_t total, double holdout_fraction) {
  const auto held = static_cast<std::size_t>(std::floor(static_cast<double>(total) * holdout_fraction));
  return total - std::min(total, held);
}

PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, {"endpoints", "lfs", "label_model", "student", "synth", "paths", "eval"}, "config");

  PipelineConfig cfg;
  cfg.paths.output_dir = base_dir.empty() ? fs::path(".") : base_dir;
  if (doc.contains("endpoints")) {
    if (!doc["endpoints"].is_object()) throw ConfigError("endpoints must be a JSON object");
    for (const auto& [name, ep] : doc["endpoints"].items()) {
      cfg.endpoints[name] = parse_endpoint(ep, "endpoints." + name);
    }
  }

  if (doc.contains("lfs")) {
    if (!doc["lfs"].is_array()) throw ConfigError("lfs must be an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < doc["lfs"].size(); ++i) {
      auto spec = parse_lf(doc["lfs"][i], base_dir, "lfs[" + std::to_string(i) + "]");
      if (!names.insert(spec.name).second) {
        throw ConfigError("duplicate labeling function name '" + spec.name + "'");
      }
      if (auto ep = spec.endpoint(); ep && !cfg.endpoints.count(*ep)) {
        throw ConfigError(spec.name + ": unknown endpoint '" + *ep + "'");
      }
      cfg.lfs.push_back(std::move(spec));
    }
  }

  if (doc.contains("label_model")) {
    const auto& lm = doc["label_model"];
    const std::string s = "label_model";
    check_keys(lm, {"epochs", "learning_rate", "seed", "correlations", "max_component_size"}, s);
    read_opt(lm, "epochs", cfg.label_model.epochs, s);
    read_opt(lm, "learning_rate", cfg.label_model.learning_rate, s);
    read_opt(lm, "seed", cfg.label_model.seed, s);
    read_opt(lm, "max_component_size", cfg.label_model.max_component_size, s);
    std::vector<std::array<std::size_t, 2>> pairs;
    read_opt(lm, "correlations", pairs, s);
    for (const auto& p : pairs) cfg.label_model.correlations.pairs.emplace_back(p[0], p[1]);
  }
  cfg.label_model.validate();

  if (doc.contains("student")) {
    const auto& st = doc["student"];
    const std::string s = "student";
    check_keys(st, {"layer_dims", "seed", "epochs", "batch_size", "learning_rate", "holdout_fraction"},
               s);
    read_opt(st, "layer_dims", cfg.student.layer_dims, s);
    read_opt(st, "seed", cfg.student.seed, s);
    read_opt(st, "epochs", cfg.student.training.epochs, s);
    read_opt(st, "batch_size", cfg.student.training.batch_size, s);
    read_opt(st, "learning_rate", cfg.student.training.learning_rate, s);
    read_opt(st, "holdout_fraction", cfg.student.holdout_fraction, s);
    cfg.student.training.seed = cfg.student.seed;
    if (!(cfg.student.holdout_fraction >= 0.0 && cfg.student.holdout_fraction < 1.0)) {
      throw ConfigError("student.holdout_fraction must lie in [0, 1)");
    }
    if (!cfg.student.layer_dims.empty()) MlpConfig{cfg.student.layer_dims, 0}.validate();
  }
  cfg.student.training.validate();

  if (doc.contains("synth")) {
    const auto& sy = doc["synth"];
    const std::string s = "synth";
    check_keys(sy,
               {"num_locations", "class_prior", "accuracies", "abstain_rates", "num_images",
                "feature_dim", "separation", "seed"},
               s);
    read_opt(sy, "num_locations", cfg.synth.num_locations, s);
    read_opt(sy, "class_prior", cfg.synth.class_prior, s);
    read_opt(sy, "accuracies", cfg.synth.accuracies, s);
    read_opt(sy, "abstain_rates", cfg.synth.abstain_rates, s);
    read_opt(sy, "num_images", cfg.synth.num_images, s);
    read_opt(sy, "feature_dim", cfg.synth.feature_dim, s);
    read_opt(sy, "separation", cfg.synth.separation, s);
    read_opt(sy, "seed", cfg.synth.seed, s);
  }

  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    const std::string s = "paths";
    check_keys(p,
               {"manifest", "features", "annotations", "ground_truth", "label_matrix", "image_root",
                "output_dir"},
               s);
    auto get = [&](const char* key) {
      std::string v;
      read_opt(p, key, v, s);
      return resolve(base_dir, v);
    };
    cfg.paths.manifest = get("manifest");
    cfg.paths.features = get("features");
    cfg.paths.annotations = get("annotations");
    cfg.paths.ground_truth = get("ground_truth");
    cfg.paths.label_matrix = get("label_matrix");
    cfg.paths.image_root = get("image_root");
    if (p.contains("output_dir")) cfg.paths.output_dir = get("output_dir");
  }

  if (doc.contains("eval")) {
    const auto& ev = doc["eval"];
    const std::string s = "eval";
    check_keys(ev, {"scheme", "threshold", "source", "subset"}, s);
    std::string scheme;
    read_opt(ev, "scheme", scheme, s);
    if (!scheme.empty()) cfg.eval.scheme = parse_scheme(scheme);
    read_opt(ev, "threshold", cfg.eval.threshold, s);
    read_opt(ev, "source", cfg.eval.source, s);
    read_opt(ev, "subset", cfg.eval.subset, s);
  }
  if (!(cfg.eval.threshold > 0.0 && cfg.eval.threshold < 1.0)) {
    throw ConfigError("eval.threshold must lie in (0, 1)");
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  return parse_pipeline_config(read_text_file(path), fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Stages

void cmd_synth(const PipelineConfig& cfg, std::ostream& log) {
  cfg.synth.validate();
  ensure_output_dir(cfg.paths);
  const auto bench = generate_benchmark(cfg.synth);
  write_manifest(bench.manifest, cfg.paths.output("manifest.jsonl"));
  write_label_matrix(bench.label_matrix, cfg.paths.output("label_matrix.csv"));
  write_feature_store(bench.features, cfg.paths.output("features.egf"));
  write_ground_truth(bench.ground_truth, cfg.paths.output("ground_truth.csv"));
  log << "synth: wrote " << bench.manifest.size() << " locations, "
      << bench.label_matrix.cols() << " labeling functions to " << cfg.paths.output_dir.string()
      << "\n";
}

void cmd_label(const PipelineConfig& cfg, const LabelRunOptions& options, std::ostream& log) {
  require_file(cfg.paths.manifest, "manifest");
  if (cfg.lfs.empty()) throw ConfigError("lfs is empty; nothing to label");
  const bool need_truth = std::any_of(cfg.lfs.begin(), cfg.lfs.end(), [](const LfSpec& s) {
    return std::holds_alternative<SyntheticLf>(s.kind);
  });
  if (need_truth) require_file(cfg.paths.ground_truth, "ground_truth");
  ensure_output_dir(cfg.paths);

  const auto manifest = read_manifest(cfg.paths.manifest);
  GroundTruthSet truth;
  if (need_truth) {
    truth = read_ground_truth(cfg.paths.ground_truth);
    require_aligned(manifest.ids(), truth.location_ids, "ground truth vs manifest");
  }

  std::set<std::string> probed;
  for (const auto& spec : cfg.lfs) {
    if (auto ep = spec.endpoint(); ep && probed.insert(*ep).second) {
      ChatClient(cfg.endpoints.at(*ep)).probe();
    }
  }

  const fs::path out_path = cfg.paths.label_matrix_path();
  fs::path journal_path = out_path;
  journal_path += ".partial";
  Journal journal;
  if (options.resume && fs::exists(journal_path)) {
    journal = read_journal(journal_path);
  } else {
    std::ofstream(journal_path, std::ios::trunc);
  }
  std::ofstream journal_out(journal_path, std::ios::app);
  if (!journal_out) throw Error("cannot write '" + journal_path.string() + "'");

  LabelingContext ctx;
  ctx.truth = need_truth ? &truth : nullptr;
  ctx.image_root = cfg.paths.image_root.empty() ? cfg.paths.manifest.parent_path() : cfg.paths.image_root;
  ctx.endpoints = cfg.endpoints;
  ctx.skip_probe = true;
  ctx.log = [&log](const std::string& line) { log << line << "\n"; };

  std::size_t fresh = 0;
  std::vector<std::string> names;
  std::vector<std::vector<Vote>> columns;
  for (const auto& spec : cfg.lfs) {
    ctx.completed = &journal[spec.name];
    ctx.on_result = [&](std::size_t k, Vote v) {
      if (options.stop_after && fresh >= *options.stop_after) {
        throw Error("labeling interrupted after " + std::to_string(fresh) + " new labels");
      }
      journal_out << spec.name << ',' << manifest.records[k].location_id << ',' << vote_token(v)
                  << '\n';
      journal_out.flush();
      ++fresh;
    };
    names.push_back(spec.name);
    columns.push_back(run_labeling_function(spec, manifest, ctx));
  }
  journal_out.close();

  LabelMatrix matrix(manifest.ids(), names);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    std::size_t abstains = 0;
    for (std::size_t k = 0; k < manifest.size(); ++k) {
      matrix(k, j) = columns[j][k];
      abstains += columns[j][k] == Vote::Abstain;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "label: %s abstain rate %.4f (%zu/%zu)\n", names[j].c_str(),
                  static_cast<double>(abstains) / static_cast<double>(manifest.size()), abstains,
                  manifest.size());
    log << buf;
  }
  write_label_matrix(matrix, out_path);
  fs::remove(journal_path);
}

void cmd_fit(const PipelineConfig& cfg, std::ostream& out) {
  const fs::path matrix_path = cfg.paths.label_matrix_path();
  require_output(matrix_path, "label matrix");
  ensure_output_dir(cfg.paths);
  const auto matrix = read_label_matrix(matrix_path);
  if (!cfg.paths.manifest.empty()) {
    require_file(cfg.paths.manifest, "manifest");
    require_aligned(read_manifest(cfg.paths.manifest).ids(), matrix.location_ids(),
                    "label matrix vs manifest");
  }
  const auto model = fit(matrix, cfg.label_model);
  save_label_model(model, cfg.paths.output("label_model.json"));
  out << "fit: final NLL " << format_double(model.final_nll) << "\n";
}

void cmd_infer(const PipelineConfig& cfg, std::ostream& out) {
  const fs::path matrix_path = cfg.paths.label_matrix_path();
  const fs::path model_path = cfg.paths.output("label_model.json");
  require_output(matrix_path, "label matrix");
  require_output(model_path, "label model checkpoint");
  const auto matrix = read_label_matrix(matrix_path);
  if (!cfg.paths.manifest.empty()) {
    require_file(cfg.paths.manifest, "manifest");
    require_aligned(read_manifest(cfg.paths.manifest).ids(), matrix.location_ids(),
                    "label matrix vs manifest");
  }
  const auto model = load_label_model(model_path);
  if (model.lf_names != matrix.lf_names()) {
    throw AlignmentError("label matrix columns do not match the label model's labeling functions");
  }
  const auto labels = predict_all(model, matrix);
  write_pseudo_labels(labels, cfg.paths.output("pseudo_labels.csv"));
  out << "infer: wrote " << labels.size() << " pseudo-labels\n";
}

void cmd_vote(const PipelineConfig& cfg, std::ostream& out) {
  require_file(cfg.paths.manifest, "manifest");
  require_file(cfg.paths.annotations, "annotations");
  ensure_output_dir(cfg.paths);
  const auto manifest = read_manifest(cfg.paths.manifest);
  const auto annotations = read_annotations(cfg.paths.annotations, manifest.n_images);
  const auto truth = build_ground_truth(annotations, manifest.ids(), cfg.eval.scheme);
  write_ground_truth(truth, cfg.paths.output("expert_ground_truth.csv"));
  const auto positives = std::count(truth.labels.begin(), truth.labels.end(), Label::Positive);
  out << "vote: " << scheme_name(cfg.eval.scheme) << " -> " << positives << " positive of "
      << truth.size() << "\n";
}

void cmd_train(const PipelineConfig& cfg, std::ostream& out) {
  require_file(cfg.paths.features, "features");
  const fs::path labels_path = cfg.paths.output("pseudo_labels.csv");
  require_output(labels_path, "pseudo-labels");
  const auto features = read_feature_store(cfg.paths.features);
  const auto targets = read_pseudo_labels(labels_path);
  require_aligned(features.location_ids(), targets.location_ids, "pseudo-labels vs features");

  const std::size_t n_train = training_rows(features.rows(), cfg.student.holdout_fraction);
  MlpConfig mlp{cfg.student.layer_dims, cfg.student.seed};
  if (mlp.layer_dims.empty()) mlp = MlpConfig::linear(features.row_length(), cfg.student.seed);
  auto result =
      train_student(features.slice(0, n_train), targets.slice(0, n_train), mlp, cfg.student.training);
  save_student(result.params, cfg.paths.output("student.json"));
  write_loss_log(result.epoch_loss, cfg.paths.output("student_loss.csv"));
  out << "train: " << n_train << " locations, mean loss " << format_double(result.epoch_loss.front())
      << " -> " << format_double(result.epoch_loss.back()) << "\n";
}

MetricsReport cmd_eval(const PipelineConfig& cfg, std::ostream& out) {
  require_file(cfg.paths.ground_truth, "ground_truth");
  const auto& source = cfg.eval.source;

  GroundTruthSet preds;
  if (source == "pseudo") {
    const auto path = cfg.paths.output("pseudo_labels.csv");
    require_output(path, "pseudo-labels");
    preds = binarize_all(read_pseudo_labels(path), cfg.eval.threshold);
  } else if (source == "majority" || source.rfind("lf:", 0) == 0) {
    const auto path = cfg.paths.label_matrix_path();
    require_output(path, "label matrix");
    const auto matrix = read_label_matrix(path);
    if (source == "majority") {
      preds = majority_vote(matrix);
    } else {
      preds = votes_as_predictions(matrix.location_ids(),
                                   matrix.column(matrix.column_index(source.substr(3))));
    }
  } else if (source == "student") {
    require_file(cfg.paths.features, "features");
    const auto path = cfg.paths.output("student.json");
    require_output(path, "student checkpoint");
    preds = binarize_all(predict_student(load_student(path), read_feature_store(cfg.paths.features)),
                         cfg.eval.threshold);
  } else if (source.rfind("csv:", 0) == 0) {
    const fs::path path = source.substr(4);
    require_output(path, "reference labels");
    preds = read_ground_truth(path);
  } else {
    throw ConfigError("eval.source '" + source +
                      "' is not one of pseudo, majority, student, lf:<name>, csv:<path>");
  }

  const auto truth = read_ground_truth(cfg.paths.ground_truth);
  require_aligned(truth.location_ids, preds.location_ids, "predictions vs ground truth");
  const auto cm = confusion(subset_rows(preds, cfg), subset_rows(truth, cfg));
  const auto report = compute_metrics(cm);
  ensure_output_dir(cfg.paths);
  write_file_atomic(cfg.paths.output("metrics.json"), metrics_to_json(report, cm));
  out << metrics_table({{source, report}});
  return report;
}

// ---------------------------------------------------------------------------
// Command line

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weak-supervision pipeline: labeling functions, label model, student, evaluation",
               "wsgully"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool resume = false;
  std::string scheme;
  std::optional<double> threshold;
  std::string source;

  app.add_option("command", command, "Pipeline stage")
      ->required()
      ->check(CLI::IsMember({"synth", "label", "fit", "infer", "vote", "train", "eval"}));
  app.add_option("--config", config_path, "Pipeline config (JSON)");
  app.add_option("--seed", seed, "Seed for the stage (synth, fit, train)");
  app.add_option("--out", out_dir, "Output directory (overrides paths.output_dir)");
  app.add_flag("--resume", resume, "label: continue a previously interrupted run");
  app.add_option("--scheme", scheme,
                 "Voting scheme: strict-positive, lenient-positive, lenient-negative, strict-negative");
  app.add_option("--threshold", threshold, "Binarization threshold for eval");
  app.add_option("--source", source, "eval: pseudo, majority, student, lf:<name>, csv:<path>");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    PipelineConfig cfg;
    if (!config_path.empty()) {
      cfg = load_pipeline_config(config_path);
    } else if (command != "synth") {
      throw ConfigError("--config is required for '" + command + "'");
    }
    if (!out_dir.empty()) cfg.paths.output_dir = out_dir;
    if (!scheme.empty()) cfg.eval.scheme = parse_scheme(scheme);
    if (threshold) {
      if (!(*threshold > 0.0 && *threshold < 1.0)) throw ConfigError("--threshold must lie in (0, 1)");
      cfg.eval.threshold = *threshold;
    }
    if (!source.empty()) cfg.eval.source = source;
    if (seed) {
      cfg.synth.seed = *seed;
      cfg.label_model.seed = *seed;
      cfg.student.seed = *seed;
      cfg.student.training.seed = *seed;
    }

    if (command == "synth") cmd_synth(cfg, err);
    if (command == "label") cmd_label(cfg, {resume, std::nullopt}, err);
    if (command == "fit") cmd_fit(cfg, out);
    if (command == "infer") cmd_infer(cfg, out);
    if (command == "vote") cmd_vote(cfg, out);
    if (command == "train") cmd_train(cfg, out);
    if (command == "eval") cmd_eval(cfg, out);
    return kExitOk;
  } catch (const EndpointError& e) {
    err << "wsgully: " << e.what() << "\n";
    return kExitEndpoint;
  } catch (const AlignmentError& e) {
    err << "wsgully: " << e.what() << "\n";
    return kExitMisaligned;
  } catch (const std::exception& e) {
    err << "wsgully: " << e.what() << "\n";
    return kExitInvalid;
  }
}

}  // namespace wsgully
