// SPDX-License-Identifier: Apache-2.0
#include "wsgully/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace wsgully {
namespace {

using nlohmann::json;

std::ifstream open_input(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return in;
}

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string::size_type start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(context + "invalid number '" + s + "'");
  }
}

json parse_json_line(const std::string& line, const fs::path& path, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(where(path, lineno) + "malformed JSON at line " + std::to_string(lineno) + ": " +
                     e.what());
  }
}

template <typename T>
T require_field(const json& obj, const char* key, const std::string& context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(context + "missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(context + "field '" + key + "' has the wrong type");
  }
}

void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr std::array<char, 4> kFeatureMagic{'E', 'G', 'F', '1'};
constexpr std::size_t kFeatureHeaderBytes = 4 + 3 * 4;

}  // namespace

std::string read_text_file(const fs::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::out | std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest read_manifest(const fs::path& path) {
  auto in = open_input(path);
  DatasetManifest manifest;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const json obj = parse_json_line(line, path, lineno);
    const std::string ctx = where(path, lineno);

    LocationRecord rec;
    rec.location_id = require_field<std::string>(obj, "location_id", ctx);
    try {
      validate_location_id(rec.location_id);
    } catch (const ParseError& e) {
      throw ParseError(ctx + e.what());
    }
    if (!obj.contains("images") || !obj["images"].is_array()) {
      throw ParseError(ctx + "missing field 'images'");
    }
    for (const auto& img : obj["images"]) {
      ImageRef ref;
      ref.path = require_field<std::string>(img, "path", ctx);
      ref.gsd_cm = require_field<double>(img, "gsd_cm", ctx);
      ref.year = require_field<int>(img, "year", ctx);
      if (!(ref.gsd_cm > 0.0)) throw ParseError(ctx + "gsd_cm must be positive");
      rec.images.push_back(std::move(ref));
    }
    if (rec.images.empty()) throw ParseError(ctx + "location has no images");
    if (manifest.records.empty()) {
      manifest.n_images = rec.images.size();
    } else if (rec.images.size() != manifest.n_images) {
      throw ParseError(ctx + "inconsistent image count at line " + std::to_string(lineno) +
                       " (expected " + std::to_string(manifest.n_images) + ", found " +
                       std::to_string(rec.images.size()) + ")");
    }
    if (!seen.insert(rec.location_id).second) {
      throw ParseError(ctx + "duplicate location_id '" + rec.location_id + "'");
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::string out;
  for (const auto& rec : manifest.records) {
    nlohmann::ordered_json obj;
    obj["location_id"] = rec.location_id;
    auto images = nlohmann::ordered_json::array();
    for (const auto& img : rec.images) {
      nlohmann::ordered_json o;
      o["path"] = img.path;
      o["gsd_cm"] = img.gsd_cm;
      o["year"] = img.year;
      images.push_back(std::move(o));
    }
    obj["images"] = std::move(images);
    out += obj.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Label matrix

Vote parse_vote_token(std::string_view token) {
  if (token == "1") return Vote::Positive;
  if (token == "0") return Vote::Negative;
  if (token == "-1") return Vote::Abstain;
  throw ParseError("invalid vote token '" + std::string(token) + "'");
}

std::string_view vote_token(Vote v) noexcept {
  switch (v) {
    case Vote::Positive:
      return "1";
    case Vote::Negative:
      return "0";
    case Vote::Abstain:
      break;
  }
  return "-1";
}

LabelMatrix read_label_matrix(const fs::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(where(path, 1) + "empty header");
  strip_cr(line);
  auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "location_id") {
    throw ParseError(where(path, 1) + "empty header (expected 'location_id,<lf>,...')");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  std::unordered_set<std::string> unique;
  for (const auto& n : names) {
    if (n.empty()) throw ParseError(where(path, 1) + "empty labeling function name");
    if (!unique.insert(n).second) {
      throw ParseError(where(path, 1) + "duplicate column '" + n + "'");
    }
  }

  std::vector<LocationId> ids;
  std::vector<Vote> votes;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ParseError(where(path, lineno) + "ragged row: expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    }
    try {
      validate_location_id(cells[0]);
      for (std::size_t j = 1; j < cells.size(); ++j) votes.push_back(parse_vote_token(cells[j]));
    } catch (const ParseError& e) {
      throw ParseError(where(path, lineno) + e.what());
    }
    ids.push_back(std::move(cells[0]));
  }
  return LabelMatrix(std::move(ids), std::move(names), std::move(votes));
}

void write_label_matrix(const LabelMatrix& matrix, const fs::path& path) {
  std::string out = "location_id";
  for (const auto& n : matrix.lf_names()) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (std::size_t k = 0; k < matrix.rows(); ++k) {
    out += matrix.location_ids()[k];
    for (Vote v : matrix.row(k)) {
      out += ',';
      out += vote_token(v);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Feature store

fs::path feature_ids_path(const fs::path& path) {
  fs::path p = path;
  p += ".ids";
  return p;
}

FeatureStore read_feature_store(const fs::path& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() < kFeatureHeaderBytes ||
      std::memcmp(bytes.data(), kFeatureMagic.data(), kFeatureMagic.size()) != 0) {
    throw ParseError(path.string() + ": bad magic (expected EGF1)");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t k = get_u32le(p + 4);
  const std::uint64_t n = get_u32le(p + 8);
  const std::uint64_t d = get_u32le(p + 12);
  const std::uint64_t expected = k * n * d * 4;
  const std::uint64_t found = bytes.size() - kFeatureHeaderBytes;
  if (expected != found) {
    throw ParseError(path.string() + ": expected " + std::to_string(expected) +
                     " payload bytes, found " + std::to_string(found));
  }

  std::vector<float> values(k * n * d);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32le(p + kFeatureHeaderBytes + 4 * i));
    if (!std::isfinite(values[i])) {
      throw ParseError(path.string() + ": non-finite float at index " + std::to_string(i));
    }
  }

  const fs::path ids_path = feature_ids_path(path);
  auto in = open_input(ids_path);
  std::vector<LocationId> ids;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    validate_location_id(line);
    ids.push_back(line);
  }
  if (ids.size() != k) {
    throw ParseError(ids_path.string() + ": id count " + std::to_string(ids.size()) +
                     " does not match K = " + std::to_string(k));
  }
  return FeatureStore(std::move(ids), n, d, std::move(values));
}

void write_feature_store(const FeatureStore& store, const fs::path& path) {
  std::string out(kFeatureMagic.begin(), kFeatureMagic.end());
  out.reserve(kFeatureHeaderBytes + 4 * store.values().size());
  put_u32le(out, static_cast<std::uint32_t>(store.rows()));
  put_u32le(out, static_cast<std::uint32_t>(store.n_images()));
  put_u32le(out, static_cast<std::uint32_t>(store.dim()));
  for (float v : store.values()) put_u32le(out, std::bit_cast<std::uint32_t>(v));

  std::string ids;
  for (const auto& id : store.location_ids()) {
    ids += id;
    ids += '\n';
  }
  write_file_atomic(feature_ids_path(path), ids);
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Annotations

std::vector<ExpertAnnotation> read_annotations(const fs::path& path,
                                               std::optional<std::size_t> n_images) {
  auto in = open_input(path);
  std::vector<ExpertAnnotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const json obj = parse_json_line(line, path, lineno);
    const std::string ctx = where(path, lineno);
    ExpertAnnotation a;
    a.location_id = require_field<std::string>(obj, "location_id", ctx);
    a.labeler_id = require_field<std::string>(obj, "labeler_id", ctx);
    a.scores = require_field<std::vector<int>>(obj, "scores", ctx);
    const std::string who =
        "location '" + a.location_id + "', labeler '" + a.labeler_id + "'";
    if (a.scores.empty()) throw ParseError(ctx + "no scores for " + who);
    if (n_images && a.scores.size() != *n_images) {
      throw ParseError(ctx + "wrong score count for " + who + ": expected " +
                       std::to_string(*n_images) + ", found " + std::to_string(a.scores.size()));
    }
    for (int s : a.scores) {
      if (s < 0 || s > 4) {
        throw ParseError(ctx + "score " + std::to_string(s) + " outside 0-4 for " + who);
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

void write_annotations(const std::vector<ExpertAnnotation>& annotations, const fs::path& path) {
  std::string out;
  for (const auto& a : annotations) {
    nlohmann::ordered_json obj;
    obj["location_id"] = a.location_id;
    obj["labeler_id"] = a.labeler_id;
    obj["scores"] = a.scores;
    out += obj.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Ground truth and pseudo-labels

GroundTruthSet read_ground_truth(const fs::path& path) {
  auto in = open_input(path);
  GroundTruthSet gt;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    if (lineno == 1 && line == "location_id,label") continue;
    auto cells = split_csv(line);
    if (cells.size() != 2) throw ParseError(where(path, lineno) + "expected 'location_id,label'");
    validate_location_id(cells[0]);
    if (cells[1] == "1") {
      gt.labels.push_back(Label::Positive);
    } else if (cells[1] == "0") {
      gt.labels.push_back(Label::Negative);
    } else {
      throw ParseError(where(path, lineno) + "invalid label '" + cells[1] + "'");
    }
    gt.location_ids.push_back(std::move(cells[0]));
  }
  return gt;
}

void write_ground_truth(const GroundTruthSet& truth, const fs::path& path) {
  std::string out = "location_id,label\n";
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out += truth.location_ids[i];
    out += truth.labels[i] == Label::Positive ? ",1\n" : ",0\n";
  }
  write_file_atomic(path, out);
}

PseudoLabelSet read_pseudo_labels(const fs::path& path) {
  auto in = open_input(path);
  PseudoLabelSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    if (lineno == 1 && line == "location_id,p_neg,p_pos") continue;
    auto cells = split_csv(line);
    const std::string ctx = where(path, lineno);
    if (cells.size() != 3) throw ParseError(ctx + "expected 'location_id,p_neg,p_pos'");
    validate_location_id(cells[0]);
    ClassDistribution d{parse_double(cells[1], ctx), parse_double(cells[2], ctx)};
    if (!d.valid()) throw ParseError(ctx + "not a probability distribution");
    set.location_ids.push_back(std::move(cells[0]));
    set.distributions.push_back(d);
  }
  return set;
}

void write_pseudo_labels(const PseudoLabelSet& labels, const fs::path& path) {
  std::string out = "location_id,p_neg,p_pos\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += labels.location_ids[i];
    out += ',';
    out += format_double(labels.distributions[i].p_neg);
    out += ',';
    out += format_double(labels.distributions[i].p_pos);
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace wsgully
