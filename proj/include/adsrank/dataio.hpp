#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "adsrank/error.hpp"
#include "adsrank/lexical.hpp"
#include "adsrank/ranker.hpp"
#include "adsrank/record.hpp"
#include "adsrank/vissem.hpp"

namespace adsrank {

using nlohmann::json;

namespace detail {

[[noreturn]] inline void schema_error(std::size_t line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

inline std::vector<Eigen::VectorXd> parse_patches(const json& arr, std::size_t line,
                                                  const std::string& field) {
  if (!arr.is_array()) schema_error(line, field + ": expected array");
  std::vector<Eigen::VectorXd> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& row = arr[i];
    const std::string path = field + "[" + std::to_string(i) + "]";
    if (!row.is_array()) schema_error(line, path + ": expected array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()));
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (!row[k].is_number()) {
        schema_error(line, path + "[" + std::to_string(k) + "]: expected number");
      }
      v[static_cast<Eigen::Index>(k)] = row[k].get<double>();
    }
    if (!v.allFinite()) schema_error(line, path + ": non-finite value");
    out.push_back(std::move(v));
  }
  return out;
}

/// Tracks one channel's dimension across the dataset.
struct ChannelDim {
  const char* name;
  std::size_t dim = 0;
  std::size_t first_line = 0;

  void check(const std::vector<Eigen::VectorXd>& patches, std::size_t line) {
    for (const auto& p : patches) {
      const auto d = static_cast<std::size_t>(p.size());
      if (dim == 0) {
        dim = d;
        first_line = line;
      } else if (d != dim) {
        throw DimensionError("line " + std::to_string(line) + ": " + name +
                             " feature dimension " + std::to_string(d) +
                             " does not match dimension " + std::to_string(dim) +
                             " from line " + std::to_string(first_line));
      }
    }
  }
};

}  // namespace detail

/// Parses one dataset record. `line` is only used in error messages.
inline ImageRecord parse_record(const json& obj, std::size_t line) {
  using detail::schema_error;
  if (!obj.is_object()) schema_error(line, "expected a JSON object");
  ImageRecord rec;

  if (!obj.contains("id")) schema_error(line, "missing field id");
  if (!obj["id"].is_string()) schema_error(line, "id: expected string");
  rec.id = obj["id"].get<std::string>();
  if (rec.id.empty()) schema_error(line, "id: must be non-empty");

  if (obj.contains("object_features")) {
    rec.features.object_patches =
        detail::parse_patches(obj["object_features"], line, "object_features");
  }
  if (obj.contains("symbol_features")) {
    rec.features.symbol_patches =
        detail::parse_patches(obj["symbol_features"], line, "symbol_features");
  }
  if (obj.contains("ocr_tokens")) {
    const auto& toks = obj["ocr_tokens"];
    if (!toks.is_array()) schema_error(line, "ocr_tokens: expected array");
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (!toks[i].is_string()) {
        schema_error(line, "ocr_tokens[" + std::to_string(i) + "]: expected string");
      }
      auto tok = toks[i].get<std::string>();
      if (tok.empty()) {
        schema_error(line, "ocr_tokens[" + std::to_string(i) + "]: empty token");
      }
      rec.scene.tokens.push_back(std::move(tok));
    }
  }

  if (!obj.contains("statements")) schema_error(line, "missing field statements");
  const auto& stmts = obj["statements"];
  if (!stmts.is_array()) schema_error(line, "statements: expected array");
  for (std::size_t i = 0; i < stmts.size(); ++i) {
    const std::string path = "statements[" + std::to_string(i) + "]";
    const auto& s = stmts[i];
    if (!s.is_object()) schema_error(line, path + ": expected object");
    if (!s.contains("text")) schema_error(line, path + ": missing field text");
    if (!s["text"].is_string()) schema_error(line, path + ".text: expected string");
    Label label = Label::unlabeled;
    if (s.contains("label")) {
      const auto& l = s["label"];
      if (!l.is_number_integer() || (l.get<int>() != 0 && l.get<int>() != 1)) {
        schema_error(line, path + ".label: expected 0 or 1");
      }
      label = l.get<int>() == 1 ? Label::positive : Label::negative;
    }
    rec.statements.push_back(make_statement(s["text"].get<std::string>(), label));
  }
  return rec;
}

/// Reads a JSON-Lines dataset. Blank lines are ignored. Ids must be unique
/// and each feature channel must have one dimension across the file.
inline std::vector<ImageRecord> read_dataset(std::istream& in) {
  std::vector<ImageRecord> records;
  std::set<std::string> ids;
  detail::ChannelDim object_dim{"object"};
  detail::ChannelDim symbol_dim{"symbol"};
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      detail::schema_error(line, std::string("invalid JSON: ") + e.what());
    }
    auto rec = parse_record(obj, line);
    if (!ids.insert(rec.id).second) detail::schema_error(line, "duplicate id " + rec.id);
    object_dim.check(rec.features.object_patches, line);
    symbol_dim.check(rec.features.symbol_patches, line);
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<ImageRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open dataset: " + path);
  return read_dataset(in);
}

inline json record_to_json(const ImageRecord& rec) {
  auto patches = [](const std::vector<Eigen::VectorXd>& ps) {
    json arr = json::array();
    for (const auto& p : ps) arr.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    return arr;
  };
  json obj;
  obj["id"] = rec.id;
  obj["object_features"] = patches(rec.features.object_patches);
  obj["symbol_features"] = patches(rec.features.symbol_patches);
  obj["ocr_tokens"] = rec.scene.tokens;
  json stmts = json::array();
  for (const auto& s : rec.statements) {
    json js;
    js["text"] = s.text;
    if (s.label != Label::unlabeled) js["label"] = s.label == Label::positive ? 1 : 0;
    stmts.push_back(std::move(js));
  }
  obj["statements"] = std::move(stmts);
  return obj;
}

inline void write_dataset(std::ostream& out, const std::vector<ImageRecord>& records) {
  for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
}

inline void save_dataset(const std::string& path, const std::vector<ImageRecord>& records) {
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write dataset: " + path);
  write_dataset(out, records);
}

/// Word tokens from an exported OCR response. Accepts a bare annotation
/// array, an object with "textAnnotations", or a "responses" wrapper. The
/// first annotation (the full-text block) is skipped; the rest contribute
/// their "description" in file order. A document without annotations gives
/// an empty result and a warning.
inline SceneText parse_ocr_json(const json& doc, std::vector<std::string>* warnings = nullptr) {
  const json* annotations = nullptr;
  if (doc.is_array()) {
    annotations = &doc;
  } else if (doc.is_object()) {
    if (doc.contains("textAnnotations")) {
      annotations = &doc["textAnnotations"];
    } else if (doc.contains("responses") && doc["responses"].is_array()) {
      for (const auto& r : doc["responses"]) {
        if (r.is_object() && r.contains("textAnnotations")) {
          annotations = &r["textAnnotations"];
          break;
        }
      }
    }
  }
  SceneText scene;
  if (annotations == nullptr || !annotations->is_array()) {
    if (warnings) warnings->push_back("no text annotation array found");
    return scene;
  }
  for (std::size_t i = 1; i < annotations->size(); ++i) {
    const auto& a = (*annotations)[i];
    if (!a.is_object() || !a.contains("description") || !a["description"].is_string()) {
      if (warnings) warnings->push_back("annotation " + std::to_string(i) + " has no description");
      continue;
    }
    auto word = a["description"].get<std::string>();
    if (!word.empty()) scene.tokens.push_back(std::move(word));
  }
  return scene;
}

inline SceneText parse_ocr_export(const std::string& path,
                                  std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open OCR export: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return parse_ocr_json(doc, warnings);
}

// Checkpoints ---------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "adsrank-checkpoint";

/// Everything `rank` needs besides the data and the embedding table.
struct Checkpoint {
  ProjectionModel model;
  TfIdfModel tfidf;
  RankingWeights weights;
};

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() ||
      data.size() != static_cast<std::size_t>(rows * cols)) {
    throw ParseError("checkpoint matrix has inconsistent shape");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  if (!m.allFinite()) throw ParseError("checkpoint matrix has non-finite entries");
  return m;
}

inline void expect_shape(const Eigen::MatrixXd& m, std::size_t rows, std::size_t cols,
                         const char* name) {
  if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
    throw ParseError(std::string("checkpoint matrix ") + name + " has shape " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace detail

inline json checkpoint_to_json(const Checkpoint& ck) {
  const auto& m = ck.model;
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["mode"] = std::string(to_string(m.mode));
  j["dims"] = {{"object", m.dims.object},
               {"symbol", m.dims.symbol},
               {"word", m.dims.word},
               {"embed", m.dims.embed}};
  j["margin"] = m.margin;
  j["config"] = {{"seed", m.config.seed},
                 {"learning_rate", m.config.learning_rate},
                 {"epochs", m.config.epochs},
                 {"batch_size", m.config.batch_size},
                 {"embed_dim", m.config.embed_dim},
                 {"margin", m.config.margin}};
  j["alphas"] = {{"alpha1", ck.weights.alpha1},
                 {"alpha1_action", ck.weights.alpha1_action},
                 {"alpha1_reason", ck.weights.alpha1_reason},
                 {"alpha2", ck.weights.alpha2},
                 {"alpha3", ck.weights.alpha3}};
  j["matrices"] = {{"visual", detail::matrix_to_json(m.visual_proj)},
                   {"fusion", detail::matrix_to_json(m.fusion_proj)},
                   {"action", detail::matrix_to_json(m.action_proj)},
                   {"reason", detail::matrix_to_json(m.reason_proj)}};
  j["loss_trace"] = m.loss_trace;
  j["tfidf"] = {{"num_docs", ck.tfidf.num_docs}, {"doc_freq", ck.tfidf.doc_freq}};
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || !j.contains("version")) {
    throw ParseError("checkpoint: missing version tag");
  }
  const auto& ver = j["version"];
  if (!ver.is_number_integer() || ver.get<int>() != kCheckpointVersion) {
    throw VersionError("checkpoint version " + ver.dump() + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw ParseError("checkpoint: unexpected format tag");
    }
    Checkpoint ck;
    auto& m = ck.model;
    m.mode = parse_mode(j.at("mode").get<std::string>());
    const auto& d = j.at("dims");
    m.dims = {d.at("object").get<std::size_t>(), d.at("symbol").get<std::size_t>(),
              d.at("word").get<std::size_t>(), d.at("embed").get<std::size_t>()};
    m.margin = j.at("margin").get<double>();
    const auto& c = j.at("config");
    m.config.mode = m.mode;
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.embed_dim = c.at("embed_dim").get<std::size_t>();
    m.config.margin = c.at("margin").get<double>();
    const auto& a = j.at("alphas");
    ck.weights.alpha1 = a.at("alpha1").get<double>();
    ck.weights.alpha1_action = a.at("alpha1_action").get<double>();
    ck.weights.alpha1_reason = a.at("alpha1_reason").get<double>();
    ck.weights.alpha2 = a.at("alpha2").get<double>();
    ck.weights.alpha3 = a.at("alpha3").get<double>();
    const auto& mats = j.at("matrices");
    m.visual_proj = detail::matrix_from_json(mats.at("visual"));
    m.fusion_proj = detail::matrix_from_json(mats.at("fusion"));
    m.action_proj = detail::matrix_from_json(mats.at("action"));
    m.reason_proj = detail::matrix_from_json(mats.at("reason"));
    m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    const auto& t = j.at("tfidf");
    ck.tfidf.num_docs = t.at("num_docs").get<std::size_t>();
    for (const auto& [term, df] : t.at("doc_freq").items()) {
      ck.tfidf.doc_freq[term] = df.get<std::size_t>();
    }

    const auto head_in = is_fused(m.mode) ? m.dims.fused() : m.dims.visual();
    const auto emb = m.dims.embed;
    const auto empty = [](const Eigen::MatrixXd& x, const char* name) {
      if (x.size() != 0) throw ParseError(std::string("checkpoint matrix ") + name + " must be empty");
    };
    if (m.mode == ProjectionMode::partitioned) {
      empty(m.visual_proj, "visual");
    } else {
      detail::expect_shape(m.visual_proj, emb, m.dims.visual(), "visual");
    }
    if (m.mode == ProjectionMode::fused) {
      detail::expect_shape(m.fusion_proj, emb, head_in, "fusion");
    } else {
      empty(m.fusion_proj, "fusion");
    }
    if (is_partitioned(m.mode)) {
      detail::expect_shape(m.action_proj, emb, head_in, "action");
      detail::expect_shape(m.reason_proj, emb, head_in, "reason");
    } else {
      empty(m.action_proj, "action");
      empty(m.reason_proj, "reason");
    }
    return ck;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  return checkpoint_to_json(ck).dump(1) + "\n";
}

inline void save_model(const std::string& path, const ProjectionModel& model,
                       const TfIdfModel& tfidf, const RankingWeights& weights = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NotFoundError("cannot write checkpoint: " + path);
  out << serialize_checkpoint({model, tfidf, weights});
  if (!out) throw Error("failed writing checkpoint: " + path);
}

inline Checkpoint parse_checkpoint(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

inline Checkpoint load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open checkpoint: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

/// Corpus used for document frequencies: every candidate statement plus one
/// document per image built from its scene tokens.
inline TfIdfModel fit_dataset_tfidf(const std::vector<ImageRecord>& records) {
  std::vector<TokenList> docs;
  for (const auto& rec : records) {
    for (const auto& s : rec.statements) docs.push_back(s.tokens);
    docs.push_back(rec.scene.tokens);
  }
  return fit_tfidf(docs);
}

}  // namespace adsrank
