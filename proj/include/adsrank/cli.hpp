#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "adsrank/adsrank.hpp"

namespace adsrank::cli {

namespace detail {

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct AlphaFlags {
  std::optional<double> alpha1, alpha1_action, alpha1_reason, alpha2, alpha3;

  void add(CLI::App& app) {
    app.add_option("--alpha1", alpha1, "Weight of the visual-semantic distance");
    app.add_option("--alpha1a", alpha1_action, "Weight of the action head (partitioned modes)");
    app.add_option("--alpha1r", alpha1_reason, "Weight of the reason head (partitioned modes)");
    app.add_option("--alpha2", alpha2, "Weight of the scene-text semantic distance");
    app.add_option("--alpha3", alpha3, "Weight of the lexical tf-idf distance");
  }

  RankingWeights apply(RankingWeights w) const {
    if (alpha1) w.alpha1 = *alpha1;
    if (alpha1_action) w.alpha1_action = *alpha1_action;
    if (alpha1_reason) w.alpha1_reason = *alpha1_reason;
    if (alpha2) w.alpha2 = *alpha2;
    if (alpha3) w.alpha3 = *alpha3;
    return w;
  }
};

struct RankedImage {
  std::string id;
  RankedList ranking;
};

inline std::vector<RankedImage> rank_all(const std::vector<ImageRecord>& data,
                                         const Checkpoint& ck, const EmbeddingTable& table,
                                         const RankingWeights& weights, bool whole) {
  if (table.dim() != ck.model.dims.word) {
    throw DimensionError("embedding dimension " + std::to_string(table.dim()) +
                         " does not match model word dimension " +
                         std::to_string(ck.model.dims.word));
  }
  Scorer scorer{&ck.model, &ck.tfidf, &table, weights, {}};
  scorer.options.heads_against_whole = whole;
  std::vector<RankedImage> out;
  out.reserve(data.size());
  for (const auto& img : data) out.push_back({img.id, rank(img, scorer)});
  return out;
}

inline std::string ranking_line(const RankedImage& r) {
  std::vector<std::size_t> order;
  std::vector<double> scores;
  for (const auto& e : r.ranking) {
    order.push_back(e.index);
    scores.push_back(e.score);
  }
  json j;
  j["id"] = r.id;
  j["ranking"] = order;
  j["scores"] = scores;
  return j.dump();
}

/// Reads rankings JSONL into (id, top index) pairs in file order.
inline std::vector<Prediction> read_tops(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open rankings: " + path);
  std::vector<Prediction> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(text);
      const auto& ranking = j.at("ranking");
      if (!ranking.is_array() || ranking.empty()) {
        throw ParseError(path + " line " + std::to_string(line) + ": empty ranking");
      }
      out.emplace_back(j.at("id").get<std::string>(), ranking[0].get<std::size_t>());
    } catch (const json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detail

/// Runs the command line. Returns the process exit code; 0 iff the
/// requested artifact was fully produced.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"adsrank: rank action-reason statements against ad images"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train projections with the triplet loss");
  std::string train_data, train_emb, train_out, mode_name = "plain";
  TrainConfig tcfg;
  bool quiet = false;
  train_cmd->add_option("--data", train_data, "Training dataset (JSONL)")->required();
  train_cmd->add_option("--embeddings", train_emb, "Word-embedding text file")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint path to write")->required();
  train_cmd->add_option("--mode", mode_name, "plain|fused|partitioned|partitioned-fused")
      ->capture_default_str();
  train_cmd->add_option("--margin", tcfg.margin, "Triplet margin")->capture_default_str();
  train_cmd->add_option("--lr", tcfg.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", tcfg.epochs, "Number of epochs")->capture_default_str();
  train_cmd->add_option("--batch", tcfg.batch_size, "Batch size K")->capture_default_str();
  train_cmd->add_option("--seed", tcfg.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--embed-dim", tcfg.embed_dim,
                        "Projection dimension (0 = word dimension)")
      ->capture_default_str();
  train_cmd->add_flag("--quiet", quiet, "Do not print the loss trace");

  // rank
  auto* rank_cmd = app.add_subcommand("rank", "Rank each image's candidate statements");
  std::string rank_data, rank_model, rank_emb, rank_out;
  bool rank_whole = false;
  detail::AlphaFlags rank_alphas;
  rank_cmd->add_option("--data", rank_data, "Dataset (JSONL)")->required();
  rank_cmd->add_option("--model", rank_model, "Checkpoint")->required();
  rank_cmd->add_option("--embeddings", rank_emb, "Word-embedding text file")->required();
  rank_cmd->add_option("--out", rank_out, "Output JSONL (default: stdout)");
  rank_cmd->add_flag("--whole-statement", rank_whole,
                     "Partitioned modes: compare both heads to the whole statement");
  rank_alphas.add(*rank_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Top-1 accuracy and ranker agreement");
  std::string eval_rankings, eval_data, eval_model, eval_emb, eval_compare;
  bool eval_per_image = false, eval_whole = false;
  detail::AlphaFlags eval_alphas;
  eval_cmd->add_option("--rankings", eval_rankings, "Rankings JSONL from `rank`");
  eval_cmd->add_option("--data", eval_data, "Dataset with gold labels (JSONL)")->required();
  eval_cmd->add_option("--model", eval_model, "Checkpoint (end-to-end mode)");
  eval_cmd->add_option("--embeddings", eval_emb, "Word-embedding text file (end-to-end mode)");
  eval_cmd->add_option("--compare", eval_compare, "Second rankings JSONL for agreement");
  eval_cmd->add_flag("--per-image", eval_per_image, "Print one line per image");
  eval_cmd->add_flag("--whole-statement", eval_whole,
                     "Partitioned modes: compare both heads to the whole statement");
  eval_alphas.add(*eval_cmd);

  // attn
  auto* attn_cmd = app.add_subcommand("attn", "Print statement-guided scene-text weights");
  std::string attn_data, attn_emb, attn_image, attn_statement;
  std::vector<std::string> attn_stopwords;
  attn_cmd->add_option("--data", attn_data, "Dataset (JSONL)")->required();
  attn_cmd->add_option("--embeddings", attn_emb, "Word-embedding text file")->required();
  attn_cmd->add_option("--image-id", attn_image, "Image id")->required();
  attn_cmd->add_option("--statement", attn_statement, "Query statement text")->required();
  attn_cmd->add_option("--stopwords", attn_stopwords, "Statement words to ignore");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_out;
  SynthConfig scfg;
  std::size_t holdout = 0;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", scfg.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--images", scfg.num_images, "Number of images")->capture_default_str();
  synth_cmd->add_option("--topics", scfg.num_topics, "Number of topics")->capture_default_str();
  synth_cmd->add_option("--statements", scfg.statements_per_image, "Statements per image (Q)")
      ->capture_default_str();
  synth_cmd->add_option("--positives", scfg.positives_per_image, "Positives per image")
      ->capture_default_str();
  synth_cmd->add_option("--word-dim", scfg.word_dim, "Word-embedding dimension")
      ->capture_default_str();
  synth_cmd->add_option("--object-dim", scfg.object_dim, "Object feature dimension")
      ->capture_default_str();
  synth_cmd->add_option("--symbol-dim", scfg.symbol_dim, "Symbol feature dimension")
      ->capture_default_str();
  synth_cmd->add_option("--noise", scfg.noise_sigma, "Word-embedding noise sigma")
      ->capture_default_str();
  synth_cmd->add_option("--dropout", scfg.ocr_dropout, "OCR token dropout probability")
      ->capture_default_str();
  synth_cmd->add_option("--visual-noise", scfg.visual_noise, "Patch feature noise sigma")
      ->capture_default_str();
  synth_cmd->add_flag("--independent-parts", scfg.independent_parts,
                      "Draw action and reason halves from independent topics");
  synth_cmd->add_option("--holdout", holdout, "Also write train.jsonl/test.jsonl with this many test images")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train_cmd) {
      tcfg.mode = parse_mode(mode_name);
      const auto data = load_dataset(train_data);
      const auto table = load_embeddings(train_emb);
      auto model = train(data, table, tcfg);
      if (!quiet) {
        char buf[96];
        for (std::size_t e = 0; e < model.loss_trace.size(); ++e) {
          std::snprintf(buf, sizeof(buf), "epoch %zu loss %.6f", e + 1, model.loss_trace[e]);
          out << buf << '\n';
        }
      }
      save_model(train_out, model, fit_dataset_tfidf(data));
      return 0;
    }

    if (*rank_cmd) {
      const auto data = load_dataset(rank_data);
      const auto ck = load_model(rank_model);
      const auto table = load_embeddings(rank_emb);
      const auto ranked =
          detail::rank_all(data, ck, table, rank_alphas.apply(ck.weights), rank_whole);
      std::ofstream file;
      std::ostream* sink = &out;
      if (!rank_out.empty()) {
        file.open(rank_out);
        if (!file) throw NotFoundError("cannot write rankings: " + rank_out);
        sink = &file;
      }
      for (const auto& r : ranked) *sink << detail::ranking_line(r) << '\n';
      return sink->good() ? 0 : 1;
    }

    if (*eval_cmd) {
      const auto data = load_dataset(eval_data);
      std::vector<Prediction> tops;
      if (!eval_rankings.empty()) {
        tops = detail::read_tops(eval_rankings);
      } else {
        if (eval_model.empty() || eval_emb.empty()) {
          throw ConfigError("eval needs --rankings, or --model and --embeddings");
        }
        const auto ck = load_model(eval_model);
        const auto table = load_embeddings(eval_emb);
        for (const auto& r : detail::rank_all(data, ck, table, eval_alphas.apply(ck.weights),
                                              eval_whole)) {
          tops.emplace_back(r.id, r.ranking.front().index);
        }
      }
      const auto report = accuracy(tops, gold_sets(data));
      out << "accuracy " << detail::fixed4(report.accuracy) << " (" << report.num_correct
          << "/" << report.num_images << ")\n";
      if (!report.excluded.empty()) {
        out << "excluded " << report.excluded.size() << " images without positives\n";
      }
      if (eval_per_image) {
        for (const auto& o : report.per_image) {
          out << o.id << '\t' << o.predicted << '\t' << (o.correct ? "correct" : "wrong") << '\n';
        }
      }
      if (!eval_compare.empty()) {
        const auto other = detail::read_tops(eval_compare);
        std::map<std::string, std::size_t> other_top(other.begin(), other.end());
        std::vector<std::size_t> a, b;
        for (const auto& [id, top] : tops) {
          auto it = other_top.find(id);
          if (it == other_top.end()) {
            throw NotFoundError("image '" + id + "' missing from " + eval_compare);
          }
          a.push_back(top);
          b.push_back(it->second);
        }
        if (other_top.size() != tops.size()) {
          throw DimensionError("compared rankings cover different image sets");
        }
        out << "agreement " << detail::fixed4(agreement(a, b)) << '\n';
      }
      return 0;
    }

    if (*attn_cmd) {
      const auto data = load_dataset(attn_data);
      const auto table = load_embeddings(attn_emb);
      const ImageRecord* image = nullptr;
      for (const auto& r : data) {
        if (r.id == attn_image) image = &r;
      }
      if (image == nullptr) throw NotFoundError("unknown image id '" + attn_image + "'");
      AttentionOptions opts;
      for (const auto& w : attn_stopwords) opts.stopwords.insert(normalize_token(w));
      const auto weights = attention_weights(image->scene, tokenize(attn_statement), table, opts);
      for (const auto& w : weights.weights) out << w.token << '\t' << detail::fixed4(w.gamma) << '\n';
      return 0;
    }

    if (*synth_cmd) {
      write_synth(synth_out, generate(scfg), holdout);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("adsrank");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace adsrank::cli
