#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "adsrank/embeddings.hpp"
#include "adsrank/error.hpp"
#include "adsrank/evaluator.hpp"
#include "adsrank/lexical.hpp"
#include "adsrank/record.hpp"
#include "adsrank/textsem.hpp"
#include "adsrank/vissem.hpp"

namespace adsrank {

/// Coefficients of the final distance. The defaults are the validated
/// values: 0.7 / 0.3 / 1.5, with the two partitioned heads weighted 0.5 each.
struct RankingWeights {
  double alpha1 = 0.7;
  double alpha1_action = 0.5;
  double alpha1_reason = 0.5;
  double alpha2 = 0.3;
  double alpha3 = 1.5;

  bool operator==(const RankingWeights&) const = default;
};

/// Per-(image, statement) distances. Unavailable components hold 1.0.
struct ComponentDistances {
  double visual = 1.0;  // d(z, s), non-partitioned
  double action = 1.0;  // d(z_a, s_a)
  double reason = 1.0;  // d(z_r, s_r)
  double text = 1.0;    // d(t, s)
  double lexical = 1.0; // d(t^r, s^r)
};

inline double combine(const ComponentDistances& d, const RankingWeights& w,
                      bool partitioned) {
  const double visual = partitioned
                            ? w.alpha1_action * d.action + w.alpha1_reason * d.reason
                            : w.alpha1 * d.visual;
  return visual + w.alpha2 * d.text + w.alpha3 * d.lexical;
}

struct ScoringOptions {
  /// Partitioned modes: compare both heads against the whole statement
  /// instead of its action/reason parts.
  bool heads_against_whole = false;
  AttentionOptions attention;
};

/// Shared read-only context for scoring. `model` may be null, in which case
/// the visual components stay at their neutral value; only meaningful for
/// text-only weightings.
struct Scorer {
  const ProjectionModel* model = nullptr;
  const TfIdfModel* tfidf = nullptr;
  const EmbeddingTable* table = nullptr;
  RankingWeights weights;
  ScoringOptions options;

  bool partitioned() const { return model != nullptr && is_partitioned(model->mode); }
};

namespace detail {

inline double head_distance(const SemVector& z, const std::optional<SemVector>& s) {
  if (!s || z.size() == 0) return 1.0;
  return cosine_distance(z, normalized(*s));
}

/// Image embedding computed once per image and reused across candidates.
inline std::optional<ImageEmbedding> embed_record(const Scorer& scorer,
                                                  const ImageRecord& image) {
  if (scorer.model == nullptr) return std::nullopt;
  const auto& m = *scorer.model;
  auto v = aggregate_patches(image.features, m.dims.object, m.dims.symbol);
  std::optional<SemVector> t;
  if (is_fused(m.mode)) t = fusion_text(image.scene, *scorer.table);
  return embed_image(m, v, t);
}

inline ComponentDistances distances_with(const Scorer& scorer, const ImageRecord& image,
                                         const Statement& statement,
                                         const std::optional<ImageEmbedding>& z) {
  const auto& table = *scorer.table;
  ComponentDistances d;
  if (z) {
    auto whole = mean_embed(table, statement.tokens);
    if (scorer.partitioned()) {
      if (scorer.options.heads_against_whole) {
        d.action = head_distance(z->action, whole);
        d.reason = head_distance(z->reason, whole);
      } else {
        auto action = mean_embed(table, statement.action_tokens);
        auto reason = mean_embed(table, statement.reason_tokens);
        d.action = head_distance(z->action, action ? action : whole);
        d.reason = head_distance(z->reason, reason ? reason : whole);
      }
    } else {
      d.visual = head_distance(z->joint, whole);
    }
  }
  d.text = text_semantic_distance(image.scene, statement.tokens, table,
                                  scorer.options.attention);
  d.lexical = scorer.tfidf ? lexical_distance(*scorer.tfidf, image.scene.tokens,
                                              statement.tokens)
                           : 1.0;
  return d;
}

}  // namespace detail

inline ComponentDistances component_distances(const Scorer& scorer,
                                              const ImageRecord& image,
                                              const Statement& statement) {
  return detail::distances_with(scorer, image, statement,
                                detail::embed_record(scorer, image));
}

/// alpha1 d(z, s) + alpha2 d(t, s) + alpha3 d(t^r, s^r).
inline double score_statement(const ImageRecord& image, const Statement& statement,
                              const ProjectionModel& model, const TfIdfModel& tfidf,
                              const EmbeddingTable& table, const RankingWeights& w,
                              const ScoringOptions& options = {}) {
  if (is_partitioned(model.mode)) {
    throw ConfigError("score_statement requires a non-partitioned model");
  }
  Scorer scorer{&model, &tfidf, &table, w, options};
  return combine(component_distances(scorer, image, statement), w, false);
}

/// alpha1a d(z_a, s_a) + alpha1r d(z_r, s_r) + alpha2 d(t, s) + alpha3 d(t^r, s^r).
inline double score_statement_partitioned(const ImageRecord& image,
                                          const Statement& statement,
                                          const ProjectionModel& model,
                                          const TfIdfModel& tfidf,
                                          const EmbeddingTable& table,
                                          const RankingWeights& w,
                                          const ScoringOptions& options = {}) {
  if (!is_partitioned(model.mode)) {
    throw ConfigError("score_statement_partitioned requires a partitioned model");
  }
  Scorer scorer{&model, &tfidf, &table, w, options};
  return combine(component_distances(scorer, image, statement), w, true);
}

struct RankedEntry {
  std::size_t index = 0;
  double score = 0.0;
};

/// Ascending by score, ties by ascending input index.
using RankedList = std::vector<RankedEntry>;

inline RankedList rank_scores(const std::vector<double>& scores) {
  if (scores.empty()) throw ConfigError("rank: empty candidate list");
  RankedList out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = {i, scores[i]};
  std::stable_sort(out.begin(), out.end(), [](const RankedEntry& a, const RankedEntry& b) {
    return a.score < b.score;
  });
  return out;
}

/// Component distances for every candidate of one image.
inline std::vector<ComponentDistances> candidate_distances(const Scorer& scorer,
                                                           const ImageRecord& image) {
  const auto z = detail::embed_record(scorer, image);
  std::vector<ComponentDistances> out;
  out.reserve(image.statements.size());
  for (const auto& s : image.statements) {
    out.push_back(detail::distances_with(scorer, image, s, z));
  }
  return out;
}

inline RankedList rank(const ImageRecord& image, const Scorer& scorer) {
  if (image.statements.empty()) throw ConfigError("rank: image '" + image.id + "' has no statements");
  const auto dists = candidate_distances(scorer, image);
  std::vector<double> scores;
  scores.reserve(dists.size());
  for (const auto& d : dists) scores.push_back(combine(d, scorer.weights, scorer.partitioned()));
  return rank_scores(scores);
}

/// Gold positive sets keyed by image id.
inline GoldSets gold_sets(const std::vector<ImageRecord>& images) {
  GoldSets gold;
  for (const auto& img : images) {
    auto pos = img.positive_indices();
    gold[img.id] = std::set<std::size_t>(pos.begin(), pos.end());
  }
  return gold;
}

/// Ranks every image and reports top-1 accuracy against its labels.
inline EvalReport evaluate(const std::vector<ImageRecord>& images, const Scorer& scorer) {
  std::vector<Prediction> predictions;
  predictions.reserve(images.size());
  for (const auto& img : images) predictions.emplace_back(img.id, rank(img, scorer).front().index);
  return accuracy(predictions, gold_sets(images));
}

/// {0, 0.1, ..., 1.5}^3 over (alpha1, alpha2, alpha3); partitioned heads get
/// alpha1 each. 4096 points.
inline std::vector<RankingWeights> default_alpha_grid() {
  std::vector<RankingWeights> grid;
  grid.reserve(16 * 16 * 16);
  for (int a = 0; a <= 15; ++a) {
    for (int b = 0; b <= 15; ++b) {
      for (int c = 0; c <= 15; ++c) {
        RankingWeights w;
        w.alpha1 = a / 10.0;
        w.alpha1_action = w.alpha1;
        w.alpha1_reason = w.alpha1;
        w.alpha2 = b / 10.0;
        w.alpha3 = c / 10.0;
        grid.push_back(w);
      }
    }
  }
  return grid;
}

/// Grid point with the highest top-1 accuracy on `validation`; the earliest
/// grid index wins ties. Component distances are computed once and reused
/// across the grid.
inline RankingWeights tune_alphas(const std::vector<ImageRecord>& validation,
                                  const std::vector<RankingWeights>& grid,
                                  const Scorer& scorer) {
  if (validation.empty()) throw ConfigError("tune_alphas: empty validation set");
  if (grid.empty()) throw ConfigError("tune_alphas: empty grid");
  std::vector<std::vector<ComponentDistances>> cached;
  std::vector<std::vector<std::size_t>> positives;
  for (const auto& img : validation) {
    if (img.statements.empty()) throw ConfigError("tune_alphas: image '" + img.id + "' has no statements");
    cached.push_back(candidate_distances(scorer, img));
    positives.push_back(img.positive_indices());
  }
  const bool partitioned = scorer.partitioned();
  std::size_t best = 0;
  std::size_t best_correct = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < cached.size(); ++i) {
      std::size_t top = 0;
      double top_score = combine(cached[i][0], grid[g], partitioned);
      for (std::size_t j = 1; j < cached[i].size(); ++j) {
        const double s = combine(cached[i][j], grid[g], partitioned);
        if (s < top_score) {
          top_score = s;
          top = j;
        }
      }
      if (std::find(positives[i].begin(), positives[i].end(), top) != positives[i].end()) ++correct;
    }
    if (g == 0 || correct > best_correct) {
      best = g;
      best_correct = correct;
    }
  }
  return grid[best];
}

}  // namespace adsrank
