#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "adsrank/embeddings.hpp"

namespace adsrank {

/// Recognized words of one image, raw as the OCR produced them.
struct SceneText {
  TokenList tokens;
};

struct TokenWeight {
  std::string token;  // raw scene token
  double gamma = 0.0;
};

/// One entry per in-vocabulary scene token, in scene order.
struct AttentionWeights {
  std::vector<TokenWeight> weights;
};

/// Statement tokens listed here are ignored by the attention. Empty by default.
struct AttentionOptions {
  std::set<std::string, std::less<>> stopwords;
};

namespace detail {

inline std::vector<const SemVector*> statement_vectors(
    const TokenList& statement_tokens, const EmbeddingTable& table,
    const AttentionOptions& options) {
  std::vector<const SemVector*> out;
  out.reserve(statement_tokens.size());
  for (const auto& token : statement_tokens) {
    if (!options.stopwords.empty() &&
        options.stopwords.count(normalize_token(token)) != 0) {
      continue;
    }
    if (const auto* vec = table.find(token)) out.push_back(vec);
  }
  return out;
}

}  // namespace detail

/// Statement-guided relevance of each scene token:
///   gamma_i = sum_j 1 / (1 + cosine_distance(e(t_i), e(s_j)))
/// OOV scene tokens are omitted; OOV statement tokens contribute nothing.
inline AttentionWeights attention_weights(const SceneText& scene,
                                          const TokenList& statement_tokens,
                                          const EmbeddingTable& table,
                                          const AttentionOptions& options = {}) {
  const auto stmt = detail::statement_vectors(statement_tokens, table, options);
  AttentionWeights out;
  for (const auto& token : scene.tokens) {
    const auto* t = table.find(token);
    if (t == nullptr) continue;
    double gamma = 0.0;
    for (const auto* s : stmt) gamma += 1.0 / (1.0 + cosine_distance(*t, *s));
    out.weights.push_back({token, gamma});
  }
  return out;
}

/// Attention-weighted average of the scene token vectors. Falls back to the
/// unweighted mean when every weight is zero (empty statement); absent when
/// no scene token is in vocabulary.
inline std::optional<SemVector> attended_text_embedding(
    const SceneText& scene, const TokenList& statement_tokens,
    const EmbeddingTable& table, const AttentionOptions& options = {}) {
  const auto attn = attention_weights(scene, statement_tokens, table, options);
  if (attn.weights.empty()) return std::nullopt;
  const auto dim = static_cast<Eigen::Index>(table.dim());
  SemVector weighted = SemVector::Zero(dim);
  SemVector plain = SemVector::Zero(dim);
  double total = 0.0;
  for (const auto& w : attn.weights) {
    const auto& vec = *table.find(w.token);
    weighted += w.gamma * vec;
    plain += vec;
    total += w.gamma;
  }
  if (total > 0.0) return SemVector(weighted / total);
  return SemVector(plain / static_cast<double>(attn.weights.size()));
}

/// Distance between the attended scene text and the statement's mean
/// embedding; 1.0 when either side is unavailable.
inline double text_semantic_distance(const SceneText& scene,
                                     const TokenList& statement_tokens,
                                     const EmbeddingTable& table,
                                     const AttentionOptions& options = {}) {
  auto t = attended_text_embedding(scene, statement_tokens, table, options);
  if (!t) return 1.0;
  auto s = mean_embed(table, statement_tokens);
  if (!s) return 1.0;
  return cosine_distance(*t, *s);
}

}  // namespace adsrank
