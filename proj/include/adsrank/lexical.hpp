#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "adsrank/error.hpp"
#include "adsrank/text.hpp"

namespace adsrank {

/// Document-frequency statistics of a fitted corpus.
struct TfIdfModel {
  std::size_t num_docs = 0;
  std::map<std::string, std::size_t, std::less<>> doc_freq;

  std::size_t df(const std::string& term) const {
    auto it = doc_freq.find(term);
    return it == doc_freq.end() ? 0 : it->second;
  }

  /// Smoothed idf: ln((1 + N) / (1 + df)) + 1. Finite for unseen terms.
  double idf(const std::string& term) const {
    return std::log((1.0 + static_cast<double>(num_docs)) /
                    (1.0 + static_cast<double>(df(term)))) +
           1.0;
  }
};

using SparseVec = std::map<std::string, double, std::less<>>;

inline TfIdfModel fit_tfidf(const std::vector<TokenList>& documents) {
  if (documents.empty()) throw ConfigError("fit_tfidf: empty corpus");
  TfIdfModel model;
  model.num_docs = documents.size();
  for (const auto& doc : documents) {
    std::set<std::string> seen;
    for (const auto& token : doc) {
      auto term = normalize_token(token);
      if (!term.empty()) seen.insert(std::move(term));
    }
    for (const auto& term : seen) ++model.doc_freq[term];
  }
  return model;
}

/// Raw term count times smoothed idf. No length normalization.
inline SparseVec tfidf_vector(const TfIdfModel& model, const TokenList& tokens) {
  SparseVec vec;
  for (const auto& token : tokens) {
    auto term = normalize_token(token);
    if (!term.empty()) vec[term] += 1.0;
  }
  for (auto& [term, weight] : vec) weight *= model.idf(term);
  return vec;
}

/// Cosine distance of two nonnegative sparse vectors; 1.0 if either is zero.
inline double sparse_cosine_distance(const SparseVec& a, const SparseVec& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [_, w] : a) na += w * w;
  for (const auto& [_, w] : b) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 1.0;
  // Merge over both term-sorted maps so the summation order is symmetric.
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  const double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(d, 0.0, 1.0);
}

inline double lexical_distance(const TfIdfModel& model,
                               const TokenList& scene_tokens,
                               const TokenList& statement_tokens) {
  return sparse_cosine_distance(tfidf_vector(model, scene_tokens),
                                tfidf_vector(model, statement_tokens));
}

}  // namespace adsrank
