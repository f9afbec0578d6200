#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "adsrank/text.hpp"
#include "adsrank/textsem.hpp"

namespace adsrank {

/// Precomputed patch features from the object and symbol detectors. Every
/// vector within a channel shares that channel's length; either channel may
/// be empty.
struct VisualFeatures {
  std::vector<Eigen::VectorXd> object_patches;
  std::vector<Eigen::VectorXd> symbol_patches;
};

enum class Label { negative = 0, positive = 1, unlabeled = 2 };

/// Candidate action-reason statement.
///
/// `tokens` is derived from `text` by tokenize(). When a "because" split
/// exists, action ++ {"because"} ++ reason == tokens; otherwise both parts
/// equal the full token list.
struct Statement {
  std::string text;
  TokenList tokens;
  TokenList action_tokens;
  TokenList reason_tokens;
  Label label = Label::unlabeled;

  bool is_positive() const { return label == Label::positive; }
};

/// Splits at the first standalone "because". A split that would leave either
/// side empty is ignored and both parts get the full token list.
inline std::pair<TokenList, TokenList> parse_action_reason(const TokenList& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] != "because") continue;
    if (i == 0 || i + 1 == tokens.size()) break;
    return {TokenList(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(i)),
            TokenList(tokens.begin() + static_cast<std::ptrdiff_t>(i) + 1, tokens.end())};
  }
  return {tokens, tokens};
}

inline std::pair<TokenList, TokenList> parse_action_reason(const std::string& text) {
  return parse_action_reason(tokenize(text));
}

inline Statement make_statement(std::string text, Label label = Label::unlabeled) {
  Statement s;
  s.tokens = tokenize(text);
  auto [action, reason] = parse_action_reason(s.tokens);
  s.action_tokens = std::move(action);
  s.reason_tokens = std::move(reason);
  s.text = std::move(text);
  s.label = label;
  return s;
}

struct ImageRecord {
  std::string id;
  VisualFeatures features;
  SceneText scene;
  std::vector<Statement> statements;

  std::vector<std::size_t> positive_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < statements.size(); ++i) {
      if (statements[i].is_positive()) out.push_back(i);
    }
    return out;
  }
};

}  // namespace adsrank
