#pragma once

#include <cctype>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace adsrank {

using TokenList = std::vector<std::string>;

/// Lowercases a token and strips leading/trailing non-alphanumeric
/// characters. Interior punctuation (apostrophes, hyphens) is kept, so
/// "Coke's!" becomes "coke's". May return an empty string.
inline std::string normalize_token(std::string_view raw) {
  auto is_alnum = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
  };
  std::size_t begin = 0;
  std::size_t end = raw.size();
  while (begin < end && !is_alnum(raw[begin])) ++begin;
  while (end > begin && !is_alnum(raw[end - 1])) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(raw[i]))));
  }
  return out;
}

inline std::string to_lower(std::string_view raw) {
  std::string out(raw);
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

/// Whitespace split followed by normalize_token; empty results are dropped.
inline TokenList tokenize(std::string_view text) {
  TokenList tokens;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    auto norm = normalize_token(word);
    if (!norm.empty()) tokens.push_back(std::move(norm));
  }
  return tokens;
}

/// Normalizes every token of an already split list, dropping empties.
inline TokenList normalize_tokens(const TokenList& raw) {
  TokenList tokens;
  tokens.reserve(raw.size());
  for (const auto& word : raw) {
    auto norm = normalize_token(word);
    if (!norm.empty()) tokens.push_back(std::move(norm));
  }
  return tokens;
}

}  // namespace adsrank
