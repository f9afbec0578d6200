#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "adsrank/error.hpp"
#include "adsrank/text.hpp"

namespace adsrank {

/// Dense vector in word-embedding (or projected) space.
using SemVector = Eigen::VectorXd;

/// Token -> vector map with a fixed dimension. Tokens are stored lowercased;
/// lookups normalize the query (lowercase + boundary punctuation strip).
/// Immutable once loaded, so concurrent reads need no synchronization.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw DimensionError("embedding dimension must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  /// Inserts or overwrites. Throws on wrong length, non-finite components or
  /// an empty token.
  void insert(std::string_view token, SemVector vec) {
    auto key = to_lower(token);
    if (key.empty()) throw FormatError("empty embedding token");
    if (static_cast<std::size_t>(vec.size()) != dim_) {
      throw DimensionError("embedding for '" + key + "' has " +
                           std::to_string(vec.size()) + " components, expected " +
                           std::to_string(dim_));
    }
    if (!vec.allFinite()) {
      throw FormatError("embedding for '" + key + "' has non-finite components");
    }
    entries_.insert_or_assign(std::move(key), std::move(vec));
  }

  const SemVector* find(std::string_view token) const {
    auto it = entries_.find(normalize_token(token));
    return it == entries_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, SemVector, std::less<>>& entries() const {
    return entries_;
  }

 private:
  std::size_t dim_;
  std::map<std::string, SemVector, std::less<>> entries_;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

inline std::optional<double> parse_double(std::string_view s) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace detail

/// Parses the word2vec/GloVe text format: an optional "V D" header followed
/// by "token c1 ... cD" lines. Later duplicates overwrite earlier ones.
inline EmbeddingTable parse_embeddings(std::istream& in) {
  std::optional<EmbeddingTable> table;
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (!seen_content) {
      seen_content = true;
      if (fields.size() == 2) {
        auto count = detail::parse_int(fields[0]);
        auto dim = detail::parse_int(fields[1]);
        if (count && dim) {
          if (*dim <= 0) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": header dimension must be positive");
          }
          table.emplace(static_cast<std::size_t>(*dim));
          continue;
        }
      }
    }
    if (fields.size() < 2) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected a token followed by components");
    }
    const std::size_t components = fields.size() - 1;
    if (!table) table.emplace(components);
    if (components != table->dim()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table->dim()) + " components, got " +
                       std::to_string(components));
    }
    SemVector vec(static_cast<Eigen::Index>(components));
    for (std::size_t k = 0; k < components; ++k) {
      auto value = detail::parse_double(fields[k + 1]);
      if (!value || !std::isfinite(*value)) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": invalid component '" + std::string(fields[k + 1]) +
                         "'");
      }
      vec[static_cast<Eigen::Index>(k)] = *value;
    }
    table->insert(fields[0], std::move(vec));
  }
  if (!table || table->size() == 0) {
    throw FormatError("embedding file contains no vectors");
  }
  return std::move(*table);
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open embedding file: " + path);
  return parse_embeddings(in);
}

/// Writes the table with a "V D" header and round-trip (%.17g) precision.
inline void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[32];
  for (const auto& [token, vec] : table.entries()) {
    out << token;
    for (Eigen::Index k = 0; k < vec.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", vec[k]);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

inline void save_embeddings(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write embedding file: " + path);
  write_embeddings(out, table);
}

/// Never returns a default vector for OOV tokens.
inline std::optional<SemVector> lookup(const EmbeddingTable& table,
                                       std::string_view token) {
  if (const auto* vec = table.find(token)) return *vec;
  return std::nullopt;
}

/// Mean of the in-vocabulary token vectors, counting repeats. Absent when no
/// token is known.
inline std::optional<SemVector> mean_embed(const EmbeddingTable& table,
                                           const TokenList& tokens) {
  SemVector sum = SemVector::Zero(static_cast<Eigen::Index>(table.dim()));
  std::size_t hits = 0;
  for (const auto& token : tokens) {
    if (const auto* vec = table.find(token)) {
      sum += *vec;
      ++hits;
    }
  }
  if (hits == 0) return std::nullopt;
  return SemVector(sum / static_cast<double>(hits));
}

/// 1 - cos(a, b), clamped to [0, 2]. A zero-norm operand yields 1.0.
inline double cosine_distance(const SemVector& a, const SemVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_distance: lengths " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()) + " differ");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  const double d = 1.0 - a.dot(b) / (na * nb);
  return std::clamp(d, 0.0, 2.0);
}

/// Unit-normalized copy; the zero vector maps to itself.
inline SemVector normalized(const SemVector& v) {
  const double n = v.norm();
  if (n == 0.0) return v;
  return v / n;
}

}  // namespace adsrank
