#include <gtest/gtest.h>

#include <sstream>

#include "adsrank/embeddings.hpp"
#include "test_util.hpp"

using namespace adsrank;
using adsrank::testing::toy2;
using adsrank::testing::vec;

namespace {

EmbeddingTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_embeddings(in);
}

}  // namespace

TEST(LoadEmbeddings, HeaderedFile) {
  auto t = parse("2 2\ncat 1.0 0.0\ndog 0.0 1.0");
  EXPECT_EQ(t.dim(), 2u);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(*lookup(t, "cat"), vec({1, 0}));
  EXPECT_EQ(*lookup(t, "dog"), vec({0, 1}));
}

TEST(LoadEmbeddings, InfersDimensionWithoutHeader) {
  auto t = parse("a 1 2 3 4 5\nb 1 2 3 4 5\nc 5 4 3 2 1\n");
  EXPECT_EQ(t.dim(), 5u);
  EXPECT_EQ(t.size(), 3u);
}

TEST(LoadEmbeddings, DimensionMismatchNamesLine) {
  try {
    parse("cat 1.0\ndog 1.0 2.0");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(LoadEmbeddings, NonNumericComponent) {
  try {
    parse("cat 1.0 0.0\ndog zero 1.0\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(LoadEmbeddings, EmptyFileIsFormatError) {
  EXPECT_THROW(parse(""), FormatError);
  EXPECT_THROW(parse("\n\n"), FormatError);
  EXPECT_THROW(parse("0 3\n"), FormatError);
}

TEST(LoadEmbeddings, LowercasesAndLaterDuplicatesWin) {
  auto t = parse("Cat 1 0\ncat 0 1\n");
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(*lookup(t, "cat"), vec({0, 1}));
}

TEST(LoadEmbeddings, MissingFile) {
  EXPECT_THROW(load_embeddings("/nonexistent/embeddings.txt"), NotFoundError);
}

TEST(Lookup, CaseInsensitiveAndOov) {
  auto t = toy2();
  EXPECT_EQ(*lookup(t, "cat"), vec({1, 0}));
  EXPECT_EQ(*lookup(t, "CAT"), vec({1, 0}));
  EXPECT_EQ(*lookup(t, "\"Cat!\""), vec({1, 0}));
  EXPECT_FALSE(lookup(t, "xylophone").has_value());
}

TEST(MeanEmbed, Examples) {
  auto t = toy2();
  EXPECT_EQ(*mean_embed(t, {"cat"}), vec({1, 0}));
  EXPECT_EQ(*mean_embed(t, {"cat", "dog"}), vec({0.5, 0.5}));
  EXPECT_FALSE(mean_embed(t, {"qqq", "zzz"}).has_value());
  EXPECT_FALSE(mean_embed(t, {}).has_value());
}

TEST(MeanEmbed, DuplicatesCountPerOccurrence) {
  auto t = toy2();
  auto m = *mean_embed(t, {"cat", "cat", "dog", "unknown"});
  EXPECT_NEAR(m[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m[1], 1.0 / 3.0, 1e-15);
}

TEST(CosineDistance, Examples) {
  EXPECT_DOUBLE_EQ(cosine_distance(vec({1, 0}), vec({1, 0})), 0.0);
  EXPECT_DOUBLE_EQ(cosine_distance(vec({1, 0}), vec({0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_distance(vec({1, 0}), vec({0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_distance(vec({1, 0}), vec({-1, 0})), 2.0);
}

TEST(CosineDistance, LengthMismatch) {
  EXPECT_THROW(cosine_distance(vec({1, 0}), vec({1, 0, 0})), DimensionError);
}

TEST(EmbeddingTable, RejectsBadEntries) {
  EmbeddingTable t(2);
  EXPECT_THROW(t.insert("x", vec({1, 2, 3})), DimensionError);
  EXPECT_THROW(t.insert("", vec({1, 2})), FormatError);
  EXPECT_THROW(t.insert("x", vec({1, std::nan("")})), FormatError);
  EXPECT_THROW(EmbeddingTable(0), DimensionError);
}
