// Copyright 2026 The qta Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "qta/scoring.hpp"
#include "qta/textcore.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace qta {
namespace {

TEST(Tokenize, SplitsOnWhitespaceWithCodepointSpans) {
  const TokenSequence seq = tokenize("The quick brown fox");
  ASSERT_EQ(seq.size(), 4u);
  EXPECT_EQ(seq[0].char_start, 0u);
  EXPECT_EQ(seq[0].char_end, 3u);
  EXPECT_EQ(seq[1].char_start, 4u);
  EXPECT_EQ(seq[1].char_end, 9u);
  EXPECT_EQ(seq[2].char_start, 10u);
  EXPECT_EQ(seq[2].char_end, 15u);
  EXPECT_EQ(seq[3].char_start, 16u);
  EXPECT_EQ(seq[3].char_end, 19u);
  EXPECT_EQ(seq[0].normalized, "the");
}

TEST(Tokenize, StripsEdgePunctuationOnlyInNormalizedForm) {
  const TokenSequence seq = tokenize("dog.");
  ASSERT_EQ(seq.size(), 1u);
  EXPECT_EQ(seq[0].raw, "dog.");
  EXPECT_EQ(seq[0].normalized, "dog");
}

TEST(Tokenize, EmptyText) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" \t\n ").empty());
}

TEST(Tokenize, DevanagariOffsetsCountCodepoints) {
  // "राम" is three codepoints; the danda is punctuation.
  const TokenSequence seq = tokenize("राम घर गया।");
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq[0].char_start, 0u);
  EXPECT_EQ(seq[0].char_end, 3u);
  EXPECT_EQ(seq[1].char_start, 4u);
  EXPECT_EQ(seq[2].raw, "गया।");
  EXPECT_EQ(seq[2].normalized, "गया");
  EXPECT_EQ(seq[2].char_end, 11u);
}

TEST(Tokenize, UnicodeWhitespaceSeparates) {
  // NO-BREAK SPACE and IDEOGRAPHIC SPACE.
  const TokenSequence seq = tokenize("a b　c");
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq[2].char_start, 4u);
}

TEST(Tokenize, CaseFolds) { EXPECT_EQ(tokenize("\"Straße\"")[0].normalized, "strasse"); }

TEST(TokenizeProperty, SpansResliceToRawAndIncrease) {
  testing::TextGen g(11);
  for (int iter = 0; iter < 300; ++iter) {
    const std::string text = (g.chance(0.3) ? g.whitespace() : "") + g.text(g.uniform(0, 30)) +
                             (g.chance(0.3) ? g.whitespace() : "");
    const TokenSequence seq = tokenize(text);
    const std::u32string cps = unicode::decode(text);
    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const Token& t = seq[i];
      ASSERT_LT(t.char_start, t.char_end);
      ASSERT_GE(t.char_start, prev_end);
      ASSERT_EQ(unicode::encode(std::u32string_view(cps).substr(t.char_start, t.char_end - t.char_start)),
                t.raw);
      // Only whitespace between tokens.
      for (std::size_t c = prev_end; c < t.char_start; ++c) ASSERT_TRUE(unicode::is_whitespace(cps[c]));
      prev_end = t.char_end;
    }
  }
}

TEST(TokenizeProperty, IdempotentOnSpaceJoinedRaws) {
  testing::TextGen g(12);
  for (int iter = 0; iter < 200; ++iter) {
    const TokenSequence first = tokenize(g.text(g.uniform(0, 20)));
    std::string joined;
    for (const auto& t : first.tokens()) joined += (joined.empty() ? "" : " ") + t.raw;
    const TokenSequence second = tokenize(joined);
    ASSERT_EQ(first.size(), second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
      EXPECT_EQ(first[i].raw, second[i].raw);
      EXPECT_EQ(first[i].normalized, second[i].normalized);
    }
  }
}

TEST(CharSpanOfTokens, CoversTokenRange) {
  const TokenSequence seq = tokenize("The quick brown fox");
  EXPECT_EQ(char_span_of_tokens(seq, 1, 3), (CharSpan{4, 15}));
  EXPECT_EQ(seq.slice(4, 15), "quick brown");
  EXPECT_EQ(char_span_of_tokens(seq, 0, 1), (CharSpan{0, 3}));
}

TEST(CharSpanOfTokens, RejectsBadRanges) {
  const TokenSequence seq = tokenize("The quick brown fox");
  EXPECT_THROW(char_span_of_tokens(seq, 2, 5), ArgumentError);
  EXPECT_THROW(char_span_of_tokens(seq, 2, 2), ArgumentError);
}

TEST(Similarity, BagJaccardHandCount) {
  // min-count intersection {the, fox, through} = 3; max-count union adds
  // chased and persuaded = 5.
  EXPECT_DOUBLE_EQ(bag_jaccard("chased the fox through", "persuaded the fox through"), 0.6);
  EXPECT_DOUBLE_EQ(testing::oracle_bag_jaccard(testing::ascii_words("chased the fox through"),
                                               testing::ascii_words("persuaded the fox through")),
                   0.6);
}

TEST(Similarity, BagJaccardCountsMultiplicity) {
  // {the:2, fox:1} vs {the:1, fox:1}: 2 / 3.
  EXPECT_DOUBLE_EQ(bag_jaccard("the fox the", "The fox."), 2.0 / 3.0);
}

TEST(Similarity, LevenshteinKittenSitting) {
  EXPECT_NEAR(levenshtein_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0, 1e-12);
  EXPECT_EQ(testing::oracle_edit_distance(std::string("kitten"), std::string("sitting")), 3u);
}

TEST(Similarity, LevenshteinCountsCodepointsNotBytes) {
  // One substituted vowel sign out of three codepoints.
  EXPECT_NEAR(levenshtein_similarity("राम", "रोम"), 1.0 - 1.0 / 3.0, 1e-12);
}

TEST(Similarity, CharTrigramsDisjoint) {
  // {abc} vs {abd}.
  EXPECT_DOUBLE_EQ(char_ngram_cosine("abc", "abd", 3), 0.0);
}

TEST(Similarity, CharNgramShortStringIsOneGram) {
  EXPECT_DOUBLE_EQ(char_ngram_cosine("ab", "ab", 3), 1.0);
  EXPECT_DOUBLE_EQ(char_ngram_cosine("ab", "abc", 3), 0.0);
}

TEST(Similarity, CharNgramCollapsesWhitespaceAndCase) {
  EXPECT_DOUBLE_EQ(char_ngram_cosine("New  York", "new york", 3), 1.0);
}

TEST(Similarity, CharNgramHandComputed) {
  // "abcd" -> {abc, bcd}; "bcde" -> {bcd, cde}; cosine = 1 / 2.
  EXPECT_DOUBLE_EQ(char_ngram_cosine("abcd", "bcde", 3), 0.5);
}

TEST(Similarity, SelfSimilarityIsOneForEveryKind) {
  for (auto kind : {ScorerKind::bag_jaccard, ScorerKind::char_ngram_cosine, ScorerKind::levenshtein}) {
    EXPECT_DOUBLE_EQ(similarity(ScorerSpec{.kind = kind}, "x y z", "x y z"), 1.0) << to_string(kind);
  }
}

TEST(Similarity, EmptyConventions) {
  for (auto kind : {ScorerKind::bag_jaccard, ScorerKind::char_ngram_cosine, ScorerKind::levenshtein}) {
    EXPECT_DOUBLE_EQ(similarity(ScorerSpec{.kind = kind}, "", ""), 1.0) << to_string(kind);
    EXPECT_DOUBLE_EQ(similarity(ScorerSpec{.kind = kind}, "", "abc"), 0.0) << to_string(kind);
    EXPECT_DOUBLE_EQ(similarity(ScorerSpec{.kind = kind}, "abc", ""), 0.0) << to_string(kind);
  }
}

TEST(Similarity, RemoteKindNeedsEndpoint) {
  EXPECT_THROW(similarity(ScorerSpec{.kind = ScorerKind::remote_embedding}, "a", "b"), ArgumentError);
  EXPECT_THROW(LexicalScorer(ScorerSpec{.kind = ScorerKind::remote_embedding}), ArgumentError);
}

TEST(SimilarityProperty, RangeSymmetrySelf) {
  testing::TextGen g(21);
  for (int iter = 0; iter < 300; ++iter) {
    const std::string a = g.text(g.uniform(0, 6));
    const std::string b = g.chance(0.2) ? a : g.text(g.uniform(0, 6));
    for (auto kind : {ScorerKind::bag_jaccard, ScorerKind::char_ngram_cosine, ScorerKind::levenshtein}) {
      const ScorerSpec spec{kind};
      const double ab = similarity(spec, a, b);
      ASSERT_GE(ab, 0.0);
      ASSERT_LE(ab, 1.0);
      ASSERT_EQ(ab, similarity(spec, b, a)) << to_string(kind) << " '" << a << "' '" << b << "'";
      if (!a.empty()) {
        ASSERT_EQ(similarity(spec, a, a), 1.0) << to_string(kind) << " '" << a << "'";
      }
    }
  }
}

TEST(SimilarityProperty, LevenshteinIsOneIffEqual) {
  testing::TextGen g(22);
  for (int iter = 0; iter < 300; ++iter) {
    const std::string a = g.text(g.uniform(0, 3));
    const std::string b = g.chance(0.3) ? a : g.text(g.uniform(0, 3));
    EXPECT_EQ(levenshtein_similarity(a, b) == 1.0, a == b);
    const auto ca = unicode::decode(a);
    const auto cb = unicode::decode(b);
    EXPECT_EQ(edit_distance(ca, cb), testing::oracle_edit_distance(ca, cb));
  }
}

TEST(SimilarityProperty, BagJaccardMatchesSortedMergeOracle) {
  testing::TextGen g(23);
  static const std::vector<std::string> vocab = {"the", "The", "fox", "fox.", "dog", "ran,", "a"};
  for (int iter = 0; iter < 300; ++iter) {
    std::vector<std::string> a;
    std::vector<std::string> b;
    for (std::size_t i = g.uniform(1, 6); i > 0; --i) a.push_back(vocab[g.uniform(0, vocab.size() - 1)]);
    for (std::size_t i = g.uniform(1, 6); i > 0; --i) b.push_back(vocab[g.uniform(0, vocab.size() - 1)]);
    EXPECT_DOUBLE_EQ(bag_jaccard(g.join(a), g.join(b)), testing::oracle_bag_jaccard(a, b));
  }
}

}  // namespace
}  // namespace qta
