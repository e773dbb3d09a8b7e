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

// Tokenization with codepoint offset maps, and the lexical similarity scorers
// used by the aligner.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qta/errors.hpp"
#include "qta/unicode.hpp"

namespace qta {

struct Token {
  std::string raw;
  // Edge punctuation stripped, case-folded. Used only for scoring.
  std::string normalized;
  std::size_t char_start = 0;  // codepoint, inclusive
  std::size_t char_end = 0;    // codepoint, exclusive

  bool operator==(const Token&) const = default;
};

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const CharSpan&) const = default;
};

class TokenSequence {
 public:
  TokenSequence() = default;
  TokenSequence(std::string source, std::u32string codepoints, std::vector<Token> tokens)
      : source_(std::move(source)), codepoints_(std::move(codepoints)), tokens_(std::move(tokens)) {}

  const std::string& source_text() const noexcept { return source_; }
  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const Token& operator[](std::size_t i) const { return tokens_[i]; }

  std::size_t codepoint_count() const noexcept { return codepoints_.size(); }

  // Raw source text for codepoint range [start, end).
  std::string slice(std::size_t start, std::size_t end) const {
    return unicode::encode(std::u32string_view(codepoints_).substr(start, end - start));
  }

  // Raw text from the first token's start to the last token's end, interior
  // whitespace included.
  std::string window_text(std::size_t token_start, std::size_t token_end) const {
    return slice(tokens_[token_start].char_start, tokens_[token_end - 1].char_end);
  }

 private:
  std::string source_;
  std::u32string codepoints_;
  std::vector<Token> tokens_;
};

inline std::string normalize_token(std::u32string_view raw) {
  return unicode::fold_case(unicode::encode(unicode::strip_punctuation(raw)));
}

// Each maximal run of non-whitespace codepoints is one token.
inline TokenSequence tokenize(std::string_view text) {
  std::u32string cps = unicode::decode(text);
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (unicode::is_whitespace(cps[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < cps.size() && !unicode::is_whitespace(cps[j])) ++j;
    std::u32string_view run = std::u32string_view(cps).substr(i, j - i);
    tokens.push_back(Token{unicode::encode(run), normalize_token(run), i, j});
    i = j;
  }
  return TokenSequence(std::string(text), std::move(cps), std::move(tokens));
}

inline CharSpan char_span_of_tokens(const TokenSequence& seq, std::size_t token_start,
                                    std::size_t token_end) {
  if (token_start >= token_end || token_end > seq.size()) {
    throw ArgumentError("token range [" + std::to_string(token_start) + ", " +
                        std::to_string(token_end) + ") invalid for " +
                        std::to_string(seq.size()) + " tokens");
  }
  return {seq[token_start].char_start, seq[token_end - 1].char_end};
}

// Index of the tokens overlapping codepoint span [start, end); nullopt if none do.
inline std::optional<std::pair<std::size_t, std::size_t>> tokens_covering(const TokenSequence& seq,
                                                                         std::size_t start,
                                                                         std::size_t end) {
  std::optional<std::size_t> first;
  std::size_t last = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].char_end > start && seq[t].char_start < end) {
      if (!first) first = t;
      last = t + 1;
    }
  }
  if (!first) return std::nullopt;
  return std::pair{*first, last};
}

// ---------------------------------------------------------------------------
// Scorers

enum class ScorerKind { bag_jaccard, char_ngram_cosine, levenshtein, remote_embedding };

inline std::string_view to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::bag_jaccard: return "bag_jaccard";
    case ScorerKind::char_ngram_cosine: return "char_ngram_cosine";
    case ScorerKind::levenshtein: return "levenshtein";
    case ScorerKind::remote_embedding: return "remote_embedding";
  }
  return "?";
}

inline ScorerKind parse_scorer_kind(std::string_view s) {
  for (auto k : {ScorerKind::bag_jaccard, ScorerKind::char_ngram_cosine, ScorerKind::levenshtein,
                 ScorerKind::remote_embedding}) {
    if (to_string(k) == s) return k;
  }
  throw ArgumentError("unknown scorer '" + std::string(s) + "'");
}

struct ScorerSpec {
  ScorerKind kind = ScorerKind::char_ngram_cosine;
  int ngram_n = 3;
  std::optional<std::string> endpoint;  // remote_embedding only

  bool operator==(const ScorerSpec&) const = default;

  void validate() const {
    if (ngram_n < 1) throw ArgumentError("ngram_n must be >= 1");
    if (kind == ScorerKind::remote_embedding && !endpoint) {
      throw ArgumentError("remote_embedding scorer requires an endpoint");
    }
  }
};

namespace detail {

inline std::map<std::string, int64_t> token_bag(std::string_view text) {
  std::map<std::string, int64_t> bag;
  const TokenSequence seq = tokenize(text);
  for (const Token& t : seq.tokens()) {
    if (!t.normalized.empty()) ++bag[t.normalized];
  }
  return bag;
}

}  // namespace detail

// Multiset Jaccard over normalized tokens: sum of min counts / sum of max counts.
inline double bag_jaccard(std::string_view a, std::string_view b) {
  const auto bag_a = detail::token_bag(a);
  const auto bag_b = detail::token_bag(b);
  if (bag_a.empty() && bag_b.empty()) {
    // Nothing but punctuation or whitespace on both sides.
    return unicode::collapse_whitespace(a) == unicode::collapse_whitespace(b) ? 1.0 : 0.0;
  }
  int64_t inter = 0;
  int64_t uni = 0;
  auto ia = bag_a.begin();
  auto ib = bag_b.begin();
  while (ia != bag_a.end() || ib != bag_b.end()) {
    if (ib == bag_b.end() || (ia != bag_a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == bag_a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Cosine of character n-gram count vectors over the whitespace-collapsed,
// case-folded text. A text shorter than n is a single gram.
inline double char_ngram_cosine(std::string_view a, std::string_view b, int n = 3) {
  if (n < 1) throw ArgumentError("ngram_n must be >= 1");
  auto grams = [n](std::string_view s) {
    const std::u32string cps = unicode::decode(unicode::fold_case(unicode::collapse_whitespace(s)));
    std::unordered_map<std::u32string, int64_t> counts;
    const auto un = static_cast<std::size_t>(n);
    if (cps.empty()) return counts;
    if (cps.size() < un) {
      ++counts[cps];
      return counts;
    }
    for (std::size_t i = 0; i + un <= cps.size(); ++i) ++counts[cps.substr(i, un)];
    return counts;
  };
  const auto ga = grams(a);
  const auto gb = grams(b);
  if (ga.empty() || gb.empty()) return ga.empty() && gb.empty() ? 1.0 : 0.0;
  int64_t dot = 0;
  int64_t norm_a = 0;
  int64_t norm_b = 0;
  for (const auto& [g, c] : ga) {
    norm_a += c * c;
    if (auto it = gb.find(g); it != gb.end()) dot += c * it->second;
  }
  for (const auto& [g, c] : gb) norm_b += c * c;
  // sqrt of the integer product keeps s(x, x) exactly 1.
  const double value = static_cast<double>(dot) /
                       std::sqrt(static_cast<double>(norm_a) * static_cast<double>(norm_b));
  return std::clamp(value, 0.0, 1.0);
}

inline std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0u : 1u)});
      diag = up;
    }
  }
  return row[b.size()];
}

// 1 - editdistance / max length, over raw codepoints.
inline double levenshtein_similarity(std::string_view a, std::string_view b) {
  const std::u32string ca = unicode::decode(a);
  const std::u32string cb = unicode::decode(b);
  const std::size_t longest = std::max(ca.size(), cb.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(ca, cb)) / static_cast<double>(longest);
}

inline double lexical_similarity(const ScorerSpec& spec, std::string_view a, std::string_view b) {
  switch (spec.kind) {
    case ScorerKind::bag_jaccard: return bag_jaccard(a, b);
    case ScorerKind::char_ngram_cosine: return char_ngram_cosine(a, b, spec.ngram_n);
    case ScorerKind::levenshtein: return levenshtein_similarity(a, b);
    case ScorerKind::remote_embedding: break;
  }
  throw ArgumentError("remote_embedding is not a lexical scorer");
}

// Scores one target against many candidate texts. Batched so remote scorers
// can send a whole scan in one request.
template <typename S>
concept WindowScorer = requires(S& s, std::string_view target, std::span<const std::string> candidates) {
  { s.score_many(target, candidates) } -> std::convertible_to<std::vector<double>>;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> score_many(std::string_view target,
                                         std::span<const std::string> candidates) = 0;

  double score(std::string_view a, std::string_view b) {
    const std::string candidate(b);
    return score_many(a, std::span<const std::string>(&candidate, 1)).front();
  }
};

class LexicalScorer final : public Scorer {
 public:
  explicit LexicalScorer(ScorerSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.kind == ScorerKind::remote_embedding) {
      throw ArgumentError("LexicalScorer cannot serve remote_embedding");
    }
  }

  std::vector<double> score_many(std::string_view target,
                                 std::span<const std::string> candidates) override {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(lexical_similarity(spec_, target, c));
    return out;
  }

  const ScorerSpec& spec() const noexcept { return spec_; }

 private:
  ScorerSpec spec_;
};

}  // namespace qta
