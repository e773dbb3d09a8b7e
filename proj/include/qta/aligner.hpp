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

// Locates a translated answer inside its translated context.
//
// The window is as wide as the answer, in tokens. A coarse pass scores
// non-overlapping windows (stride = width), the best one is merged with its
// two neighbours, and a stride-1 pass over that region picks the final span.
// Ties go to the earliest window at every stage. The winning window's raw
// context text replaces the translated answer, so the emitted span is always
// a verbatim slice of the context.

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qta/errors.hpp"
#include "qta/scoring.hpp"
#include "qta/squad_io.hpp"
#include "qta/textcore.hpp"

namespace qta {

struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const TokenRange&) const = default;
};

struct WindowMatch {
  TokenRange window;
  double score = 0.0;

  bool operator==(const WindowMatch&) const = default;
};

struct AlignerConfig {
  ScorerSpec scorer;
  // Scores below this are kept but flagged low_confidence.
  double low_confidence_threshold = 0.35;

  bool operator==(const AlignerConfig&) const = default;

  void validate() const {
    scorer.validate();
    if (!(low_confidence_threshold >= 0.0 && low_confidence_threshold <= 1.0)) {
      throw ArgumentError("low_confidence_threshold must lie in [0, 1]");
    }
  }
};

struct AlignmentResult {
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  std::string replaced_answer;
  double score = 0.0;
  AlignmentFlag flag = AlignmentFlag::failed;

  bool operator==(const AlignmentResult&) const = default;
};

// Coarse-pass windows: starts 0, W, 2W, ... When the grid leaves a tail
// shorter than W, one last window [n-W, n) is added so the tail is covered by
// a full-width window. A context shorter than W is a single window.
inline std::vector<TokenRange> coarse_windows(std::size_t n_tokens, std::size_t width) {
  if (width == 0) throw ArgumentError("window width must be >= 1");
  std::vector<TokenRange> out;
  if (n_tokens == 0) return out;
  if (n_tokens <= width) return {TokenRange{0, n_tokens}};
  std::size_t start = 0;
  for (; start + width <= n_tokens; start += width) out.push_back({start, start + width});
  if (start < n_tokens) out.push_back({n_tokens - width, n_tokens});
  return out;
}

// Every width-W window inside `region`; the whole region when it is narrower.
inline std::vector<TokenRange> sliding_windows(TokenRange region, std::size_t width) {
  if (width == 0) throw ArgumentError("window width must be >= 1");
  if (region.size() <= width) return {region};
  std::vector<TokenRange> out;
  for (std::size_t s = region.begin; s + width <= region.end; ++s) out.push_back({s, s + width});
  return out;
}

namespace detail {

template <WindowScorer S>
WindowMatch best_window(const TokenSequence& ctx, std::string_view answer,
                        const std::vector<TokenRange>& windows, S& scorer) {
  std::vector<std::string> texts;
  texts.reserve(windows.size());
  for (const auto& w : windows) texts.push_back(ctx.window_text(w.begin, w.end));
  const std::vector<double> scores = scorer.score_many(answer, std::span<const std::string>(texts));
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;  // strict: earliest wins ties
  }
  return {windows[best], scores[best]};
}

}  // namespace detail

template <WindowScorer S>
WindowMatch coarse_scan(const TokenSequence& ctx, std::string_view answer, std::size_t width,
                        S& scorer) {
  if (ctx.empty()) throw ArgumentError("coarse_scan on an empty context");
  return detail::best_window(ctx, answer, coarse_windows(ctx.size(), width), scorer);
}

// The best coarse window together with the windows before and after it,
// clipped to the sequence: [best - W, best + 2W).
inline TokenRange merge_region(std::size_t n_tokens, std::size_t best_start, std::size_t width) {
  if (best_start >= n_tokens) throw ArgumentError("best_start outside the sequence");
  return {best_start >= width ? best_start - width : 0, std::min(n_tokens, best_start + 2 * width)};
}

template <WindowScorer S>
WindowMatch fine_scan(const TokenSequence& ctx, TokenRange region, std::string_view answer,
                      std::size_t width, S& scorer) {
  if (region.size() == 0 || region.end > ctx.size()) {
    throw ArgumentError("fine_scan region must be a nonempty range inside the context");
  }
  return detail::best_window(ctx, answer, sliding_windows(region, width), scorer);
}

// Intermediate results of one alignment, for diagnostics and tests.
struct AlignmentTrace {
  std::size_t width = 0;
  WindowMatch coarse;
  TokenRange region;
  WindowMatch fine;
};

namespace detail {

inline AlignmentResult finish(const TokenSequence& ctx, const WindowMatch& m, double threshold) {
  AlignmentResult r;
  const CharSpan span = char_span_of_tokens(ctx, m.window.begin, m.window.end);
  r.char_start = span.start;
  r.char_end = span.end;
  r.token_start = m.window.begin;
  r.token_end = m.window.end;
  r.replaced_answer = ctx.slice(span.start, span.end);
  r.score = m.score;
  r.flag = m.score >= threshold ? AlignmentFlag::ok : AlignmentFlag::low_confidence;
  return r;
}

}  // namespace detail

template <WindowScorer S>
AlignmentResult align_answer(std::string_view context, std::string_view translated_answer,
                             double low_confidence_threshold, S& scorer,
                             AlignmentTrace* trace = nullptr) {
  const TokenSequence ctx = tokenize(context);
  const std::size_t width = tokenize(translated_answer).size();
  if (ctx.empty() || width == 0) return AlignmentResult{};

  const WindowMatch coarse = coarse_scan(ctx, translated_answer, width, scorer);
  const TokenRange region = merge_region(ctx.size(), coarse.window.begin, width);
  const WindowMatch fine = fine_scan(ctx, region, translated_answer, width, scorer);
  if (trace) *trace = AlignmentTrace{width, coarse, region, fine};
  return detail::finish(ctx, fine, low_confidence_threshold);
}

inline AlignmentResult align_answer(std::string_view context, std::string_view translated_answer,
                                    const AlignerConfig& cfg, AlignmentTrace* trace = nullptr) {
  cfg.validate();
  auto scorer = make_scorer(cfg.scorer);
  return align_answer(context, translated_answer, cfg.low_confidence_threshold, *scorer, trace);
}

// Stride-1 scan of the whole context. Reference result for align_answer.
template <WindowScorer S>
AlignmentResult exhaustive_align(std::string_view context, std::string_view translated_answer,
                                 double low_confidence_threshold, S& scorer) {
  const TokenSequence ctx = tokenize(context);
  const std::size_t width = tokenize(translated_answer).size();
  if (ctx.empty() || width == 0) return AlignmentResult{};
  const WindowMatch best = detail::best_window(
      ctx, translated_answer, sliding_windows({0, ctx.size()}, width), scorer);
  return detail::finish(ctx, best, low_confidence_threshold);
}

inline AlignmentResult exhaustive_align(std::string_view context,
                                        std::string_view translated_answer,
                                        const AlignerConfig& cfg) {
  cfg.validate();
  auto scorer = make_scorer(cfg.scorer);
  return exhaustive_align(context, translated_answer, cfg.low_confidence_threshold, *scorer);
}

}  // namespace qta
