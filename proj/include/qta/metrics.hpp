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

// QA evaluation: Exact Match, ROUGE-N, ROUGE-L and corpus BLEU-1/2.
//
// Every metric sees the same normalized answer tokens: NFC composition,
// whitespace tokenization, edge punctuation stripped, empty tokens dropped.
// There is no case folding or article removal.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qta/errors.hpp"
#include "qta/squad_io.hpp"
#include "qta/textcore.hpp"
#include "qta/unicode.hpp"

namespace qta {

inline std::vector<std::string> answer_tokens(std::string_view text) {
  std::vector<std::string> out;
  const TokenSequence seq = tokenize(unicode::nfc(text));
  for (const Token& t : seq.tokens()) {
    const std::u32string cps = unicode::decode(t.raw);
    const auto core = unicode::strip_punctuation(cps);
    if (!core.empty()) out.push_back(unicode::encode(core));
  }
  return out;
}

inline std::string normalize_answer(std::string_view text) {
  std::string out;
  for (const auto& t : answer_tokens(text)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

inline int exact_match(std::string_view pred, std::string_view ref) {
  return answer_tokens(pred) == answer_tokens(ref) ? 1 : 0;
}

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const RougeScore&) const = default;
};

namespace detail {

inline double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(
    const std::vector<std::string>& toks, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

inline std::size_t clipped_overlap(const std::map<std::vector<std::string>, std::size_t>& a,
                                   const std::map<std::vector<std::string>, std::size_t>& b) {
  std::size_t overlap = 0;
  for (const auto& [gram, c] : a) {
    if (auto it = b.find(gram); it != b.end()) overlap += std::min(c, it->second);
  }
  return overlap;
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

}  // namespace detail

// Equal normalized answers score 1/1/1 even when shorter than n.
inline RougeScore rouge_n(std::string_view pred, std::string_view ref, std::size_t n = 2) {
  if (n < 1) throw ArgumentError("rouge_n needs n >= 1");
  const auto tp = answer_tokens(pred);
  const auto tr = answer_tokens(ref);
  if (tp == tr) return {1.0, 1.0, 1.0};
  const auto gp = detail::ngram_counts(tp, n);
  const auto gr = detail::ngram_counts(tr, n);
  if (gp.empty() || gr.empty()) return {};
  const auto overlap = static_cast<double>(detail::clipped_overlap(gp, gr));
  const double p = overlap / static_cast<double>(tp.size() - n + 1);
  const double r = overlap / static_cast<double>(tr.size() - n + 1);
  return {p, r, detail::harmonic(p, r)};
}

inline RougeScore rouge_l(std::string_view pred, std::string_view ref) {
  const auto tp = answer_tokens(pred);
  const auto tr = answer_tokens(ref);
  if (tp == tr) return {1.0, 1.0, 1.0};
  if (tp.empty() || tr.empty()) return {};
  const auto l = static_cast<double>(detail::lcs_length(tp, tr));
  const double p = l / static_cast<double>(tp.size());
  const double r = l / static_cast<double>(tr.size());
  return {p, r, detail::harmonic(p, r)};
}

struct BleuScores {
  // Modified precision p_n for n = 1..max_n, after smoothing.
  std::vector<double> precisions;
  double brevity_penalty = 0.0;
  // Cumulative BLEU-n in percent, n = 1..max_n.
  std::vector<double> bleu_percent;
};

inline constexpr double kBleuEpsilon = 1e-9;

// Corpus BLEU: clipped n-gram counts and lengths pooled over all pairs.
// BP = 1 if c > r else exp(1 - r/c). A zero p_n is replaced by 1e-9.
inline BleuScores bleu_corpus(const std::vector<std::string>& preds,
                              const std::vector<std::string>& refs, std::size_t max_n = 2) {
  if (preds.size() != refs.size()) throw ArgumentError("bleu_corpus: preds and refs differ in size");
  if (preds.empty()) throw ArgumentError("bleu_corpus needs at least one pair");
  if (max_n < 1) throw ArgumentError("bleu_corpus needs max_n >= 1");
  std::vector<std::size_t> clipped(max_n, 0);
  std::vector<std::size_t> total(max_n, 0);
  std::size_t c = 0;
  std::size_t r = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto tp = answer_tokens(preds[i]);
    const auto tr = answer_tokens(refs[i]);
    c += tp.size();
    r += tr.size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto gp = detail::ngram_counts(tp, n);
      clipped[n - 1] += detail::clipped_overlap(gp, detail::ngram_counts(tr, n));
      if (tp.size() >= n) total[n - 1] += tp.size() - n + 1;
    }
  }
  BleuScores s;
  s.brevity_penalty = c > r ? 1.0 : (c == 0 ? 0.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)));
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    const double p = clipped[n] > 0 ? static_cast<double>(clipped[n]) / static_cast<double>(total[n])
                                    : kBleuEpsilon;
    s.precisions.push_back(p);
    log_sum += std::log(p);
    s.bleu_percent.push_back(100.0 * s.brevity_penalty * std::exp(log_sum / static_cast<double>(n + 1)));
  }
  return s;
}

using PredictionSet = std::map<std::string, std::string>;

// JSONL lines of {"id": ..., "prediction": ...}.
inline PredictionSet parse_predictions(std::string_view text) {
  PredictionSet out;
  detail::for_each_jsonl_line(text, [&](const nlohmann::json& obj, const std::string& where) {
    std::string id = detail::require_string(obj, "id", where);
    std::string prediction = detail::require_string(obj, "prediction", where);
    if (!out.emplace(id, std::move(prediction)).second) {
      throw ValidationError(where + ": duplicate prediction id '" + id + "'");
    }
  });
  return out;
}

struct RecordMetrics {
  std::string id;
  int exact_match = 0;
  RougeScore rouge2;
  RougeScore rougeL;
  double p1 = 0.0;
  double p2 = 0.0;
  double bleu1_percent = 0.0;
  double bleu2_percent = 0.0;
};

struct MetricReport {
  double em_percent = 0.0;
  RougeScore rouge2;  // macro average over records
  RougeScore rougeL;  // macro average over records
  double bleu1_percent = 0.0;
  double bleu2_percent = 0.0;
  std::vector<RecordMetrics> per_record;
};

// Scores the prediction for every dataset record against its answer_text.
// Predictions for ids outside the dataset are ignored.
template <typename Record>
MetricReport evaluate(const PredictionSet& preds, const BasicDataset<Record>& d) {
  if (d.empty()) throw ArgumentError("evaluate needs a nonempty dataset");
  std::vector<std::string> missing;
  for (const auto& rec : d.records) {
    if (!preds.contains(base_record(rec).id)) missing.push_back(base_record(rec).id);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw ValidationError("no prediction for " + std::to_string(missing.size()) + " record(s): " + list);
  }

  MetricReport rep;
  std::vector<std::string> pred_texts;
  std::vector<std::string> ref_texts;
  double em = 0.0;
  for (const auto& rec : d.records) {
    const QaRecord& r = base_record(rec);
    const std::string& pred = preds.at(r.id);
    RecordMetrics m;
    m.id = r.id;
    m.exact_match = exact_match(pred, r.answer_text);
    m.rouge2 = rouge_n(pred, r.answer_text, 2);
    m.rougeL = rouge_l(pred, r.answer_text);
    const BleuScores b = bleu_corpus({pred}, {r.answer_text}, 2);
    m.p1 = b.precisions[0];
    m.p2 = b.precisions[1];
    m.bleu1_percent = b.bleu_percent[0];
    m.bleu2_percent = b.bleu_percent[1];
    em += m.exact_match;
    for (auto [dst, src] : {std::pair{&rep.rouge2, &m.rouge2}, std::pair{&rep.rougeL, &m.rougeL}}) {
      dst->precision += src->precision;
      dst->recall += src->recall;
      dst->f1 += src->f1;
    }
    pred_texts.push_back(pred);
    ref_texts.push_back(r.answer_text);
    rep.per_record.push_back(std::move(m));
  }
  const auto n = static_cast<double>(d.size());
  rep.em_percent = 100.0 * em / n;
  for (auto* s : {&rep.rouge2, &rep.rougeL}) {
    s->precision /= n;
    s->recall /= n;
    s->f1 /= n;
  }
  const BleuScores corpus = bleu_corpus(pred_texts, ref_texts, 2);
  rep.bleu1_percent = corpus.bleu_percent[0];
  rep.bleu2_percent = corpus.bleu_percent[1];
  return rep;
}

inline nlohmann::ordered_json to_json(const RougeScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

inline nlohmann::ordered_json to_json(const MetricReport& rep, bool with_records = false) {
  nlohmann::ordered_json j;
  j["em_percent"] = rep.em_percent;
  j["rouge2"] = to_json(rep.rouge2);
  j["rougeL"] = to_json(rep.rougeL);
  j["bleu1_percent"] = rep.bleu1_percent;
  j["bleu2_percent"] = rep.bleu2_percent;
  if (with_records) {
    auto& records = j["per_record"] = nlohmann::ordered_json::array();
    for (const auto& m : rep.per_record) {
      nlohmann::ordered_json r;
      r["id"] = m.id;
      r["exact_match"] = m.exact_match;
      r["rouge2"] = to_json(m.rouge2);
      r["rougeL"] = to_json(m.rougeL);
      r["p1"] = m.p1;
      r["p2"] = m.p2;
      r["bleu1_percent"] = m.bleu1_percent;
      r["bleu2_percent"] = m.bleu2_percent;
      records.push_back(std::move(r));
    }
  }
  return j;
}

// One row per model; ROUGE columns show F1.
inline std::string render_metrics_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  const std::vector<std::string> header{"Model",   "EM(%)", "Rouge-2", "Rouge-L",
                                        "BLEU (Unigram)(%)", "BLEU (Bigrams)(%)"};
  std::vector<std::vector<std::string>> cells{header};
  auto fmt = [](double v, int digits) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << v;
    return o.str();
  };
  for (const auto& [name, r] : rows) {
    cells.push_back({name, fmt(r.em_percent, 2), fmt(r.rouge2.f1, 4), fmt(r.rougeL.f1, 4),
                     fmt(r.bleu1_percent, 2), fmt(r.bleu2_percent, 2)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      width[c] = std::max(width[c], unicode::length(row[c]));
    }
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const std::string pad(width[c] - unicode::length(cells[r][c]), ' ');
      if (c == 0) {
        out << cells[r][c] << pad;
      } else {
        out << "  " << pad << cells[r][c];
      }
    }
    out << '\n';
    if (r == 0) {
      for (std::size_t c = 0; c < width.size(); ++c) out << (c ? "  " : "") << std::string(width[c], '-');
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace qta
