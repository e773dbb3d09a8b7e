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

// Dataset statistics: record counts, mean word lengths, and NER tag counts
// over answer texts. A "word" is a textcore token.

#pragma once

#include <cstddef>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qta/errors.hpp"
#include "qta/service_clients.hpp"
#include "qta/squad_io.hpp"
#include "qta/textcore.hpp"

namespace qta {

struct DatasetStats {
  std::size_t n_records = 0;
  double avg_context_words = 0.0;
  double avg_question_words = 0.0;
  double avg_answer_words = 0.0;
  std::map<NerTag, std::size_t> ner_counts;

  bool operator==(const DatasetStats&) const = default;
};

template <typename Record>
DatasetStats compute_stats(const BasicDataset<Record>& d) {
  if (d.empty()) throw ArgumentError("statistics of an empty dataset are undefined");
  std::size_t context_words = 0;
  std::size_t question_words = 0;
  std::size_t answer_words = 0;
  for (const auto& rec : d.records) {
    const QaRecord& r = base_record(rec);
    context_words += tokenize(r.context).size();
    question_words += tokenize(r.question).size();
    if (!r.is_impossible) answer_words += tokenize(r.answer_text).size();
  }
  const auto n = static_cast<double>(d.size());
  DatasetStats s;
  s.n_records = d.size();
  s.avg_context_words = static_cast<double>(context_words) / n;
  s.avg_question_words = static_cast<double>(question_words) / n;
  s.avg_answer_words = static_cast<double>(answer_words) / n;
  return s;
}

// token: every tagged token counts once. span: a run of consecutive tokens
// with the same tag counts once.
enum class NerCountMode { token, span };

template <typename Record>
std::map<NerTag, std::size_t> count_ner_tags(const BasicDataset<Record>& d,
                                             const NerTaggerSpec& tagger,
                                             NerCountMode mode = NerCountMode::token) {
  std::vector<std::string> answers;
  for (const auto& rec : d.records) {
    const QaRecord& r = base_record(rec);
    if (!r.is_impossible && !r.answer_text.empty()) answers.push_back(r.answer_text);
  }
  std::map<NerTag, std::size_t> counts;
  if (answers.empty()) return counts;
  for (const auto& seq : ner_tag_batch(tagger, answers)) {
    NerTag previous = NerTag::O;
    for (const auto& [token, tag] : seq) {
      if (tag != NerTag::O && (mode == NerCountMode::token || tag != previous)) ++counts[tag];
      previous = tag;
    }
  }
  return counts;
}

inline nlohmann::ordered_json to_json(const DatasetStats& s) {
  nlohmann::ordered_json j;
  j["n_records"] = s.n_records;
  j["avg_context_words"] = s.avg_context_words;
  j["avg_question_words"] = s.avg_question_words;
  j["avg_answer_words"] = s.avg_answer_words;
  for (NerTag t : kEntityTags) {
    if (auto it = s.ner_counts.find(t); it != s.ner_counts.end()) {
      j["ner_" + std::string(to_string(t))] = it->second;
    }
  }
  return j;
}

// Tag-by-column table, one column per named dataset (e.g. Train/Test/Valid),
// followed by the length averages.
inline std::string render_stats_table(const std::vector<std::pair<std::string, DatasetStats>>& columns) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Tag"};
  for (const auto& [name, s] : columns) header.push_back(name);
  rows.push_back(header);
  for (NerTag t : kEntityTags) {
    std::vector<std::string> row{std::string(to_string(t))};
    for (const auto& [name, s] : columns) {
      auto it = s.ner_counts.find(t);
      row.push_back(std::to_string(it == s.ner_counts.end() ? 0 : it->second));
    }
    rows.push_back(std::move(row));
  }
  auto fixed = [](double v) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(2) << v;
    return o.str();
  };
  std::vector<std::string> records{"Records"}, ctx{"Context words"}, q{"Question words"},
      ans{"Answer words"};
  for (const auto& [name, s] : columns) {
    records.push_back(std::to_string(s.n_records));
    ctx.push_back(fixed(s.avg_context_words));
    q.push_back(fixed(s.avg_question_words));
    ans.push_back(fixed(s.avg_answer_words));
  }
  const std::size_t rule_at = rows.size();
  for (auto* r : {&records, &ctx, &q, &ans}) rows.push_back(std::move(*r));

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&] {
    for (std::size_t c = 0; c < width.size(); ++c) out << (c ? "  " : "") << std::string(width[c], '-');
    out << '\n';
  };
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r == 1 || r == rule_at) line();
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << rows[r][c];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[c])) << rows[r][c];
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace qta
