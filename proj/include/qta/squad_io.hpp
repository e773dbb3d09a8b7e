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

// SQuAD 2.0 datasets: records, parsing, serialization, validation, splitting.
//
// Two formats are supported:
//   squad_json      nested data -> paragraphs -> qas, as distributed by SQuAD.
//   extended_jsonl  one flat object per line carrying the alignment fields.
// Character offsets everywhere are codepoint indices into the context.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "qta/errors.hpp"
#include "qta/textcore.hpp"
#include "qta/unicode.hpp"

namespace qta {

struct QaRecord {
  std::string id;
  std::string title;
  std::string context;
  std::string question;
  std::string answer_text;
  int64_t answer_start = -1;
  bool is_impossible = false;

  bool operator==(const QaRecord&) const = default;
};

enum class AlignmentFlag { ok, low_confidence, failed, passthrough_unanswerable };

inline std::string_view to_string(AlignmentFlag f) {
  switch (f) {
    case AlignmentFlag::ok: return "ok";
    case AlignmentFlag::low_confidence: return "low_confidence";
    case AlignmentFlag::failed: return "failed";
    case AlignmentFlag::passthrough_unanswerable: return "passthrough_unanswerable";
  }
  return "?";
}

inline AlignmentFlag parse_alignment_flag(std::string_view s) {
  for (auto f : {AlignmentFlag::ok, AlignmentFlag::low_confidence, AlignmentFlag::failed,
                 AlignmentFlag::passthrough_unanswerable}) {
    if (to_string(f) == s) return f;
  }
  throw ArgumentError("unknown alignment flag '" + std::string(s) + "'");
}

struct AlignedRecord {
  QaRecord record;
  int64_t answer_end = -1;          // codepoint, exclusive
  int64_t answer_token_start = -1;
  int64_t answer_token_end = -1;    // exclusive
  double alignment_score = 0.0;
  AlignmentFlag alignment_flag = AlignmentFlag::ok;

  bool operator==(const AlignedRecord&) const = default;
};

template <typename Record>
struct BasicDataset {
  std::vector<Record> records;
  std::string language_tag;

  bool operator==(const BasicDataset&) const = default;
  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

using Dataset = BasicDataset<QaRecord>;
using AlignedDataset = BasicDataset<AlignedRecord>;

enum class DatasetFormat { squad_json, extended_jsonl };

inline DatasetFormat parse_dataset_format(std::string_view s) {
  if (s == "squad_json" || s == "json") return DatasetFormat::squad_json;
  if (s == "extended_jsonl" || s == "jsonl") return DatasetFormat::extended_jsonl;
  throw ArgumentError("unknown dataset format '" + std::string(s) + "'");
}

inline const QaRecord& base_record(const QaRecord& r) { return r; }
inline const QaRecord& base_record(const AlignedRecord& r) { return r.record; }

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string record_id;
  std::string field;
  std::string rule;
  std::string message;

  bool operator==(const Violation&) const = default;
};

inline std::vector<Violation> validate_record(const QaRecord& r) {
  std::vector<Violation> out;
  auto add = [&](std::string field, std::string rule, std::string message) {
    out.push_back({r.id, std::move(field), std::move(rule), std::move(message)});
  };
  if (r.is_impossible) {
    if (!r.answer_text.empty() || r.answer_start != -1) {
      add("answer_start", "unanswerable-convention",
          "unanswerable record must have empty answer_text and answer_start -1");
    }
    return out;
  }
  if (r.answer_text.empty()) {
    add("answer_text", "empty-answer", "answerable record has an empty answer");
    return out;
  }
  if (r.answer_start < 0) {
    add("answer_start", "negative-start", "answer_start must be >= 0 for answerable records");
    return out;
  }
  const std::size_t len = unicode::length(r.answer_text);
  const auto slice = unicode::substr(r.context, static_cast<std::size_t>(r.answer_start), len);
  if (!slice) {
    add("answer_start", "span-mismatch", "answer span runs past the end of the context");
  } else if (*slice != r.answer_text) {
    add("answer_start", "span-mismatch",
        "context at answer_start reads '" + *slice + "', expected '" + r.answer_text + "'");
  }
  return out;
}

// Base checks plus consistency of the extended span fields.
inline std::vector<Violation> validate_record(const AlignedRecord& a) {
  const QaRecord& r = a.record;
  std::vector<Violation> out;
  auto add = [&](std::string field, std::string rule, std::string message) {
    out.push_back({r.id, std::move(field), std::move(rule), std::move(message)});
  };
  if (!(a.alignment_score >= 0.0 && a.alignment_score <= 1.0)) {
    add("alignment_score", "score-range", "alignment_score must lie in [0, 1]");
  }
  if (a.alignment_flag == AlignmentFlag::failed) return out;
  if (a.alignment_flag == AlignmentFlag::passthrough_unanswerable && !r.is_impossible) {
    add("alignment_flag", "passthrough-answerable", "passthrough flag on an answerable record");
  }
  auto base = validate_record(r);
  out.insert(out.end(), base.begin(), base.end());
  if (r.is_impossible) return out;

  const auto len = static_cast<int64_t>(unicode::length(r.answer_text));
  if (a.answer_end != r.answer_start + len) {
    add("answer_end", "end-mismatch", "answer_end must equal answer_start + |answer_text|");
  }
  const TokenSequence seq = tokenize(r.context);
  if (a.answer_token_start < 0 || a.answer_token_end <= a.answer_token_start ||
      a.answer_token_end > static_cast<int64_t>(seq.size())) {
    add("answer_token_start", "token-range", "token span out of range");
  } else {
    const CharSpan span = char_span_of_tokens(seq, static_cast<std::size_t>(a.answer_token_start),
                                              static_cast<std::size_t>(a.answer_token_end));
    if (static_cast<int64_t>(span.start) != r.answer_start ||
        static_cast<int64_t>(span.end) != a.answer_end) {
      add("answer_token_start", "token-char-mismatch",
          "token span does not map onto the character span");
    }
  }
  return out;
}

// Views a gold record as an aligned one: span fields derived from the context,
// token span = tokens overlapping the answer.
inline AlignedRecord to_aligned(const QaRecord& r) {
  AlignedRecord a;
  a.record = r;
  if (r.is_impossible) {
    a.alignment_flag = AlignmentFlag::passthrough_unanswerable;
    return a;
  }
  a.answer_end = r.answer_start + static_cast<int64_t>(unicode::length(r.answer_text));
  a.alignment_score = 1.0;
  if (r.answer_start >= 0) {
    const TokenSequence seq = tokenize(r.context);
    if (auto cover = tokens_covering(seq, static_cast<std::size_t>(r.answer_start),
                                     static_cast<std::size_t>(a.answer_end))) {
      a.answer_token_start = static_cast<int64_t>(cover->first);
      a.answer_token_end = static_cast<int64_t>(cover->second);
    }
  }
  return a;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

template <typename J>
const J& require(const J& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where, std::string("missing field '") + key + "'");
  return *it;
}

template <typename J>
std::string require_string(const J& obj, const char* key, const std::string& where) {
  const J& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(where, std::string("field '") + key + "' must be a string");
  return v.template get<std::string>();
}

template <typename J>
int64_t require_int(const J& obj, const char* key, const std::string& where) {
  const J& v = require(obj, key, where);
  if (!v.is_number_integer()) {
    throw ParseError(where, std::string("field '") + key + "' must be an integer");
  }
  return v.template get<int64_t>();
}

template <typename J>
bool optional_bool(const J& obj, const char* key, const std::string& where, bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_boolean()) throw ParseError(where, std::string("field '") + key + "' must be a boolean");
  return it->template get<bool>();
}

inline void check_unique_ids(const std::vector<std::string>& ids) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate record id '" + id + "'");
  }
}

inline QaRecord parse_flat_record(const json& obj, const std::string& where) {
  QaRecord r;
  r.id = require_string(obj, "id", where);
  r.title = obj.contains("title") ? require_string(obj, "title", where) : std::string();
  r.context = require_string(obj, "context", where);
  r.question = require_string(obj, "question", where);
  r.answer_text = require_string(obj, "answer_text", where);
  r.answer_start = require_int(obj, "answer_start", where);
  r.is_impossible = optional_bool(obj, "is_impossible", where, false);
  return r;
}

inline AlignedRecord parse_aligned_line(const json& obj, const std::string& where) {
  AlignedRecord a;
  a.record = parse_flat_record(obj, where);
  a.answer_end = require_int(obj, "answer_end", where);
  a.answer_token_start = require_int(obj, "answer_token_start", where);
  a.answer_token_end = require_int(obj, "answer_token_end", where);
  const json& score = require(obj, "alignment_score", where);
  if (!score.is_number()) throw ParseError(where, "field 'alignment_score' must be a number");
  a.alignment_score = score.get<double>();
  try {
    a.alignment_flag = parse_alignment_flag(require_string(obj, "alignment_flag", where));
  } catch (const ArgumentError& e) {
    throw ParseError(where, e.what());
  }
  return a;
}

template <typename F>
void for_each_jsonl_line(std::string_view text, F&& on_line) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where, e.what());
    }
    if (!obj.is_object()) throw ParseError(where, "expected a JSON object");
    on_line(obj, where);
  }
}

inline Dataset parse_squad_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
  Dataset d;
  if (!doc.is_object()) throw ParseError("document", "expected a top-level object");
  if (auto it = doc.find("language"); it != doc.end() && it->is_string()) {
    d.language_tag = it->get<std::string>();
  }
  const json& data = require(doc, "data", "document");
  if (!data.is_array()) throw ParseError("data", "expected an array");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string at = "data[" + std::to_string(i) + "]";
    const std::string title = data[i].contains("title") ? require_string(data[i], "title", at) : "";
    const json& paragraphs = require(data[i], "paragraphs", at);
    if (!paragraphs.is_array()) throw ParseError(at + ".paragraphs", "expected an array");
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
      const std::string pat = at + ".paragraphs[" + std::to_string(p) + "]";
      const std::string context = require_string(paragraphs[p], "context", pat);
      const json& qas = require(paragraphs[p], "qas", pat);
      if (!qas.is_array()) throw ParseError(pat + ".qas", "expected an array");
      for (std::size_t q = 0; q < qas.size(); ++q) {
        const std::string qat = pat + ".qas[" + std::to_string(q) + "]";
        QaRecord r;
        r.id = require_string(qas[q], "id", qat);
        r.title = title;
        r.context = context;
        r.question = require_string(qas[q], "question", qat);
        r.is_impossible = optional_bool(qas[q], "is_impossible", qat, false);
        if (auto it = qas[q].find("answers"); it != qas[q].end()) {
          if (!it->is_array()) throw ParseError(qat + ".answers", "expected an array");
          // Only the first gold answer is kept.
          if (!it->empty()) {
            const std::string aat = qat + ".answers[0]";
            r.answer_text = require_string((*it)[0], "text", aat);
            r.answer_start = require_int((*it)[0], "answer_start", aat);
          }
        }
        d.records.push_back(std::move(r));
      }
    }
  }
  return d;
}

template <typename Record>
void check_unique(const BasicDataset<Record>& d) {
  std::vector<std::string> ids;
  ids.reserve(d.size());
  for (const auto& r : d.records) ids.push_back(base_record(r).id);
  check_unique_ids(ids);
}

}  // namespace detail

inline AlignedDataset parse_aligned_dataset(std::string_view text) {
  AlignedDataset d;
  detail::for_each_jsonl_line(text, [&](const detail::json& obj, const std::string& where) {
    if (d.records.empty() && d.language_tag.empty()) {
      if (auto it = obj.find("language"); it != obj.end() && it->is_string()) {
        d.language_tag = it->get<std::string>();
      }
    }
    d.records.push_back(detail::parse_aligned_line(obj, where));
  });
  detail::check_unique(d);
  return d;
}

inline Dataset parse_dataset(std::string_view text, DatasetFormat format) {
  Dataset d;
  if (format == DatasetFormat::squad_json) {
    d = detail::parse_squad_json(text);
  } else {
    AlignedDataset aligned = parse_aligned_dataset(text);
    d.language_tag = std::move(aligned.language_tag);
    for (auto& a : aligned.records) d.records.push_back(std::move(a.record));
  }
  detail::check_unique(d);
  return d;
}

// ---------------------------------------------------------------------------
// Writing

namespace detail {

inline ordered_json aligned_to_json(const AlignedRecord& a, const std::string& language) {
  const QaRecord& r = a.record;
  ordered_json o;
  o["id"] = r.id;
  o["title"] = r.title;
  o["context"] = r.context;
  o["question"] = r.question;
  o["answer_text"] = r.answer_text;
  o["answer_start"] = r.answer_start;
  o["answer_end"] = a.answer_end;
  o["answer_token_start"] = a.answer_token_start;
  o["answer_token_end"] = a.answer_token_end;
  o["alignment_score"] = a.alignment_score;
  o["alignment_flag"] = to_string(a.alignment_flag);
  o["is_impossible"] = r.is_impossible;
  if (!language.empty()) o["language"] = language;
  return o;
}

inline std::string dump(const ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

template <typename Record>
std::string write_squad_json(const BasicDataset<Record>& d) {
  ordered_json doc;
  doc["version"] = "v2.0";
  if (!d.language_tag.empty()) doc["language"] = d.language_tag;
  ordered_json data = ordered_json::array();
  // Consecutive records sharing a title (then a context) are grouped, which
  // keeps record order stable across a round trip.
  for (const auto& rec : d.records) {
    const QaRecord& r = base_record(rec);
    if (data.empty() || data.back()["title"] != r.title) {
      data.push_back({{"title", r.title}, {"paragraphs", ordered_json::array()}});
    }
    ordered_json& paragraphs = data.back()["paragraphs"];
    if (paragraphs.empty() || paragraphs.back()["context"] != r.context) {
      paragraphs.push_back({{"context", r.context}, {"qas", ordered_json::array()}});
    }
    ordered_json qa;
    qa["id"] = r.id;
    qa["question"] = r.question;
    qa["answers"] = ordered_json::array();
    if (!r.answer_text.empty() || r.answer_start != -1) {
      qa["answers"].push_back({{"text", r.answer_text}, {"answer_start", r.answer_start}});
    }
    qa["is_impossible"] = r.is_impossible;
    if constexpr (std::is_same_v<Record, AlignedRecord>) {
      qa["answer_end"] = rec.answer_end;
      qa["answer_token_start"] = rec.answer_token_start;
      qa["answer_token_end"] = rec.answer_token_end;
      qa["alignment_score"] = rec.alignment_score;
      qa["alignment_flag"] = to_string(rec.alignment_flag);
    }
    paragraphs.back()["qas"].push_back(std::move(qa));
  }
  doc["data"] = std::move(data);
  return dump(doc) + "\n";
}

}  // namespace detail

inline std::string write_dataset(const AlignedDataset& d,
                                 DatasetFormat format = DatasetFormat::extended_jsonl) {
  if (format == DatasetFormat::squad_json) return detail::write_squad_json(d);
  std::string out;
  for (const auto& a : d.records) {
    out += detail::dump(detail::aligned_to_json(a, d.language_tag));
    out += '\n';
  }
  return out;
}

inline std::string write_dataset(const Dataset& d, DatasetFormat format) {
  if (format == DatasetFormat::squad_json) return detail::write_squad_json(d);
  AlignedDataset aligned;
  aligned.language_tag = d.language_tag;
  aligned.records.reserve(d.size());
  for (const auto& r : d.records) aligned.records.push_back(to_aligned(r));
  return write_dataset(aligned, DatasetFormat::extended_jsonl);
}

// ---------------------------------------------------------------------------
// Splitting

template <typename Record>
struct Split {
  BasicDataset<Record> train;
  BasicDataset<Record> test;
  BasicDataset<Record> valid;
};

namespace detail {

// Only mt19937_64's raw output is fixed by the standard; std::shuffle and the
// distributions are not, so the permutation is drawn by hand.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const uint64_t bound = i;
    const uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    uint64_t x;
    do {
      x = rng();
    } while (x >= limit);
    std::swap(idx[i - 1], idx[x % bound]);
  }
  return idx;
}

}  // namespace detail

// Test and valid get round(fraction * N) records; train takes the remainder.
// Records keep their original relative order inside each part.
template <typename Record>
Split<Record> split_dataset(const BasicDataset<Record>& d, double train_fraction,
                            double test_fraction, double valid_fraction, uint64_t seed) {
  for (double f : {train_fraction, test_fraction, valid_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError("split fractions must lie in [0, 1]");
  }
  const double sum = train_fraction + test_fraction + valid_fraction;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ArgumentError("split fractions must sum to 1 (got " + std::to_string(sum) + ")");
  }
  if (d.empty()) throw ArgumentError("cannot split an empty dataset");

  const std::size_t n = d.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  const auto n_valid =
      static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(n)));
  if (n_test + n_valid > n) throw ArgumentError("test + valid sizes exceed the dataset");

  std::vector<std::size_t> perm = detail::seeded_permutation(n, seed);
  std::vector<int> part(n, 0);  // 0 train, 1 test, 2 valid
  for (std::size_t i = 0; i < n_test; ++i) part[perm[i]] = 1;
  for (std::size_t i = n_test; i < n_test + n_valid; ++i) part[perm[i]] = 2;

  Split<Record> out;
  for (auto* p : {&out.train, &out.test, &out.valid}) p->language_tag = d.language_tag;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = part[i] == 0 ? out.train : part[i] == 1 ? out.test : out.valid;
    dst.records.push_back(d.records[i]);
  }
  return out;
}

}  // namespace qta
