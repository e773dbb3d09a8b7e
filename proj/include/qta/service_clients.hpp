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

// Clients for the three external model services: machine translation,
// sentence embeddings and NER tagging. All speak JSON over HTTP POST:
//
//   POST /translate  {"source_lang", "target_lang", "texts": [...]} -> {"translations": [...]}
//   POST /embed      {"texts": [...]}                               -> {"vectors": [[...], ...]}
//   POST /ner        {"texts": [...]}                               -> {"tags": [[[tok, tag], ...], ...]}
//
// Every request also carries a "batch_id" that stays fixed across retries; a
// response echoing a different batch_id is rejected.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "qta/errors.hpp"
#include "qta/textcore.hpp"
#include "qta/unicode.hpp"

namespace qta {

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
};

class JsonServiceClient {
 public:
  using json = nlohmann::json;
  using Validator = std::function<void(const json&)>;

  explicit JsonServiceClient(std::string endpoint, RetryPolicy retry = {},
                             std::size_t max_in_flight = 4,
                             std::chrono::seconds timeout = std::chrono::seconds(60))
      : retry_(retry), timeout_(timeout), shared_(std::make_shared<Shared>(max_in_flight)) {
    if (max_in_flight == 0) throw ArgumentError("max_in_flight must be >= 1");
    if (retry_.max_retries < 0) throw ArgumentError("max_retries must be >= 0");
    while (!endpoint.empty() && endpoint.back() == '/') endpoint.pop_back();
    const auto scheme = endpoint.find("://");
    const auto path_at = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_at == std::string::npos) {
      host_ = endpoint;
    } else {
      host_ = endpoint.substr(0, path_at);
      base_path_ = endpoint.substr(path_at);
    }
    if (host_.empty()) throw ArgumentError("empty service endpoint");
  }

  const std::string& endpoint() const noexcept { return host_; }

  // POSTs `body` to `path`, retrying non-2xx answers, malformed bodies and
  // transport failures with exponential backoff. `validate` throws
  // ProtocolError for bodies that parse as JSON but break the protocol.
  json post(const std::string& path, json body, const Validator& validate) const {
    const std::string batch_id = std::to_string(shared_->next_batch_id.fetch_add(1));
    body["batch_id"] = batch_id;
    const std::string payload = body.dump(-1, ' ', false, json::error_handler_t::replace);

    enum class Failure { transport, status, protocol } failure = Failure::transport;
    std::string last_error;
    auto backoff = retry_.initial_backoff;
    for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Result res = send(path, payload);
      if (!res) {
        failure = Failure::transport;
        last_error = "cannot reach " + host_ + path + ": " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        failure = Failure::status;
        last_error = host_ + path + " answered HTTP " + std::to_string(res->status);
        continue;
      }
      try {
        json reply = json::parse(res->body);
        if (!reply.is_object()) throw ProtocolError("response is not a JSON object");
        if (auto it = reply.find("batch_id"); it != reply.end() && *it != batch_id) {
          throw ProtocolError("response batch_id does not match request");
        }
        validate(reply);
        return reply;
      } catch (const json::exception& e) {
        failure = Failure::protocol;
        last_error = host_ + path + " sent a malformed body: " + e.what();
      } catch (const ProtocolError& e) {
        failure = Failure::protocol;
        last_error = host_ + path + ": " + e.what();
      }
    }
    const std::string what =
        last_error + " (after " + std::to_string(retry_.max_retries + 1) + " attempts)";
    switch (failure) {
      case Failure::transport: throw TransportError(what);
      case Failure::protocol: throw ProtocolError(what);
      case Failure::status: break;
    }
    throw ServiceError(what);
  }

 private:
  struct Shared {
    explicit Shared(std::size_t slots) : in_flight(static_cast<std::ptrdiff_t>(slots)) {}
    std::counting_semaphore<> in_flight;
    std::atomic<uint64_t> next_batch_id{0};
  };

  httplib::Result send(const std::string& path, const std::string& payload) const {
    shared_->in_flight.acquire();
    struct Release {
      Shared* s;
      ~Release() { s->in_flight.release(); }
    } release{shared_.get()};
    httplib::Client cli(host_);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(timeout_);
    return cli.Post(base_path_ + path, payload, "application/json");
  }

  std::string host_;
  std::string base_path_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
  std::shared_ptr<Shared> shared_;
};

namespace detail {

inline const nlohmann::json& array_field(const nlohmann::json& reply, const char* key,
                                         std::size_t expected_size) {
  auto it = reply.find(key);
  if (it == reply.end() || !it->is_array()) {
    throw ProtocolError(std::string("missing array '") + key + "'");
  }
  if (it->size() != expected_size) {
    throw ProtocolError(std::string("'") + key + "' has " + std::to_string(it->size()) +
                        " entries, expected " + std::to_string(expected_size));
  }
  return *it;
}

template <typename F>
void for_each_batch(std::size_t n, std::size_t batch_size, F&& f) {
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    f(begin, std::min(n, begin + batch_size));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Translation

enum class TranslationBackendKind { identity, mapping, remote };

inline std::string_view to_string(TranslationBackendKind k) {
  switch (k) {
    case TranslationBackendKind::identity: return "identity";
    case TranslationBackendKind::mapping: return "mapping";
    case TranslationBackendKind::remote: return "remote";
  }
  return "?";
}

inline TranslationBackendKind parse_backend_kind(std::string_view s) {
  for (auto k : {TranslationBackendKind::identity, TranslationBackendKind::mapping,
                 TranslationBackendKind::remote}) {
    if (to_string(k) == s) return k;
  }
  throw ArgumentError("unknown translation backend '" + std::string(s) + "'");
}

using MappingTable = std::map<std::string, std::string>;

struct TranslationBackendSpec {
  TranslationBackendKind kind = TranslationBackendKind::identity;
  std::optional<MappingTable> mapping_table;
  std::optional<std::string> endpoint;
  std::string source_lang = "en";
  std::string target_lang = "hi";
  std::size_t batch_size = 16;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
  std::size_t max_in_flight = 4;

  void validate() const {
    if (kind == TranslationBackendKind::mapping && !mapping_table) {
      throw ArgumentError("mapping backend requires a mapping table");
    }
    if (kind == TranslationBackendKind::remote && !endpoint) {
      throw ArgumentError("remote backend requires an endpoint");
    }
    if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
    if (max_retries < 0) throw ArgumentError("max_retries must be >= 0");
  }
};

// Replaces whole tokens found in the table; whitespace and unmatched tokens
// pass through. A token with edge punctuation ("fox.") matches on its core
// and keeps the punctuation.
inline std::string apply_mapping(const MappingTable& table, std::string_view text) {
  const TokenSequence seq = tokenize(text);
  std::string out;
  std::size_t cursor = 0;
  for (const Token& t : seq.tokens()) {
    out += seq.slice(cursor, t.char_start);
    cursor = t.char_end;
    if (auto it = table.find(t.raw); it != table.end()) {
      out += it->second;
      continue;
    }
    const std::u32string cps = unicode::decode(t.raw);
    const std::u32string_view core = unicode::strip_punctuation(cps);
    if (!core.empty() && core.size() != cps.size()) {
      if (auto it = table.find(unicode::encode(core)); it != table.end()) {
        const std::size_t lead = static_cast<std::size_t>(core.data() - cps.data());
        out += unicode::encode(std::u32string_view(cps).substr(0, lead));
        out += it->second;
        out += unicode::encode(std::u32string_view(cps).substr(lead + core.size()));
        continue;
      }
    }
    out += t.raw;
  }
  out += seq.slice(cursor, seq.codepoint_count());
  return out;
}

class Translator {
 public:
  explicit Translator(TranslationBackendSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.kind == TranslationBackendKind::remote) {
      client_.emplace(*spec_.endpoint, RetryPolicy{spec_.max_retries, spec_.initial_backoff},
                      spec_.max_in_flight);
    }
  }

  const TranslationBackendSpec& spec() const noexcept { return spec_; }

  // Output i is the translation of input i. Remote batches hold at most
  // batch_size texts. A failed remote batch raises TranslationError listing
  // the untranslated indices; an unreachable backend stops at the first batch.
  std::vector<std::string> translate_batch(const std::vector<std::string>& texts) const {
    if (texts.empty()) throw ArgumentError("translate_batch needs at least one text");
    switch (spec_.kind) {
      case TranslationBackendKind::identity: return texts;
      case TranslationBackendKind::mapping: {
        std::vector<std::string> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(apply_mapping(*spec_.mapping_table, t));
        return out;
      }
      case TranslationBackendKind::remote: break;
    }
    return translate_remote(texts);
  }

 private:
  std::vector<std::string> translate_remote(const std::vector<std::string>& texts) const {
    std::vector<std::string> out(texts.size());
    std::vector<std::size_t> failed;
    std::string first_error;
    bool unreachable = false;
    detail::for_each_batch(texts.size(), spec_.batch_size, [&](std::size_t begin, std::size_t end) {
      if (unreachable) {
        for (std::size_t i = begin; i < end; ++i) failed.push_back(i);
        return;
      }
      nlohmann::json body;
      body["source_lang"] = spec_.source_lang;
      body["target_lang"] = spec_.target_lang;
      body["texts"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                               texts.begin() + static_cast<std::ptrdiff_t>(end));
      const std::size_t n = end - begin;
      try {
        const auto reply = client_->post("/translate", std::move(body), [n](const nlohmann::json& r) {
          for (const auto& t : detail::array_field(r, "translations", n)) {
            if (!t.is_string()) throw ProtocolError("translation entry is not a string");
          }
        });
        const auto& translations = reply["translations"];
        for (std::size_t i = 0; i < n; ++i) out[begin + i] = translations[i].get<std::string>();
      } catch (const ServiceError& e) {
        if (first_error.empty()) first_error = e.what();
        unreachable = dynamic_cast<const TransportError*>(&e) != nullptr;
        for (std::size_t i = begin; i < end; ++i) failed.push_back(i);
      }
    });
    if (!failed.empty()) {
      throw TranslationError("translation failed for " + std::to_string(failed.size()) + " of " +
                                 std::to_string(texts.size()) + " texts: " + first_error,
                             std::move(failed), unreachable);
    }
    return out;
  }

  TranslationBackendSpec spec_;
  std::optional<JsonServiceClient> client_;
};

inline std::vector<std::string> translate_batch(const TranslationBackendSpec& spec,
                                                const std::vector<std::string>& texts) {
  return Translator(spec).translate_batch(texts);
}

// ---------------------------------------------------------------------------
// Embeddings

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("cosine of vectors with different dimensions");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

class EmbeddingClient {
 public:
  explicit EmbeddingClient(std::string endpoint, RetryPolicy retry = {},
                           std::size_t batch_size = 64, std::size_t max_in_flight = 4)
      : client_(std::move(endpoint), retry, max_in_flight), batch_size_(batch_size) {
    if (batch_size_ == 0) throw ArgumentError("batch_size must be >= 1");
  }

  std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) const {
    if (texts.empty()) throw ArgumentError("embed_batch needs at least one text");
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    std::optional<std::size_t> dim;
    detail::for_each_batch(texts.size(), batch_size_, [&](std::size_t begin, std::size_t end) {
      nlohmann::json body;
      body["texts"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                               texts.begin() + static_cast<std::ptrdiff_t>(end));
      const std::size_t n = end - begin;
      const auto reply = client_.post("/embed", std::move(body), [n, &dim](const nlohmann::json& r) {
        std::optional<std::size_t> batch_dim = dim;
        for (const auto& v : detail::array_field(r, "vectors", n)) {
          if (!v.is_array()) throw ProtocolError("embedding is not an array");
          for (const auto& x : v) {
            if (!x.is_number()) throw ProtocolError("embedding component is not a number");
          }
          if (batch_dim && *batch_dim != v.size()) {
            throw ProtocolError("embedding dimensions differ within the batch");
          }
          batch_dim = v.size();
        }
      });
      for (const auto& v : reply["vectors"]) {
        out.push_back(v.get<std::vector<double>>());
        dim = out.back().size();
      }
    });
    return out;
  }

 private:
  JsonServiceClient client_;
  std::size_t batch_size_;
};

inline std::vector<std::vector<double>> embed_batch(const std::string& endpoint,
                                                    const std::vector<std::string>& texts,
                                                    RetryPolicy retry = {}) {
  return EmbeddingClient(endpoint, retry).embed_batch(texts);
}

// Cosine of service embeddings, clamped to [0, 1]. Empty-vs-empty is 1 and
// empty-vs-nonempty is 0, without asking the service.
class EmbeddingScorer final : public Scorer {
 public:
  explicit EmbeddingScorer(std::string endpoint, RetryPolicy retry = {})
      : client_(std::move(endpoint), retry) {}

  std::vector<double> score_many(std::string_view target,
                                 std::span<const std::string> candidates) override {
    std::vector<double> out(candidates.size(), 0.0);
    const bool target_empty = unicode::collapse_whitespace(target).empty();
    std::vector<std::string> texts;
    std::vector<std::size_t> slots;
    if (!target_empty) texts.emplace_back(target);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const bool empty = unicode::collapse_whitespace(candidates[i]).empty();
      if (empty || target_empty) {
        out[i] = empty && target_empty ? 1.0 : 0.0;
      } else {
        texts.push_back(candidates[i]);
        slots.push_back(i);
      }
    }
    if (slots.empty()) return out;
    std::vector<std::vector<double>> vectors;
    try {
      vectors = client_.embed_batch(texts);
    } catch (const ServiceError& e) {
      throw ScorerUnavailable(std::string("embedding scorer unavailable: ") + e.what());
    }
    for (std::size_t k = 0; k < slots.size(); ++k) {
      out[slots[k]] = std::clamp(cosine(vectors[0], vectors[k + 1]), 0.0, 1.0);
    }
    return out;
  }

 private:
  EmbeddingClient client_;
};

// ---------------------------------------------------------------------------
// NER

enum class NerTag { Date, Measure, Organization, Location, Person, Designation, Time, O };

inline constexpr std::array<NerTag, 7> kEntityTags = {
    NerTag::Date,     NerTag::Measure,     NerTag::Organization, NerTag::Location,
    NerTag::Person,   NerTag::Designation, NerTag::Time};

inline std::string_view to_string(NerTag t) {
  switch (t) {
    case NerTag::Date: return "Date";
    case NerTag::Measure: return "Measure";
    case NerTag::Organization: return "Organization";
    case NerTag::Location: return "Location";
    case NerTag::Person: return "Person";
    case NerTag::Designation: return "Designation";
    case NerTag::Time: return "Time";
    case NerTag::O: return "O";
  }
  return "?";
}

inline std::optional<NerTag> parse_ner_tag(std::string_view s) {
  for (auto t : kEntityTags) {
    if (to_string(t) == s) return t;
  }
  if (s == "O") return NerTag::O;
  return std::nullopt;
}

enum class NerTaggerKind { mock, remote };

struct NerTaggerSpec {
  NerTaggerKind kind = NerTaggerKind::mock;
  // Mock lookup; keys are matched against normalized tokens.
  std::map<std::string, NerTag> lexicon;
  std::optional<std::string> endpoint;
  RetryPolicy retry;
  std::size_t batch_size = 32;

  void validate() const {
    if (kind == NerTaggerKind::remote && !endpoint) {
      throw ArgumentError("remote NER tagger requires an endpoint");
    }
    if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
  }
};

using TaggedToken = std::pair<std::string, NerTag>;

inline std::vector<std::vector<TaggedToken>> ner_tag_batch(const NerTaggerSpec& spec,
                                                           const std::vector<std::string>& texts) {
  spec.validate();
  std::vector<std::vector<TaggedToken>> out;
  out.reserve(texts.size());
  if (spec.kind == NerTaggerKind::mock) {
    std::map<std::string, NerTag> lookup;
    for (const auto& [key, tag] : spec.lexicon) {
      lookup[normalize_token(unicode::decode(key))] = tag;
    }
    for (const auto& text : texts) {
      std::vector<TaggedToken> tagged;
      const TokenSequence seq = tokenize(text);
      for (const Token& t : seq.tokens()) {
        auto it = lookup.find(t.normalized);
        tagged.emplace_back(t.raw, it == lookup.end() ? NerTag::O : it->second);
      }
      out.push_back(std::move(tagged));
    }
    return out;
  }

  JsonServiceClient client(*spec.endpoint, spec.retry);
  detail::for_each_batch(texts.size(), spec.batch_size, [&](std::size_t begin, std::size_t end) {
    nlohmann::json body;
    body["texts"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                             texts.begin() + static_cast<std::ptrdiff_t>(end));
    const std::size_t n = end - begin;
    const auto reply = client.post("/ner", std::move(body), [n](const nlohmann::json& r) {
      for (const auto& seq : detail::array_field(r, "tags", n)) {
        if (!seq.is_array()) throw ProtocolError("tag sequence is not an array");
        for (const auto& pair : seq) {
          if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string()) {
            throw ProtocolError("tag entry must be [token, tag]");
          }
          if (!parse_ner_tag(pair[1].get<std::string>())) {
            throw ProtocolError("tag '" + pair[1].get<std::string>() + "' is outside the tag set");
          }
        }
      }
    });
    for (const auto& seq : reply["tags"]) {
      std::vector<TaggedToken> tagged;
      for (const auto& pair : seq) {
        tagged.emplace_back(pair[0].get<std::string>(), *parse_ner_tag(pair[1].get<std::string>()));
      }
      out.push_back(std::move(tagged));
    }
  });
  return out;
}

}  // namespace qta
