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

// In-process stand-ins for the translation, embedding and NER services.
// They speak the same wire protocol as the real adapters and expose call
// counters and fault injection for tests.

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "qta/service_clients.hpp"
#include "qta/textcore.hpp"
#include "qta/unicode.hpp"

namespace qta {

struct MockServiceOptions {
  // Translation: mapping-table substitution, or echo when unset.
  std::optional<MappingTable> translation_table;
  std::map<std::string, NerTag> ner_lexicon;
  std::size_t embedding_dim = 64;
  // Exact-text overrides; other texts get a hashed character-trigram vector.
  std::map<std::string, std::vector<double>> embedding_table;
};

// Deterministic bag-of-trigrams embedding. Empty text maps to the zero vector.
inline std::vector<double> hashed_trigram_embedding(std::string_view text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  const std::u32string cps = unicode::decode(unicode::fold_case(unicode::collapse_whitespace(text)));
  if (cps.empty() || dim == 0) return v;
  auto add = [&](std::u32string_view gram) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (char c : unicode::encode(gram)) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    v[h % dim] += 1.0;
  };
  if (cps.size() < 3) {
    add(cps);
  } else {
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) add(std::u32string_view(cps).substr(i, 3));
  }
  return v;
}

class MockServiceServer {
 public:
  using json = nlohmann::json;
  // Runs before a /translate request is answered; receives the 0-based call index.
  using Hook = std::function<void(std::size_t)>;

  explicit MockServiceServer(MockServiceOptions options = {}, const std::string& host = "127.0.0.1",
                             int port = 0)
      : options_(std::move(options)), host_(host) {
    install_handlers();
    if (port == 0) {
      port_ = server_.bind_to_any_port(host_);
    } else if (server_.bind_to_port(host_, port)) {
      port_ = port;
    }
    if (port_ <= 0) throw ServiceError("mock server cannot bind " + host_);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  MockServiceServer(const MockServiceServer&) = delete;
  MockServiceServer& operator=(const MockServiceServer&) = delete;

  ~MockServiceServer() { stop(); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  // Blocks until stop() is called from another thread or the process exits.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string endpoint() const { return "http://" + host_ + ":" + std::to_string(port_); }

  std::size_t translate_calls() const noexcept { return translate_calls_; }
  std::size_t embed_calls() const noexcept { return embed_calls_; }
  std::size_t ner_calls() const noexcept { return ner_calls_; }

  // The next n requests (any endpoint) get HTTP `status` with an empty body.
  void fail_next(std::size_t n, int status = 503) {
    std::lock_guard lock(mu_);
    fail_remaining_ = n;
    fail_status_ = status;
  }

  // The next n requests get HTTP 200 with a body that is not valid JSON.
  void malform_next(std::size_t n) {
    std::lock_guard lock(mu_);
    malform_remaining_ = n;
  }

  void set_translate_hook(Hook hook) {
    std::lock_guard lock(mu_);
    translate_hook_ = std::move(hook);
  }

 private:
  // Returns true when a fault was injected into `res`.
  bool inject_fault(httplib::Response& res) {
    std::lock_guard lock(mu_);
    if (fail_remaining_ > 0) {
      --fail_remaining_;
      res.status = fail_status_;
      return true;
    }
    if (malform_remaining_ > 0) {
      --malform_remaining_;
      res.status = 200;
      res.set_content("{not json", "application/json");
      return true;
    }
    return false;
  }

  template <typename F>
  void handle(const httplib::Request& req, httplib::Response& res, F&& answer) {
    if (inject_fault(res)) return;
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      return;
    }
    auto texts = body.find("texts");
    if (texts == body.end() || !texts->is_array()) {
      res.status = 400;
      return;
    }
    std::vector<std::string> in;
    for (const auto& t : *texts) {
      if (!t.is_string()) {
        res.status = 400;
        return;
      }
      in.push_back(t.get<std::string>());
    }
    json reply = answer(in);
    if (auto id = body.find("batch_id"); id != body.end()) reply["batch_id"] = *id;
    res.set_content(reply.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
  }

  void install_handlers() {
    server_.Post("/translate", [this](const httplib::Request& req, httplib::Response& res) {
      const std::size_t call = translate_calls_++;
      Hook hook;
      {
        std::lock_guard lock(mu_);
        hook = translate_hook_;
      }
      if (hook) hook(call);
      handle(req, res, [this](const std::vector<std::string>& texts) {
        std::vector<std::string> out;
        for (const auto& t : texts) {
          out.push_back(options_.translation_table ? apply_mapping(*options_.translation_table, t)
                                                   : t);
        }
        return json{{"translations", out}};
      });
    });
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++embed_calls_;
      handle(req, res, [this](const std::vector<std::string>& texts) {
        json vectors = json::array();
        for (const auto& t : texts) {
          auto it = options_.embedding_table.find(t);
          vectors.push_back(it != options_.embedding_table.end()
                                ? it->second
                                : hashed_trigram_embedding(t, options_.embedding_dim));
        }
        return json{{"vectors", vectors}};
      });
    });
    server_.Post("/ner", [this](const httplib::Request& req, httplib::Response& res) {
      ++ner_calls_;
      handle(req, res, [this](const std::vector<std::string>& texts) {
        NerTaggerSpec spec;
        spec.lexicon = options_.ner_lexicon;
        json tags = json::array();
        for (const auto& seq : ner_tag_batch(spec, texts)) {
          json entries = json::array();
          for (const auto& [token, tag] : seq) entries.push_back({token, to_string(tag)});
          tags.push_back(entries);
        }
        return json{{"tags", tags}};
      });
    });
  }

  MockServiceOptions options_;
  std::string host_;
  int port_ = -1;
  httplib::Server server_;
  std::thread thread_;

  std::atomic<std::size_t> translate_calls_{0};
  std::atomic<std::size_t> embed_calls_{0};
  std::atomic<std::size_t> ner_calls_{0};

  std::mutex mu_;
  std::size_t fail_remaining_ = 0;
  int fail_status_ = 503;
  std::size_t malform_remaining_ = 0;
  Hook translate_hook_;
};

}  // namespace qta
