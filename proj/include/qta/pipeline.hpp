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

// End-to-end dataset construction: translate each record, align the
// translated answer inside the translated context, and emit extended records.
//
// Records are processed in chunks of `checkpoint_every`. Inside a chunk up to
// `parallelism` workers translate and align records independently; results
// are committed in input order, so output never depends on scheduling. After
// every chunk the committed prefix is written to the checkpoint file:
//
//   line 1   {"qta_checkpoint": 1, "dataset_hash", "config_hash", "processed",
//             "total", "complete", "report": {...}}
//   line 2.. one extended-JSONL record per kept record
//
// The file is replaced atomically (temp file, then rename).

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "qta/aligner.hpp"
#include "qta/errors.hpp"
#include "qta/scoring.hpp"
#include "qta/service_clients.hpp"
#include "qta/squad_io.hpp"

namespace qta {

enum class FailurePolicy { flag_and_keep, drop };

inline std::string_view to_string(FailurePolicy p) {
  return p == FailurePolicy::drop ? "drop" : "flag_and_keep";
}

inline FailurePolicy parse_failure_policy(std::string_view s) {
  if (s == "flag" || s == "flag_and_keep") return FailurePolicy::flag_and_keep;
  if (s == "drop") return FailurePolicy::drop;
  throw ArgumentError("unknown failure policy '" + std::string(s) + "'");
}

struct PipelineConfig {
  TranslationBackendSpec translation;
  AlignerConfig aligner;
  FailurePolicy on_failure = FailurePolicy::flag_and_keep;
  std::size_t checkpoint_every = 100;
  std::size_t parallelism = 1;

  void validate() const {
    translation.validate();
    aligner.validate();
    if (checkpoint_every < 1) throw ArgumentError("checkpoint_every must be >= 1");
    if (parallelism < 1) throw ArgumentError("parallelism must be >= 1");
  }
};

struct BuildReport {
  std::size_t total = 0;
  std::size_t ok = 0;
  std::size_t low_confidence = 0;
  std::size_t failed = 0;
  std::size_t passthrough_unanswerable = 0;
  // Mean score over ok and low_confidence records; 0 when there are none.
  double mean_alignment_score = 0.0;

  bool operator==(const BuildReport&) const = default;

  void count(AlignmentFlag f) {
    ++total;
    switch (f) {
      case AlignmentFlag::ok: ++ok; break;
      case AlignmentFlag::low_confidence: ++low_confidence; break;
      case AlignmentFlag::failed: ++failed; break;
      case AlignmentFlag::passthrough_unanswerable: ++passthrough_unanswerable; break;
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["total"] = total;
    j["ok"] = ok;
    j["low_confidence"] = low_confidence;
    j["failed"] = failed;
    j["passthrough_unanswerable"] = passthrough_unanswerable;
    j["mean_alignment_score"] = mean_alignment_score;
    return j;
  }

  static BuildReport from_json(const nlohmann::json& j) {
    BuildReport r;
    r.total = j.at("total").get<std::size_t>();
    r.ok = j.at("ok").get<std::size_t>();
    r.low_confidence = j.at("low_confidence").get<std::size_t>();
    r.failed = j.at("failed").get<std::size_t>();
    r.passthrough_unanswerable = j.at("passthrough_unanswerable").get<std::size_t>();
    r.mean_alignment_score = j.at("mean_alignment_score").get<double>();
    return r;
  }
};

struct BuildOptions {
  std::optional<std::filesystem::path> checkpoint;
  // One progress line per committed chunk.
  std::ostream* progress = nullptr;
  // Checked between records; a stopped build commits what finished and returns.
  std::stop_token stop;
};

struct BuildResult {
  AlignedDataset dataset;
  BuildReport report;
  bool complete = false;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

inline std::string dataset_fingerprint(const Dataset& d) {
  return sha256_hex(write_dataset(d, DatasetFormat::extended_jsonl));
}

// Covers every setting that changes the output. Transport details (endpoint,
// batch size, retries) and scheduling (parallelism, checkpoint_every) do not.
inline std::string config_fingerprint(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["translation"]["kind"] = to_string(cfg.translation.kind);
  j["translation"]["source_lang"] = cfg.translation.source_lang;
  j["translation"]["target_lang"] = cfg.translation.target_lang;
  if (cfg.translation.mapping_table) j["translation"]["mapping_table"] = *cfg.translation.mapping_table;
  j["aligner"]["scorer"] = to_string(cfg.aligner.scorer.kind);
  j["aligner"]["ngram_n"] = cfg.aligner.scorer.ngram_n;
  j["aligner"]["threshold"] = cfg.aligner.low_confidence_threshold;
  j["on_failure"] = to_string(cfg.on_failure);
  return sha256_hex(j.dump());
}

class DatasetBuilder {
 public:
  explicit DatasetBuilder(PipelineConfig cfg)
      : cfg_((cfg.validate(), std::move(cfg))),
        translator_(cfg_.translation),
        scorer_(make_scorer(cfg_.aligner.scorer,
                            RetryPolicy{cfg_.translation.max_retries,
                                        cfg_.translation.initial_backoff})) {}

  const PipelineConfig& config() const noexcept { return cfg_; }

  // nullopt when the record failed and the policy is drop. Throws
  // TranslationError when the backend is unreachable.
  std::optional<AlignedRecord> build_record(const QaRecord& r) const {
    Outcome o = process(r);
    if (!o.keep) return std::nullopt;
    return std::move(o.record);
  }

  BuildResult build(const Dataset& d, const BuildOptions& opts = {}) const {
    State state;
    state.dataset_hash = dataset_fingerprint(d);
    state.config_hash = config_fingerprint(cfg_);
    state.out.language_tag = output_language(d);
    return run(d, std::move(state), opts);
  }

  // Continues from `checkpoint`, which must have been written for the same
  // dataset and config. Already committed records are not re-translated.
  BuildResult resume(const std::filesystem::path& checkpoint, const Dataset& d,
                     BuildOptions opts = {}) const {
    State state = load_checkpoint(checkpoint);
    if (state.dataset_hash != dataset_fingerprint(d)) {
      throw CheckpointError("checkpoint " + checkpoint.string() + " belongs to a different dataset");
    }
    if (state.config_hash != config_fingerprint(cfg_)) {
      throw CheckpointError("checkpoint " + checkpoint.string() +
                            " was written with a different configuration");
    }
    if (state.processed > d.size()) throw CheckpointError("checkpoint is longer than the dataset");
    state.out.language_tag = output_language(d);
    if (!opts.checkpoint) opts.checkpoint = checkpoint;
    return run(d, std::move(state), opts);
  }

 private:
  struct Outcome {
    AlignedRecord record;
    bool keep = true;
  };

  struct State {
    std::string dataset_hash;
    std::string config_hash;
    std::size_t processed = 0;
    BuildReport report;
    AlignedDataset out;
  };

  std::string output_language(const Dataset& d) const {
    return cfg_.translation.kind == TranslationBackendKind::identity ? d.language_tag
                                                                     : cfg_.translation.target_lang;
  }

  Outcome failed(const QaRecord& source) const {
    Outcome o;
    o.record.record = source;
    o.record.record.answer_start = 0;
    o.record.answer_end = 0;
    o.record.answer_token_start = 0;
    o.record.answer_token_end = 0;
    o.record.alignment_score = 0.0;
    o.record.alignment_flag = AlignmentFlag::failed;
    o.keep = cfg_.on_failure == FailurePolicy::flag_and_keep;
    return o;
  }

  Outcome process(const QaRecord& r) const {
    std::vector<std::string> texts{r.context, r.question};
    if (!r.is_impossible) texts.push_back(r.answer_text);
    std::vector<std::string> translated;
    try {
      translated = translator_.translate_batch(texts);
    } catch (const TranslationError& e) {
      if (e.unreachable()) throw;
      return failed(r);
    }

    QaRecord t = r;
    t.context = std::move(translated[0]);
    t.question = std::move(translated[1]);
    if (r.is_impossible) {
      Outcome o;
      t.answer_text.clear();
      t.answer_start = -1;
      o.record.record = std::move(t);
      o.record.alignment_flag = AlignmentFlag::passthrough_unanswerable;
      return o;
    }
    t.answer_text = std::move(translated[2]);

    const AlignmentResult a =
        align_answer(t.context, t.answer_text, cfg_.aligner.low_confidence_threshold, *scorer_);
    if (a.flag == AlignmentFlag::failed) return failed(t);
    Outcome o;
    t.answer_text = a.replaced_answer;
    t.answer_start = static_cast<int64_t>(a.char_start);
    o.record.record = std::move(t);
    o.record.answer_end = static_cast<int64_t>(a.char_end);
    o.record.answer_token_start = static_cast<int64_t>(a.token_start);
    o.record.answer_token_end = static_cast<int64_t>(a.token_end);
    o.record.alignment_score = a.score;
    o.record.alignment_flag = a.flag;
    return o;
  }

  static void finalize_mean(State& s) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& a : s.out.records) {
      if (a.alignment_flag == AlignmentFlag::ok || a.alignment_flag == AlignmentFlag::low_confidence) {
        sum += a.alignment_score;
        ++n;
      }
    }
    s.report.mean_alignment_score = n == 0 ? 0.0 : sum / static_cast<double>(n);
  }

  static void write_checkpoint(const std::filesystem::path& path, const State& s, std::size_t total) {
    nlohmann::ordered_json header;
    header["qta_checkpoint"] = 1;
    header["dataset_hash"] = s.dataset_hash;
    header["config_hash"] = s.config_hash;
    header["processed"] = s.processed;
    header["total"] = total;
    header["complete"] = s.processed == total;
    header["report"] = s.report.to_json();
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw Error("cannot write checkpoint " + tmp.string());
      f << header.dump() << '\n' << write_dataset(s.out, DatasetFormat::extended_jsonl);
      f.flush();
      if (!f) throw Error("failed writing checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  static State load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
    std::string header_line;
    std::getline(f, header_line);
    std::stringstream rest;
    rest << f.rdbuf();
    State s;
    try {
      const auto header = nlohmann::json::parse(header_line);
      if (header.value("qta_checkpoint", 0) != 1) throw CheckpointError("not a checkpoint file");
      s.dataset_hash = header.at("dataset_hash").get<std::string>();
      s.config_hash = header.at("config_hash").get<std::string>();
      s.processed = header.at("processed").get<std::size_t>();
      s.report = BuildReport::from_json(header.at("report"));
      s.out = parse_aligned_dataset(rest.str());
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
    } catch (const ParseError& e) {
      throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    if (s.report.total != s.processed) throw CheckpointError("checkpoint report does not match");
    return s;
  }

  BuildResult run(const Dataset& d, State state, const BuildOptions& opts) const {
    const std::size_t n = d.size();
    std::exception_ptr error;
    while (state.processed < n && !opts.stop.stop_requested() && !error) {
      const std::size_t begin = state.processed;
      const std::size_t end = std::min(n, begin + cfg_.checkpoint_every);
      std::vector<std::optional<Outcome>> slots(end - begin);
      std::vector<std::exception_ptr> errors(end - begin);
      std::atomic<std::size_t> next{begin};
      std::atomic<bool> abort{false};

      auto work = [&] {
        while (!abort && !opts.stop.stop_requested()) {
          const std::size_t i = next++;
          if (i >= end) return;
          try {
            slots[i - begin] = process(d.records[i]);
          } catch (...) {
            errors[i - begin] = std::current_exception();
            abort = true;
          }
        }
      };
      {
        const std::size_t workers = std::min(cfg_.parallelism, end - begin);
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
      }

      for (std::size_t i = 0; i < slots.size() && slots[i]; ++i) {
        state.report.count(slots[i]->record.alignment_flag);
        if (slots[i]->keep) state.out.records.push_back(std::move(slots[i]->record));
        ++state.processed;
      }
      for (auto& e : errors) {
        if (e) {
          error = e;
          break;
        }
      }
      finalize_mean(state);
      if (opts.checkpoint) write_checkpoint(*opts.checkpoint, state, n);
      if (opts.progress) {
        *opts.progress << "qta: " << state.processed << "/" << n << " records (ok "
                       << state.report.ok << ", low_confidence " << state.report.low_confidence
                       << ", failed " << state.report.failed << ", passthrough "
                       << state.report.passthrough_unanswerable << ")\n";
      }
    }
    if (error) std::rethrow_exception(error);
    finalize_mean(state);
    if (opts.checkpoint && state.processed == n && n == 0) write_checkpoint(*opts.checkpoint, state, n);
    return BuildResult{std::move(state.out), state.report, state.processed == n};
  }

  PipelineConfig cfg_;
  Translator translator_;
  std::unique_ptr<Scorer> scorer_;
};

inline std::optional<AlignedRecord> build_record(const QaRecord& r, const PipelineConfig& cfg) {
  return DatasetBuilder(cfg).build_record(r);
}

inline BuildResult build_dataset(const Dataset& d, const PipelineConfig& cfg,
                                 const BuildOptions& opts = {}) {
  return DatasetBuilder(cfg).build(d, opts);
}

inline BuildResult resume(const std::filesystem::path& checkpoint, const Dataset& d,
                          const PipelineConfig& cfg, const BuildOptions& opts = {}) {
  return DatasetBuilder(cfg).resume(checkpoint, d, opts);
}

}  // namespace qta
