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

// Command-line front end: align, stats, eval, validate, split, serve-mock.
//
// Exit codes: 0 success, 1 data or validation error, 2 usage error,
// 3 backend/service error. Machine-readable output goes to stdout,
// diagnostics and progress to stderr.
//
// Settings come from a flat JSON config file (--config, or the QTA_CONFIG
// environment variable) whose keys mirror the long flag names with '_' for
// '-'. Flags given on the command line override the file.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qta/aligner.hpp"
#include "qta/analytics.hpp"
#include "qta/errors.hpp"
#include "qta/metrics.hpp"
#include "qta/mock_services.hpp"
#include "qta/pipeline.hpp"
#include "qta/service_clients.hpp"
#include "qta/squad_io.hpp"

namespace qta::cli {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Settings {
  std::vector<std::string> input;
  std::string out;
  std::string format = "auto";
  std::string backend = "identity";
  std::string mapping_file;
  std::string endpoint;
  std::string scorer = "char_ngram_cosine";
  int ngram_n = 3;
  double threshold = 0.35;
  std::string on_failure = "flag";
  std::string checkpoint;
  std::size_t checkpoint_every = 100;
  std::size_t parallelism = 1;
  bool restart = false;
  uint64_t seed = 0;
  std::optional<double> train;
  std::optional<double> test;
  std::optional<double> valid;
  std::string predictions;
  std::string source_lang = "en";
  std::string target_lang = "hi";
  std::size_t batch_size = 16;
  int max_retries = 3;
  std::string ner = "none";
  std::string ner_lexicon;
  std::string ner_count = "token";
  std::string model_name = "predictions";
  bool table = false;
  bool per_record = false;
  std::string host = "127.0.0.1";
  int port = 8080;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw UsageError("cannot read " + p.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + p.string());
  f << content;
  if (!f) throw Error("failed writing " + p.string());
}

inline DatasetFormat resolve_format(const std::string& format, const std::string& path) {
  if (format != "auto") return parse_dataset_format(format);
  return std::filesystem::path(path).extension() == ".jsonl" ? DatasetFormat::extended_jsonl
                                                             : DatasetFormat::squad_json;
}

inline std::string extension(DatasetFormat f) {
  return f == DatasetFormat::extended_jsonl ? ".jsonl" : ".json";
}

inline const std::string& single_input(const Settings& s) {
  if (s.input.size() != 1) throw UsageError("exactly one --input is required");
  return s.input.front();
}

inline Dataset load_dataset(const Settings& s, const std::string& path) {
  return parse_dataset(read_file(path), resolve_format(s.format, path));
}

template <typename T>
T get_as(const nlohmann::json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

// Applies config-file values; unknown keys are rejected.
inline void apply_config(Settings& s, const nlohmann::json& cfg) {
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, v] : cfg.items()) {
    if (key == "input") {
      s.input = v.is_array() ? get_as<std::vector<std::string>>(v, key)
                             : std::vector<std::string>{get_as<std::string>(v, key)};
    } else if (key == "out") s.out = get_as<std::string>(v, key);
    else if (key == "format") s.format = get_as<std::string>(v, key);
    else if (key == "backend") s.backend = get_as<std::string>(v, key);
    else if (key == "mapping_file") s.mapping_file = get_as<std::string>(v, key);
    else if (key == "endpoint") s.endpoint = get_as<std::string>(v, key);
    else if (key == "scorer") s.scorer = get_as<std::string>(v, key);
    else if (key == "ngram_n") s.ngram_n = get_as<int>(v, key);
    else if (key == "threshold") s.threshold = get_as<double>(v, key);
    else if (key == "on_failure") s.on_failure = get_as<std::string>(v, key);
    else if (key == "checkpoint") s.checkpoint = get_as<std::string>(v, key);
    else if (key == "checkpoint_every") s.checkpoint_every = get_as<std::size_t>(v, key);
    else if (key == "parallelism") s.parallelism = get_as<std::size_t>(v, key);
    else if (key == "seed") s.seed = get_as<uint64_t>(v, key);
    else if (key == "train") s.train = get_as<double>(v, key);
    else if (key == "test") s.test = get_as<double>(v, key);
    else if (key == "valid") s.valid = get_as<double>(v, key);
    else if (key == "predictions") s.predictions = get_as<std::string>(v, key);
    else if (key == "source_lang") s.source_lang = get_as<std::string>(v, key);
    else if (key == "target_lang") s.target_lang = get_as<std::string>(v, key);
    else if (key == "batch_size") s.batch_size = get_as<std::size_t>(v, key);
    else if (key == "max_retries") s.max_retries = get_as<int>(v, key);
    else if (key == "ner") s.ner = get_as<std::string>(v, key);
    else if (key == "ner_lexicon") s.ner_lexicon = get_as<std::string>(v, key);
    else if (key == "ner_count") s.ner_count = get_as<std::string>(v, key);
    else if (key == "model_name") s.model_name = get_as<std::string>(v, key);
    else throw UsageError("unknown config key '" + key + "'");
  }
}

inline std::optional<std::string> config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  if (const char* env = std::getenv("QTA_CONFIG"); env && *env) return std::string(env);
  return std::nullopt;
}

inline MappingTable load_mapping(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path)).get<MappingTable>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, std::string("mapping file must be a JSON object of strings: ") + e.what());
  }
}

inline std::map<std::string, NerTag> load_lexicon(const std::string& path) {
  std::map<std::string, std::string> raw;
  try {
    raw = nlohmann::json::parse(read_file(path)).get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, std::string("NER lexicon must be a JSON object of strings: ") + e.what());
  }
  std::map<std::string, NerTag> out;
  for (const auto& [token, tag] : raw) {
    auto t = parse_ner_tag(tag);
    if (!t) throw ParseError(path, "unknown NER tag '" + tag + "'");
    out[token] = *t;
  }
  return out;
}

inline PipelineConfig pipeline_config(const Settings& s) {
  PipelineConfig cfg;
  cfg.translation.kind = parse_backend_kind(s.backend);
  if (cfg.translation.kind == TranslationBackendKind::mapping) {
    if (s.mapping_file.empty()) throw UsageError("--backend mapping needs --mapping-file");
    cfg.translation.mapping_table = load_mapping(s.mapping_file);
  }
  if (!s.endpoint.empty()) cfg.translation.endpoint = s.endpoint;
  cfg.translation.source_lang = s.source_lang;
  cfg.translation.target_lang = s.target_lang;
  cfg.translation.batch_size = s.batch_size;
  cfg.translation.max_retries = s.max_retries;
  cfg.aligner.scorer.kind = parse_scorer_kind(s.scorer);
  cfg.aligner.scorer.ngram_n = s.ngram_n;
  if (!s.endpoint.empty()) cfg.aligner.scorer.endpoint = s.endpoint;
  cfg.aligner.low_confidence_threshold = s.threshold;
  cfg.on_failure = parse_failure_policy(s.on_failure);
  cfg.checkpoint_every = s.checkpoint_every;
  cfg.parallelism = s.parallelism;
  cfg.validate();
  return cfg;
}

inline NerTaggerSpec ner_spec(const Settings& s) {
  NerTaggerSpec spec;
  if (s.ner == "remote") {
    spec.kind = NerTaggerKind::remote;
    if (s.endpoint.empty()) throw UsageError("--ner remote needs --endpoint");
    spec.endpoint = s.endpoint;
    spec.retry.max_retries = s.max_retries;
  } else if (s.ner == "mock") {
    if (!s.ner_lexicon.empty()) spec.lexicon = load_lexicon(s.ner_lexicon);
  } else {
    throw UsageError("unknown --ner '" + s.ner + "'");
  }
  return spec;
}

inline std::string dump(const nlohmann::ordered_json& j) {
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_align(const Settings& s, std::ostream& out, std::ostream& err) {
  const std::string& input = single_input(s);
  const Dataset d = load_dataset(s, input);
  const PipelineConfig cfg = pipeline_config(s);
  const DatasetBuilder builder(cfg);

  BuildOptions opts;
  opts.progress = &err;
  BuildResult result;
  if (!s.checkpoint.empty()) {
    opts.checkpoint = s.checkpoint;
    if (std::filesystem::exists(s.checkpoint) && !s.restart) {
      err << "qta: resuming from " << s.checkpoint << "\n";
      result = builder.resume(s.checkpoint, d, opts);
    } else {
      result = builder.build(d, opts);
    }
  } else {
    result = builder.build(d, opts);
  }

  const std::string text = write_dataset(result.dataset, DatasetFormat::extended_jsonl);
  if (s.out.empty()) {
    out << text;
  } else {
    write_file(s.out, text);
    out << dump(result.report.to_json()) << '\n';
  }
  return 0;
}

inline int cmd_stats(const Settings& s, std::ostream& out, std::ostream&) {
  if (s.input.empty()) throw UsageError("stats needs at least one --input");
  std::vector<std::pair<std::string, DatasetStats>> columns;
  for (const auto& path : s.input) {
    const Dataset d = load_dataset(s, path);
    DatasetStats st = compute_stats(d);
    if (s.ner != "none") {
      const NerCountMode mode = s.ner_count == "span" ? NerCountMode::span : NerCountMode::token;
      if (s.ner_count != "span" && s.ner_count != "token") {
        throw UsageError("--ner-count must be token or span");
      }
      st.ner_counts = count_ner_tags(d, ner_spec(s), mode);
    }
    columns.emplace_back(std::filesystem::path(path).stem().string(), std::move(st));
  }
  if (s.table) {
    out << render_stats_table(columns);
  } else if (columns.size() == 1) {
    out << dump(to_json(columns.front().second)) << '\n';
  } else {
    nlohmann::ordered_json j;
    for (const auto& [name, st] : columns) j[name] = to_json(st);
    out << dump(j) << '\n';
  }
  return 0;
}

inline int cmd_eval(const Settings& s, std::ostream& out, std::ostream&) {
  if (s.predictions.empty()) throw UsageError("eval needs --predictions");
  const Dataset d = load_dataset(s, single_input(s));
  const PredictionSet preds = parse_predictions(read_file(s.predictions));
  const MetricReport rep = evaluate(preds, d);
  if (s.table) {
    out << render_metrics_table({{s.model_name, rep}});
  } else {
    out << dump(to_json(rep, s.per_record)) << '\n';
  }
  return 0;
}

inline int cmd_validate(const Settings& s, std::ostream& out, std::ostream& err) {
  const std::string& input = single_input(s);
  const std::string text = read_file(input);
  std::vector<Violation> violations;
  std::size_t n = 0;
  if (resolve_format(s.format, input) == DatasetFormat::extended_jsonl) {
    const AlignedDataset d = parse_aligned_dataset(text);
    n = d.size();
    for (const auto& r : d.records) {
      auto v = validate_record(r);
      violations.insert(violations.end(), v.begin(), v.end());
    }
  } else {
    const Dataset d = parse_dataset(text, DatasetFormat::squad_json);
    n = d.size();
    for (const auto& r : d.records) {
      auto v = validate_record(r);
      violations.insert(violations.end(), v.begin(), v.end());
    }
  }
  for (const auto& v : violations) {
    nlohmann::ordered_json j;
    j["id"] = v.record_id;
    j["field"] = v.field;
    j["rule"] = v.rule;
    j["message"] = v.message;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  err << "qta: " << n << " records, " << violations.size() << " violation(s)\n";
  return violations.empty() ? 0 : 1;
}

inline int cmd_split(const Settings& s, std::ostream& out, std::ostream&) {
  if (!s.train || !s.test || !s.valid) throw UsageError("split needs --train, --test and --valid");
  if (s.out.empty()) throw UsageError("split needs --out (output directory)");
  const std::string& input = single_input(s);
  const DatasetFormat fmt = resolve_format(s.format, input);
  const Dataset d = load_dataset(s, input);
  const auto parts = split_dataset(d, *s.train, *s.test, *s.valid, s.seed);
  const std::filesystem::path dir(s.out);
  nlohmann::ordered_json summary;
  for (const auto& [name, part] : {std::pair{"train", &parts.train}, std::pair{"test", &parts.test},
                                   std::pair{"valid", &parts.valid}}) {
    const auto path = dir / (std::string(name) + extension(fmt));
    write_file(path, write_dataset(*part, fmt));
    summary[name] = {{"path", path.string()}, {"records", part->size()}};
  }
  out << dump(summary) << '\n';
  return 0;
}

inline int cmd_serve_mock(const Settings& s, std::ostream& out, std::ostream&) {
  MockServiceOptions options;
  if (!s.mapping_file.empty()) options.translation_table = load_mapping(s.mapping_file);
  if (!s.ner_lexicon.empty()) options.ner_lexicon = load_lexicon(s.ner_lexicon);
  MockServiceServer server(std::move(options), s.host, s.port);
  out << server.endpoint() << std::endl;
  server.wait();
  return 0;
}

}  // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  Settings s;
  CLI::App app{"Builds translated extractive-QA datasets, aligns answer spans, and evaluates predictions.",
               "qta"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_flag;
  app.add_option("--config", config_flag, "JSON config file (default: $QTA_CONFIG)");

  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--input,--dataset", s.input, "Input dataset file");
    sub->add_option("--format", s.format, "Dataset format: auto, squad_json, extended_jsonl")
        ->check(CLI::IsMember({"auto", "squad_json", "extended_jsonl", "json", "jsonl"}));
  };

  auto* align = app.add_subcommand("align", "Translate a dataset and align every answer span");
  add_input(align);
  align->add_option("--out", s.out, "Output extended JSONL file (default: stdout)");
  align->add_option("--backend", s.backend, "Translation backend: identity, mapping, remote")
      ->check(CLI::IsMember({"identity", "mapping", "remote"}));
  align->add_option("--mapping-file", s.mapping_file, "JSON object of token substitutions (mapping backend)");
  align->add_option("--endpoint", s.endpoint, "Base URL of the translation/embedding service");
  align->add_option("--source-lang", s.source_lang, "Source language tag");
  align->add_option("--target-lang", s.target_lang, "Target language tag");
  align->add_option("--batch-size", s.batch_size, "Texts per remote translation request");
  align->add_option("--max-retries", s.max_retries, "Retries per failed service request");
  align->add_option("--scorer", s.scorer,
                    "Similarity: bag_jaccard, char_ngram_cosine, levenshtein, remote_embedding")
      ->check(CLI::IsMember({"bag_jaccard", "char_ngram_cosine", "levenshtein", "remote_embedding"}));
  align->add_option("--ngram-n", s.ngram_n, "n for char_ngram_cosine");
  align->add_option("--threshold", s.threshold, "Scores below this are flagged low_confidence");
  align->add_option("--on-failure", s.on_failure, "Failed records: flag (keep) or drop")
      ->check(CLI::IsMember({"flag", "flag_and_keep", "drop"}));
  align->add_option("--checkpoint", s.checkpoint, "Checkpoint file; resumed when it exists");
  align->add_flag("--restart", s.restart, "Ignore an existing checkpoint and start over");
  align->add_option("--checkpoint-every", s.checkpoint_every, "Records between checkpoints");
  align->add_option("--parallelism", s.parallelism, "Records processed concurrently");

  auto* stats = app.add_subcommand("stats", "Length averages and NER tag counts over answers");
  add_input(stats);
  stats->add_option("--ner", s.ner, "NER tagger: none, mock, remote")
      ->check(CLI::IsMember({"none", "mock", "remote"}));
  stats->add_option("--ner-lexicon", s.ner_lexicon, "JSON object token -> tag for the mock tagger");
  stats->add_option("--ner-count", s.ner_count, "Count tagged tokens or entity spans: token, span")
      ->check(CLI::IsMember({"token", "span"}));
  stats->add_option("--endpoint", s.endpoint, "Base URL of the NER service (--ner remote)");
  stats->add_option("--max-retries", s.max_retries, "Retries per failed service request");
  stats->add_flag("--table", s.table, "Print an aligned text table instead of JSON");

  auto* eval = app.add_subcommand("eval", "Score predictions with EM, ROUGE-2, ROUGE-L and BLEU");
  add_input(eval);
  eval->add_option("--predictions", s.predictions, "JSONL of {\"id\", \"prediction\"}");
  eval->add_option("--model-name", s.model_name, "Row label in the text table");
  eval->add_flag("--table", s.table, "Print an aligned text table instead of JSON");
  eval->add_flag("--per-record", s.per_record, "Include per-record scores in the JSON report");

  auto* validate = app.add_subcommand("validate", "Check every record's answer span against its context");
  add_input(validate);

  auto* split = app.add_subcommand("split", "Seeded train/test/valid split");
  add_input(split);
  split->add_option("--out", s.out, "Output directory");
  split->add_option("--train", s.train, "Train fraction");
  split->add_option("--test", s.test, "Test fraction");
  split->add_option("--valid", s.valid, "Validation fraction");
  split->add_option("--seed", s.seed, "Shuffle seed");

  auto* serve = app.add_subcommand("serve-mock", "Run the mock translation/embedding/NER service");
  serve->add_option("--host", s.host, "Bind address");
  serve->add_option("--port", s.port, "Port (0 picks a free one)");
  serve->add_option("--mapping-file", s.mapping_file, "Translate with this substitution table instead of echoing");
  serve->add_option("--ner-lexicon", s.ner_lexicon, "JSON object token -> tag");

  try {
    if (auto path = detail::config_path(args)) {
      try {
        detail::apply_config(s, nlohmann::json::parse(detail::read_file(*path)));
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("config " + *path + ": " + e.what());
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    err << "qta: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*align) return detail::cmd_align(s, out, err);
    if (*stats) return detail::cmd_stats(s, out, err);
    if (*eval) return detail::cmd_eval(s, out, err);
    if (*validate) return detail::cmd_validate(s, out, err);
    if (*split) return detail::cmd_split(s, out, err);
    if (*serve) return detail::cmd_serve_mock(s, out, err);
  } catch (const UsageError& e) {
    err << "qta: " << e.what() << '\n';
    return 2;
  } catch (const ArgumentError& e) {
    err << "qta: " << e.what() << '\n';
    return 2;
  } catch (const ServiceError& e) {
    err << "qta: service error: " << e.what() << '\n';
    if (!s.checkpoint.empty()) err << "qta: checkpoint kept at " << s.checkpoint << '\n';
    return 3;
  } catch (const Error& e) {
    err << "qta: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "qta: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args));
}

}  // namespace qta::cli
