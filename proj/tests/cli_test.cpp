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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "qta/cli.hpp"
#include "support/generators.hpp"
#include "support/metric_fixture.hpp"

namespace qta {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  RunResult r;
  r.code = cli::run(std::move(args), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv("QTA_CONFIG");
    dir_ = fs::temp_directory_path() /
           ("qta_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(dir_ / name, std::ios::binary) << content;
    return path(name);
  }

  std::string read(const std::string& name) const {
    std::ifstream f(dir_ / name, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
  }

  std::string dataset_file(std::size_t n, const std::string& name = "in.json") const {
    ::qta::testing::TextGen g(9);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
      d.records.push_back(::qta::testing::token_aligned_record(g, "id" + std::to_string(i)));
    }
    return write(name, write_dataset(d, DatasetFormat::squad_json));
  }

  fs::path dir_;
};

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

TEST_F(CliTest, AlignWritesOneLinePerRecord) {
  const std::string in = dataset_file(12);
  const RunResult r = run_cli({"align", "--input", in, "--backend", "identity", "--out", path("out.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(read("out.jsonl")), 12u);
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_EQ(report["ok"], 12);
  EXPECT_EQ(report["total"], 12);
}

TEST_F(CliTest, AlignToStdout) {
  const RunResult r = run_cli({"align", "--input", dataset_file(3), "--scorer", "bag_jaccard"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_aligned_dataset(r.out).size(), 3u);
  EXPECT_NE(r.err.find("3/3"), std::string::npos);  // progress on stderr
}

TEST_F(CliTest, AlignCheckpointResumes) {
  const std::string in = dataset_file(6);
  const std::vector<std::string> base{"align", "--input", in, "--checkpoint", path("c.ckpt"),
                                      "--checkpoint-every", "2", "--out", path("a.jsonl")};
  ASSERT_EQ(run_cli(base).code, 0);
  const RunResult again = run_cli(base);
  ASSERT_EQ(again.code, 0);
  EXPECT_NE(again.err.find("resuming"), std::string::npos);
  EXPECT_EQ(count_lines(read("a.jsonl")), 6u);

  std::vector<std::string> other = base;
  other.insert(other.end(), {"--threshold", "0.9"});
  EXPECT_EQ(run_cli(other).code, 1);  // checkpoint for another configuration
  other.push_back("--restart");
  EXPECT_EQ(run_cli(other).code, 0);
}

TEST_F(CliTest, SplitIsSeedDeterministic) {
  const std::string in = dataset_file(40);
  const std::vector<std::string> args{"split", "--input", in, "--train", "0.7", "--test", "0.15",
                                      "--valid", "0.15", "--seed", "7", "--out"};
  auto a = args, b = args;
  a.push_back(path("a"));
  b.push_back(path("b"));
  ASSERT_EQ(run_cli(a).code, 0);
  ASSERT_EQ(run_cli(b).code, 0);
  for (const char* part : {"train.json", "test.json", "valid.json"}) {
    EXPECT_EQ(read(std::string("a/") + part), read(std::string("b/") + part)) << part;
  }
  EXPECT_EQ(parse_dataset(read("a/test.json"), DatasetFormat::squad_json).size(), 6u);
}

TEST_F(CliTest, SplitRejectsFractionsNotSummingToOne) {
  const RunResult r = run_cli({"split", "--input", dataset_file(10), "--train", "0.75", "--test",
                               "0.15", "--valid", "0.15", "--out", path("s")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("sum"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalReportsAndNamesMissingIds) {
  const std::string d = write("d.json", write_dataset(::qta::testing::metric_fixture_dataset(),
                                                      DatasetFormat::squad_json));
  const std::string p = write("p.jsonl", ::qta::testing::metric_fixture_predictions_jsonl());
  const RunResult ok = run_cli({"eval", "--dataset", d, "--predictions", p});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_NEAR(nlohmann::json::parse(ok.out)["em_percent"].get<double>(), 20.0, 1e-9);

  const RunResult table = run_cli({"eval", "--dataset", d, "--predictions", p, "--table", "--model-name", "mock"});
  EXPECT_NE(table.out.find("BLEU (Bigrams)(%)"), std::string::npos);
  EXPECT_NE(table.out.find("20.00"), std::string::npos);

  const std::string partial = write("partial.jsonl", "{\"id\": \"m1\", \"prediction\": \"x\"}\n");
  const RunResult missing = run_cli({"eval", "--dataset", d, "--predictions", partial});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("m3"), std::string::npos);
}

TEST_F(CliTest, ValidateFlagsBrokenSpans) {
  const std::string good = dataset_file(4);
  EXPECT_EQ(run_cli({"validate", "--input", good}).code, 0);
  const std::string bad = write(
      "bad.json", R"({"data":[{"title":"T","paragraphs":[{"context":"abc def","qas":[
      {"id":"x1","question":"q","answers":[{"text":"def","answer_start":3}]}]}]}]})");
  const RunResult r = run_cli({"validate", "--input", bad});
  EXPECT_EQ(r.code, 1);
  const auto v = nlohmann::json::parse(r.out);
  EXPECT_EQ(v["id"], "x1");
  EXPECT_EQ(v["rule"], "span-mismatch");
}

TEST_F(CliTest, StatsWithMockNer) {
  const std::string d = write("s.json", R"({"data":[{"title":"T","paragraphs":[{"context":"born in 1947 in delhi","qas":[
      {"id":"1","question":"when?","answers":[{"text":"1947","answer_start":8}]},
      {"id":"2","question":"where was it?","answers":[{"text":"delhi","answer_start":16}]}]}]}]})");
  const std::string lex = write("lex.json", R"({"1947": "Date", "delhi": "Location"})");
  const RunResult r = run_cli({"stats", "--input", d, "--ner", "mock", "--ner-lexicon", lex});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["n_records"], 2);
  EXPECT_DOUBLE_EQ(j["avg_context_words"].get<double>(), 5.0);
  EXPECT_DOUBLE_EQ(j["avg_question_words"].get<double>(), 2.0);
  EXPECT_EQ(j["ner_Date"], 1);
  EXPECT_EQ(j["ner_Location"], 1);
  EXPECT_EQ(run_cli({"stats", "--input", d, "--table"}).code, 0);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  const std::string in = dataset_file(5);
  const std::string cfg = write("cfg.json", R"({"scorer": "bag_jaccard", "threshold": 1.5})");
  EXPECT_EQ(run_cli({"align", "--config", cfg, "--input", in}).code, 2);  // threshold out of range
  EXPECT_EQ(run_cli({"align", "--config", cfg, "--input", in, "--threshold", "0.5"}).code, 0);

  ::setenv("QTA_CONFIG", cfg.c_str(), 1);
  EXPECT_EQ(run_cli({"align", "--input", in}).code, 2);
  ::unsetenv("QTA_CONFIG");

  const std::string unknown = write("bad.json", R"({"thresold": 0.5})");
  const RunResult r = run_cli({"align", "--config", unknown, "--input", in});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("thresold"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"align"}).code, 2);
  EXPECT_EQ(run_cli({"align", "--input", dataset_file(1), "--scorer", "cosine"}).code, 2);
  EXPECT_EQ(run_cli({"align", "--input", path("missing.json")}).code, 2);
  EXPECT_EQ(run_cli({"align", "--input", dataset_file(1), "--backend", "mapping"}).code, 2);
  EXPECT_EQ(run_cli({"split", "--input", dataset_file(1), "--out", path("x")}).code, 2);
}

TEST_F(CliTest, DataErrors) {
  EXPECT_EQ(run_cli({"align", "--input", write("broken.json", "{\"data\": [")}).code, 1);
}

TEST_F(CliTest, UnreachableBackendExitsThree) {
  std::string endpoint;
  {
    MockServiceServer gone;
    endpoint = gone.endpoint();
  }
  const RunResult r = run_cli({"align", "--input", dataset_file(2), "--backend", "remote", "--endpoint",
                               endpoint, "--max-retries", "0", "--checkpoint", path("c")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("checkpoint kept"), std::string::npos);
}

TEST_F(CliTest, RemoteBackendAgainstMockServer) {
  MockServiceServer server;
  const RunResult r = run_cli({"align", "--input", dataset_file(20), "--backend", "remote",
                               "--endpoint", server.endpoint(), "--parallelism", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_aligned_dataset(r.out).size(), 20u);
  EXPECT_EQ(server.translate_calls(), 20u);
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(QTA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliBinary, HelpOnEverySubcommand) {
  EXPECT_EQ(run_binary("--help"), 0);
  for (const char* sub : {"align", "stats", "eval", "validate", "split", "serve-mock"}) {
    EXPECT_EQ(run_binary(std::string(sub) + " --help"), 0) << sub;
  }
  EXPECT_EQ(run_binary("align --bogus"), 2);
}

TEST(CliBinary, HelpDocumentsFlags) {
  std::ostringstream out, err;
  cli::run({"align", "--help"}, out, err);
  for (const char* flag : {"--input", "--out", "--format", "--backend", "--mapping-file", "--endpoint",
                           "--scorer", "--ngram-n", "--threshold", "--on-failure", "--checkpoint",
                           "--checkpoint-every", "--parallelism"}) {
    EXPECT_NE(out.str().find(flag), std::string::npos) << flag;
  }
  std::ostringstream split_out;
  cli::run({"split", "--help"}, split_out, err);
  for (const char* flag : {"--train", "--test", "--valid", "--seed"}) {
    EXPECT_NE(split_out.str().find(flag), std::string::npos) << flag;
  }
}

}  // namespace
}  // namespace qta
