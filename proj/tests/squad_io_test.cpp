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

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "qta/squad_io.hpp"
#include "support/generators.hpp"

namespace qta {
namespace {

std::string read_fixture(const std::string& name) {
  std::ifstream f(std::string(QTA_TEST_DATA) + "/" + name);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

Dataset synthetic(std::size_t n, uint64_t seed = 3) {
  testing::TextGen g(seed);
  Dataset d;
  d.language_tag = "hi";
  for (std::size_t i = 0; i < n; ++i) {
    QaRecord r = testing::token_aligned_record(g, "q" + std::to_string(i));
    if (g.chance(0.2)) {
      r.is_impossible = true;
      r.answer_text.clear();
      r.answer_start = -1;
    }
    d.records.push_back(std::move(r));
  }
  return d;
}

TEST(ParseDataset, SquadFixture) {
  const Dataset d = parse_dataset(read_fixture("squad_sample.json"), DatasetFormat::squad_json);
  ASSERT_EQ(d.size(), 5u);
  EXPECT_EQ(d.records[0].id, "56be4db0acb8001400a502ec");
  EXPECT_EQ(d.records[0].title, "Super_Bowl_50");
  EXPECT_EQ(d.records[0].answer_text, "Denver Broncos");  // first of three answers
  EXPECT_EQ(d.records[0].answer_start, 177);
  EXPECT_FALSE(d.records[0].is_impossible);

  EXPECT_TRUE(d.records[2].is_impossible);
  EXPECT_EQ(d.records[2].answer_text, "");
  EXPECT_EQ(d.records[2].answer_start, -1);

  EXPECT_EQ(d.records[3].id, "hi-0001");
  EXPECT_FALSE(d.records[3].is_impossible);  // field absent
  EXPECT_EQ(d.records[3].answer_start, 30);
  for (const auto& r : d.records) EXPECT_TRUE(validate_record(r).empty()) << r.id;
}

TEST(ParseDataset, MinimalRecord) {
  const std::string text = R"({"data":[{"title":"T","paragraphs":[{"context":"abc def","qas":[
      {"id":"1","question":"q?","answers":[{"text":"def","answer_start":4}]}]}]}]})";
  const Dataset d = parse_dataset(text, DatasetFormat::squad_json);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.records[0], (QaRecord{"1", "T", "abc def", "q?", "def", 4, false}));
}

TEST(ParseDataset, UnanswerableWithEmptyAnswers) {
  const std::string text = R"({"data":[{"title":"T","paragraphs":[{"context":"abc","qas":[
      {"id":"1","question":"q?","answers":[],"is_impossible":true}]}]}]})";
  const Dataset d = parse_dataset(text, DatasetFormat::squad_json);
  EXPECT_EQ(d.records[0].answer_text, "");
  EXPECT_EQ(d.records[0].answer_start, -1);
  EXPECT_TRUE(d.records[0].is_impossible);
}

TEST(ParseDataset, MalformedJsonReportsByte) {
  try {
    parse_dataset(R"({"data": [)", DatasetFormat::squad_json);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(e.locator().find("byte"), std::string::npos);
  }
}

TEST(ParseDataset, MissingFieldReportsRecordPath) {
  const std::string text = R"({"data":[{"title":"T","paragraphs":[{"context":"abc","qas":[
      {"id":"1","answers":[]}]}]}]})";
  try {
    parse_dataset(text, DatasetFormat::squad_json);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.locator(), "data[0].paragraphs[0].qas[0]");
    EXPECT_NE(std::string(e.what()).find("question"), std::string::npos);
  }
}

TEST(ParseDataset, JsonlErrorsNameTheLine) {
  const Dataset d = synthetic(2);
  std::string text = write_dataset(d, DatasetFormat::extended_jsonl);
  text += "{\"id\": \"x\"\n";
  try {
    parse_dataset(text, DatasetFormat::extended_jsonl);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.locator(), "line 3");
  }
}

TEST(ParseDataset, DuplicateIdsRejected) {
  const std::string text = R"({"data":[{"title":"T","paragraphs":[{"context":"abc","qas":[
      {"id":"1","question":"a","answers":[]},{"id":"1","question":"b","answers":[]}]}]}]})";
  EXPECT_THROW(parse_dataset(text, DatasetFormat::squad_json), ValidationError);
}

TEST(WriteDataset, RoundTripFixtureBothFormats) {
  const Dataset d = parse_dataset(read_fixture("squad_sample.json"), DatasetFormat::squad_json);
  for (auto fmt : {DatasetFormat::squad_json, DatasetFormat::extended_jsonl}) {
    EXPECT_EQ(parse_dataset(write_dataset(d, fmt), fmt), d);
  }
}

TEST(WriteDataset, EmptyDatasetStillParses) {
  const Dataset empty;
  for (auto fmt : {DatasetFormat::squad_json, DatasetFormat::extended_jsonl}) {
    EXPECT_TRUE(parse_dataset(write_dataset(empty, fmt), fmt).empty());
  }
}

TEST(WriteDataset, OneLinePerRecordWithAllExtendedKeys) {
  const std::string text = write_dataset(synthetic(3), DatasetFormat::extended_jsonl);
  std::istringstream in(text);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    const auto obj = nlohmann::json::parse(line);
    for (const char* key : {"id", "title", "context", "question", "answer_text", "answer_start",
                            "answer_end", "answer_token_start", "answer_token_end",
                            "alignment_score", "alignment_flag", "is_impossible"}) {
      EXPECT_TRUE(obj.contains(key)) << key;
    }
  }
  EXPECT_EQ(lines, 3u);
}

TEST(WriteDatasetProperty, RoundTripRandomDatasets) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset d = synthetic(1 + seed % 7, seed);
    for (auto fmt : {DatasetFormat::squad_json, DatasetFormat::extended_jsonl}) {
      ASSERT_EQ(parse_dataset(write_dataset(d, fmt), fmt), d) << "seed " << seed;
    }
    AlignedDataset aligned;
    aligned.language_tag = d.language_tag;
    for (const auto& r : d.records) aligned.records.push_back(to_aligned(r));
    aligned.records.front().alignment_score = 0.1 + 1.0 / 3.0;
    ASSERT_EQ(parse_aligned_dataset(write_dataset(aligned)), aligned);
  }
}

TEST(ValidateRecord, SpanChecks) {
  QaRecord r{"1", "T", "abc def", "q", "def", 4, false};
  EXPECT_TRUE(validate_record(r).empty());
  r.answer_start = 3;
  const auto v = validate_record(r);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "span-mismatch");
  EXPECT_EQ(v[0].field, "answer_start");
  r.answer_start = 6;
  EXPECT_EQ(validate_record(r).at(0).rule, "span-mismatch");
}

TEST(ValidateRecord, UnanswerableConvention) {
  QaRecord r{"1", "T", "abc def", "q", "", 0, true};
  const auto v = validate_record(r);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "unanswerable-convention");
  r.answer_start = -1;
  EXPECT_TRUE(validate_record(r).empty());
}

TEST(ValidateRecord, OffsetsAreCodepoints) {
  // Byte offset of "भारत" would be 19; codepoint offset is 7.
  QaRecord r{"1", "", "दिल्ली भारत", "q", "भारत", 7, false};
  EXPECT_TRUE(validate_record(r).empty());
}

TEST(ValidateRecord, AlignedConsistency) {
  AlignedRecord a = to_aligned(QaRecord{"1", "T", "abc def ghi", "q", "def ghi", 4, false});
  EXPECT_EQ(a.answer_end, 11);
  EXPECT_EQ(a.answer_token_start, 1);
  EXPECT_EQ(a.answer_token_end, 3);
  EXPECT_TRUE(validate_record(a).empty());
  a.answer_token_end = 2;
  EXPECT_EQ(validate_record(a).at(0).rule, "token-char-mismatch");
  a.alignment_flag = AlignmentFlag::failed;
  EXPECT_TRUE(validate_record(a).empty());
}

TEST(SplitDataset, RejectsFractionsNotSummingToOne) {
  const Dataset d = synthetic(10);
  EXPECT_THROW(split_dataset(d, 0.75, 0.15, 0.15, 1), ArgumentError);
  EXPECT_THROW(split_dataset(Dataset{}, 0.8, 0.1, 0.1, 1), ArgumentError);
}

TEST(SplitDataset, PublishedCountsNeedTheirOwnTotal) {
  // 21000 + 4200 + 4200 = 29400: as fractions of 28000 they sum to 1.05.
  Dataset d;
  for (int i = 0; i < 28000; ++i) d.records.push_back({std::to_string(i), "", "c", "q", "", -1, true});
  EXPECT_THROW(split_dataset(d, 21000.0 / 28000, 4200.0 / 28000, 4200.0 / 28000, 1), ArgumentError);

  for (int i = 28000; i < 29400; ++i) d.records.push_back({std::to_string(i), "", "c", "q", "", -1, true});
  const auto s = split_dataset(d, 21000.0 / 29400, 4200.0 / 29400, 4200.0 / 29400, 1);
  EXPECT_EQ(s.train.size(), 21000u);
  EXPECT_EQ(s.test.size(), 4200u);
  EXPECT_EQ(s.valid.size(), 4200u);
}

TEST(SplitDataset, DeterministicDisjointCover) {
  const Dataset d = synthetic(10);
  const auto a = split_dataset(d, 0.8, 0.1, 0.1, 42);
  const auto b = split_dataset(d, 0.8, 0.1, 0.1, 42);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.valid, b.valid);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.test.size(), 1u);
  EXPECT_EQ(a.valid.size(), 1u);
}

TEST(SplitDatasetProperty, PartitionsForAnySeed) {
  const Dataset d = synthetic(97);
  std::set<std::vector<std::string>> distinct_tests;
  for (uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = split_dataset(d, 0.7, 0.2, 0.1, seed);
    ASSERT_EQ(s.train.size() + s.test.size() + s.valid.size(), d.size());
    EXPECT_EQ(s.test.size(), 19u);  // round(19.4)
    EXPECT_EQ(s.valid.size(), 10u);  // round(9.7)
    std::set<std::string> ids;
    std::vector<std::string> test_ids;
    for (const auto* part : {&s.train, &s.test, &s.valid}) {
      for (const auto& r : part->records) ASSERT_TRUE(ids.insert(r.id).second) << "overlap " << r.id;
    }
    for (const auto& r : s.test.records) test_ids.push_back(r.id);
    distinct_tests.insert(test_ids);
    ASSERT_EQ(ids.size(), d.size());
  }
  EXPECT_GT(distinct_tests.size(), 25u);
}

}  // namespace
}  // namespace qta
