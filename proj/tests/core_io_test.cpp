// Copyright 2026 The Bracketrank Authors.
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

#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bracketrank/core.hpp"
#include "bracketrank/io.hpp"
#include "bracketrank/random.hpp"
#include "test_util.hpp"

namespace bracketrank {
namespace {

using testing::MakeModels;
using testing::TempDir;

MatchRecord Rec(const std::string& prompt, const std::string& a, const std::string& b,
                const std::string& winner) {
  return {prompt, ModelId(a), ModelId(b), ModelId(winner), "oracle", false, std::nullopt};
}

TEST(ModelIdTest, RejectsNonTokens) {
  EXPECT_THROW(ModelId(""), DataError);
  EXPECT_THROW(ModelId("has space"), DataError);
  EXPECT_THROW(ModelId("a,b"), DataError);
  EXPECT_THROW(ModelId("tab\there"), DataError);
  EXPECT_NO_THROW(ModelId("gpt-4o-2024-05-13"));
}

TEST(ModelIdTest, OrdersLexicographically) {
  EXPECT_LT(ModelId("a"), ModelId("b"));
  EXPECT_LT(ModelId("B"), ModelId("a"));
  EXPECT_LT(ModelId("m1"), ModelId("m10"));
}

TEST(ModelIdTest, SortedUniqueRejectsDuplicates) {
  std::vector<ModelId> models{ModelId("b"), ModelId("a"), ModelId("b")};
  EXPECT_THROW(SortedUniqueModels(models), DataError);
}

TEST(MatchRecordTest, WinnerMustBeInPair) {
  MatchLedger ledger;
  EXPECT_THROW(ledger.Append(Rec("p", "a", "b", "c")), DataError);
  EXPECT_THROW(ledger.Append(Rec("p", "a", "a", "a")), DataError);
  EXPECT_TRUE(ledger.empty());
}

TEST(MatchLedgerTest, ConcatIsAssociative) {
  MatchLedger a, b, c;
  a.Append(Rec("p0", "x", "y", "x"));
  b.Append(Rec("p1", "y", "z", "z"));
  b.Append(Rec("p2", "x", "z", "x"));
  c.Append(Rec("p3", "x", "y", "y"));
  EXPECT_EQ(MatchLedger::Concat(MatchLedger::Concat(a, b), c),
            MatchLedger::Concat(a, MatchLedger::Concat(b, c)));
}

TEST(PromptSetTest, RejectsEmptyAndDuplicates) {
  EXPECT_THROW(PromptSet({}), DataError);
  try {
    PromptSet({{"p1", "", std::nullopt}, {"p1", "", std::nullopt}});
    FAIL() << "duplicate accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("p1"), std::string::npos);
  }
}

TEST(PromptFileTest, FiveHundredRowsInTwoFiftyStrata) {
  std::ostringstream file;
  for (int i = 0; i < 500; ++i) {
    file << "q" << i << "\ttopic" << i / 2 << "\tInstruction number " << i << "\n";
  }
  std::istringstream in(file.str());
  const PromptSet prompts = ParsePromptSet(in, "prompts.tsv");
  EXPECT_EQ(prompts.size(), 500u);
  EXPECT_EQ(prompts[0].id, "q0");
  EXPECT_EQ(prompts[499].id, "q499");
  EXPECT_EQ(prompts[3].stratum, "topic1");
}

TEST(PromptFileTest, EmptyFileIsAnError) {
  std::istringstream in("# only a comment\n");
  try {
    ParsePromptSet(in, "prompts.tsv");
    FAIL() << "empty file accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("empty prompt set"), std::string::npos);
  }
}

TEST(PromptFileTest, DuplicateNamesIdAndLine) {
  std::istringstream in("a\t\tfirst\nb\t\tsecond\na\t\tthird\n");
  try {
    ParsePromptSet(in, "prompts.tsv");
    FAIL() << "duplicate accepted";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
  }
}

TEST(PromptFileTest, MalformedLineReportsLineNumber) {
  std::istringstream in("a\t\tfirst\nbroken line\n");
  try {
    ParsePromptSet(in, "prompts.tsv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("prompts.tsv:2:"), std::string::npos);
  }
}

TEST(PromptFileTest, RoundTripKeepsTextAndStrata) {
  PromptSet prompts({{"p1", "line one\nline two\twith tab \\ slash", std::string("math")},
                     {"p2", "", std::nullopt}});
  std::stringstream buf;
  WritePromptSet(prompts, buf);
  EXPECT_EQ(ParsePromptSet(buf, "mem"), prompts);
}

TEST(OutputFileTest, CompleteStoreLoads) {
  const auto models = MakeModels(20);
  const PromptSet prompts = PromptSet::Synthetic(500);
  std::ostringstream file;
  for (const auto& p : prompts.prompts()) {
    for (const auto& m : models) file << p.id << '\t' << m.str() << "\tanswer\n";
  }
  file << "sim-0\tnot-a-participant\tignored\n";
  std::istringstream in(file.str());
  const OutputStore store = ParseOutputStore(in, "outputs.tsv", models, prompts);
  EXPECT_EQ(store.size(), 10000u);
}

TEST(OutputFileTest, MissingPairIsListed) {
  const auto models = MakeModels(2);
  const PromptSet prompts = PromptSet::Synthetic(2);
  std::istringstream in("sim-0\tm000\tx\nsim-0\tm001\ty\nsim-1\tm000\tz\n");
  try {
    ParseOutputStore(in, "outputs.tsv", models, prompts);
    FAIL() << "gap not reported";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("(sim-1, m001)"), std::string::npos) << e.what();
  }
}

TEST(OutputFileTest, NoParticipantsIsAnError) {
  std::istringstream in("");
  try {
    ParseOutputStore(in, "outputs.tsv", {}, PromptSet::Synthetic(1));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no participants"), std::string::npos);
  }
}

TEST(OutputFileTest, RoundTrip) {
  const auto models = MakeModels(3);
  const PromptSet prompts = PromptSet::Synthetic(4);
  OutputStore store;
  for (const auto& p : prompts.prompts()) {
    for (const auto& m : models) store.Insert(p.id, m, "reply of " + m.str() + "\nto " + p.id);
  }
  std::stringstream buf;
  WriteOutputStore(store, buf);
  EXPECT_EQ(ParseOutputStore(buf, "mem", models, prompts), store);
}

TEST(LedgerFileTest, LargeLedgerRoundTripsByteForByte) {
  const auto models = MakeModels(20);
  CounterStream rng(StreamKey(3, "ledger"));
  MatchLedger ledger;
  for (int i = 0; i < 9500; ++i) {
    const auto a = rng.NextBelow(20);
    auto b = rng.NextBelow(19);
    if (b >= a) ++b;
    MatchRecord r{"p" + std::to_string(i / 19), models[a], models[b],
                  rng.NextBelow(2) ? models[a] : models[b], "simulated:0.8",
                  rng.NextBelow(2) == 1, std::nullopt};
    if (i % 3 == 0) r.trial_id = i % 7;
    ledger.Append(std::move(r));
  }
  std::stringstream first;
  WriteLedger(ledger, first);
  const std::string bytes = first.str();
  const LedgerFile back = ParseLedger(first, "mem");
  EXPECT_EQ(back.ledger, ledger);
  EXPECT_FALSE(back.resume_from);
  std::stringstream second;
  WriteLedger(back.ledger, second);
  EXPECT_EQ(second.str(), bytes);
}

TEST(LedgerFileTest, EmptyLedgerRoundTrips) {
  std::stringstream buf;
  WriteLedger(MatchLedger{}, buf);
  EXPECT_TRUE(ParseLedger(buf, "mem").ledger.empty());
}

TEST(LedgerFileTest, ThirdModelWinnerIsRejected) {
  std::istringstream in("p\ta\tb\tc\toracle\t0\t\n");
  EXPECT_THROW(ParseLedger(in, "mem"), DataError);
}

TEST(LedgerFileTest, ResumeMarkerRoundTrips) {
  MatchLedger ledger;
  ledger.Append(Rec("p0", "a", "b", "a"));
  std::stringstream buf;
  WriteLedger(ledger, buf, 1);
  const LedgerFile back = ParseLedger(buf, "mem");
  EXPECT_EQ(back.ledger, ledger);
  EXPECT_EQ(back.resume_from, 1u);
}

TEST(CacheTest, UnorderedLookup) {
  MatchCache cache;
  cache.Insert("p", {ModelId("b"), ModelId("a"), ModelId("a")});
  const CacheEntry* ab = cache.Find("p", ModelId("a"), ModelId("b"));
  const CacheEntry* ba = cache.Find("p", ModelId("b"), ModelId("a"));
  ASSERT_NE(ab, nullptr);
  EXPECT_EQ(ab, ba);
  EXPECT_EQ(ab->first, ModelId("b"));
  EXPECT_FALSE(cache.Contains("q", ModelId("a"), ModelId("b")));
}

TEST(CacheTest, ConflictingDuplicateThrows) {
  MatchCache cache;
  EXPECT_TRUE(cache.Insert("p", {ModelId("a"), ModelId("b"), ModelId("a")}));
  EXPECT_FALSE(cache.Insert("p", {ModelId("a"), ModelId("b"), ModelId("a")}));
  EXPECT_THROW(cache.Insert("p", {ModelId("a"), ModelId("b"), ModelId("b")}), DataError);
  EXPECT_THROW(cache.Insert("p", {ModelId("a"), ModelId("b"), ModelId("c")}), DataError);
}

TEST(CacheTest, FileRoundTrip) {
  MatchCache cache;
  cache.Insert("p1", {ModelId("x"), ModelId("y"), ModelId("y")});
  cache.Insert("p0", {ModelId("z"), ModelId("x"), ModelId("z")});
  std::stringstream buf;
  WriteCache(cache, buf);
  EXPECT_EQ(ParseCache(buf, "mem"), cache);
}

TEST(RatingTableFileTest, RoundTripAndBareDocument) {
  TempDir dir("ratings");
  RatingTable table;
  table.ratings = {{ModelId("a"), 1012.5}, {ModelId("b"), 987.5}};
  table.fit_meta = {7, 1e-12, 1e-6};
  WriteRatingTable(table, dir / "r.json");
  EXPECT_EQ(ReadRatingTable(dir / "r.json"), table);

  const RatingTable bare =
      RatingTableFromJson(nlohmann::json::parse(R"({"ratings": {"x": 1200, "y": 1000}})"));
  EXPECT_DOUBLE_EQ(bare.anchor_mean, 1100.0);
  EXPECT_THROW(RatingTableFromJson(nlohmann::json::parse(R"({"ratings": {}})")), DataError);
}

TEST(LeaderboardTest, CompetitionRanks) {
  std::vector<std::pair<ModelId, double>> rows{
      {ModelId("a"), 3}, {ModelId("b"), 2}, {ModelId("c"), 2}, {ModelId("d"), 1}};
  const Leaderboard board = Leaderboard::FromOrdered(rows);
  std::vector<int> ranks;
  for (const auto& e : board.entries()) ranks.push_back(e.rank);
  EXPECT_EQ(ranks, (std::vector<int>{1, 2, 2, 4}));
}

TEST(LeaderboardTest, RejectsInvalidBoards) {
  EXPECT_THROW(Leaderboard({{1, ModelId("a"), 1.0, {}, {}}, {2, ModelId("b"), 2.0, {}, {}}}),
               DataError);
  EXPECT_THROW(Leaderboard({{1, ModelId("a"), 2.0, {}, {}}, {1, ModelId("b"), 1.0, {}, {}}}),
               DataError);
  EXPECT_THROW(Leaderboard({{1, ModelId("a"), 2.0, 2.5, 3.0}}), DataError);
  EXPECT_THROW(Leaderboard({{1, ModelId("a"), 2.0, 1.0, std::nullopt}}), DataError);
  EXPECT_THROW(Leaderboard({{1, ModelId("a"), 2.0, {}, {}}, {2, ModelId("a"), 1.0, {}, {}}}),
               DataError);
}

TEST(LeaderboardTest, CsvAndJsonRoundTrip) {
  TempDir dir("board");
  std::vector<std::pair<ModelId, double>> rows{
      {ModelId("a"), 1100.25}, {ModelId("b"), 1000}, {ModelId("c"), 1000}};
  std::vector<std::pair<double, double>> cis{{1090, 1110}, {990, 1010}, {980, 1000}};
  const Leaderboard with_ci = Leaderboard::FromOrdered(rows, cis);
  const Leaderboard plain = Leaderboard::FromOrdered(rows);
  for (const auto& board : {with_ci, plain}) {
    WriteLeaderboardCsv(board, dir / "lb.csv");
    WriteLeaderboardJson(board, dir / "lb.json");
    EXPECT_EQ(ReadLeaderboard(dir / "lb.csv"), board);
    EXPECT_EQ(ReadLeaderboard(dir / "lb.json"), board);
  }
}

}  // namespace
}  // namespace bracketrank
