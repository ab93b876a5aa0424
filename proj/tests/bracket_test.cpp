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

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "bracketrank/bracket.hpp"
#include "bracketrank/judge.hpp"
#include "test_util.hpp"

namespace bracketrank {
namespace {

using testing::MakeModels;
using testing::MakeTable;

std::vector<double> Ladder(std::size_t n, double top = 1500, double step = 25) {
  std::vector<double> r;
  for (std::size_t i = 0; i < n; ++i) r.push_back(top - step * static_cast<double>(i));
  return r;
}

TEST(BracketTest, PowerOfTwoFieldHasNoByes) {
  const auto models = MakeModels(8);
  const Bracket b = MakeBracket(models, "p", 1);
  EXPECT_EQ(b.slots.size(), 8u);
  EXPECT_EQ(b.byes(), 0u);
  EXPECT_EQ(b.rounds(), 3);
}

TEST(BracketTest, FiveModelsPadToEight) {
  const Bracket b = MakeBracket(MakeModels(5), "p", 1);
  EXPECT_EQ(b.slots.size(), 8u);
  EXPECT_EQ(b.byes(), 3u);
  EXPECT_EQ(b.rounds(), 3);
}

TEST(BracketTest, StructureForEveryFieldSize) {
  for (std::size_t n = 2; n <= 64; ++n) {
    const auto models = MakeModels(n);
    const Bracket b = MakeBracket(models, "prompt-" + std::to_string(n), n);
    EXPECT_EQ(b.slots.size(), std::bit_ceil(n));
    std::vector<ModelId> placed;
    for (std::size_t k = 0; k < b.slots.size(); k += 2) {
      EXPECT_FALSE(!b.slots[k] && !b.slots[k + 1]) << "bye meets bye at n=" << n;
    }
    for (const auto& s : b.slots) {
      if (s) placed.push_back(*s);
    }
    std::sort(placed.begin(), placed.end());
    EXPECT_EQ(placed, models);
  }
}

TEST(BracketTest, PureFunctionOfInputs) {
  const auto models = MakeModels(11);
  auto reversed = models;
  std::reverse(reversed.begin(), reversed.end());
  const Bracket a = MakeBracket(models, "p7", 99);
  EXPECT_EQ(a.slots, MakeBracket(models, "p7", 99).slots);
  EXPECT_EQ(a.slots, MakeBracket(reversed, "p7", 99).slots);
  EXPECT_NE(a.slots, MakeBracket(models, "p8", 99).slots);
  EXPECT_NE(a.slots, MakeBracket(models, "p7", 100).slots);
}

TEST(BracketTest, NeedsTwoModels) {
  try {
    MakeBracket(MakeModels(1), "p", 0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("need at least two participants"), std::string::npos);
  }
}

TEST(TournamentTest, OracleChampionIsTopRated) {
  const auto models = MakeModels(8);
  const JudgeSpec judge = DeterministicOracle{MakeTable(models, Ladder(8))};
  const PromptSet prompts = PromptSet::Synthetic(30);
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    const auto result =
        RunTournament(MakeBracket(models, prompts[p].id, 5), judge, prompts.View(p));
    EXPECT_EQ(result.champion, models[0]);
    EXPECT_EQ(result.records.size(), 7u);
    EXPECT_EQ(result.records.back().winner, result.champion);
  }
}

TEST(TournamentTest, TwoAndFivePlayers) {
  const auto two = MakeModels(2);
  const JudgeSpec judge2 = SimulatedUnbiased{0.7, MakeTable(two, {1000, 1000}), 4};
  const auto r2 = RunTournament(MakeBracket(two, "p", 0), judge2, PromptSet::Synthetic(1).View(0));
  ASSERT_EQ(r2.records.size(), 1u);
  EXPECT_EQ(r2.champion, r2.records[0].winner);

  const auto five = MakeModels(5);
  const JudgeSpec judge5 = SimulatedUnbiased{0.7, MakeTable(five, Ladder(5)), 4};
  const PromptSet prompts = PromptSet::Synthetic(40);
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    EXPECT_EQ(RunTournament(MakeBracket(five, prompts[p].id, p), judge5, prompts.View(p))
                  .records.size(),
              4u);
  }
}

// Reference bracket: split the shuffled field in halves, crown each half
// recursively, then play the two half winners.
ModelId RecursiveSingleElim(std::span<const ModelId> players, const JudgeSpec& judge,
                            PromptView prompt, std::vector<MatchRecord>& results) {
  if (players.size() == 1) return players[0];
  const std::size_t half = players.size() / 2;
  const ModelId left = RecursiveSingleElim(players.first(half), judge, prompt, results);
  const ModelId right = RecursiveSingleElim(players.subspan(half), judge, prompt, results);
  MatchRecord r = JudgeMatch(judge, prompt, left, right);
  results.push_back(r);
  return r.winner;
}

using MatchKey = std::tuple<std::string, std::string, std::string>;

std::vector<MatchKey> Keys(const std::vector<MatchRecord>& records) {
  std::vector<MatchKey> keys;
  for (const auto& r : records) keys.emplace_back(r.model_a.str(), r.model_b.str(), r.winner.str());
  std::sort(keys.begin(), keys.end());
  return keys;
}

TEST(TournamentTest, MatchesRecursiveHalvingAtFourAndEight) {
  for (std::size_t n : {4u, 8u}) {
    const auto models = MakeModels(n);
    const JudgeSpec judge = SimulatedUnbiased{0.8, MakeTable(models, Ladder(n, 1300, 40)), 11};
    const PromptSet prompts = PromptSet::Synthetic(200);
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      const Bracket bracket = MakeBracket(models, prompts[p].id, 21);
      std::vector<ModelId> order;
      for (const auto& s : bracket.slots) order.push_back(*s);
      std::vector<MatchRecord> recursive;
      const ModelId champion = RecursiveSingleElim(order, judge, prompts.View(p), recursive);
      const TournamentResult rounds = RunTournament(bracket, judge, prompts.View(p));
      EXPECT_EQ(rounds.champion, champion);
      EXPECT_EQ(Keys(rounds.records), Keys(recursive));
    }
  }
}

TEST(IteratedTest, MatchCountExamples) {
  EXPECT_EQ(ExpectedMatchCount(8, 10), 70);
  EXPECT_EQ(ExpectedMatchCount(2, 1), 1);
  EXPECT_EQ(ExpectedMatchCount(20, 500), 9500);
  EXPECT_THROW(ExpectedMatchCount(1, 5), DataError);
  EXPECT_THROW(ExpectedMatchCount(4, 0), DataError);

  for (auto [n, x] : {std::pair<std::size_t, std::size_t>{8, 10}, {20, 500}, {2, 1}}) {
    const auto models = MakeModels(n);
    const JudgeSpec judge = SimulatedUnbiased{0.9, MakeTable(models, Ladder(n)), 1};
    const MatchLedger ledger = RunIteratedTournaments(models, PromptSet::Synthetic(x), judge, 3);
    EXPECT_EQ(ledger.size(), static_cast<std::size_t>(ExpectedMatchCount(n, x)));
  }
}

TEST(IteratedTest, AppearancesWithinBounds) {
  for (std::size_t n : {3u, 7u, 16u, 33u, 64u}) {
    const auto models = MakeModels(n);
    const JudgeSpec judge = SimulatedUnbiased{0.75, MakeTable(models, Ladder(n, 1400, 10)), n};
    const std::size_t x = 25;
    const PromptSet prompts = PromptSet::Synthetic(x);
    const MatchLedger ledger = RunIteratedTournaments(models, prompts, judge, 8);
    EXPECT_EQ(ledger.size(), x * (n - 1));
    std::map<std::pair<std::string, ModelId>, int> per_prompt;
    std::map<ModelId, int> total;
    for (const auto& r : ledger.records()) {
      for (const auto& m : {r.model_a, r.model_b}) {
        ++per_prompt[{r.prompt_id, m}];
        ++total[m];
      }
    }
    EXPECT_EQ(per_prompt.size(), x * n);
    for (const auto& [key, count] : per_prompt) {
      EXPECT_GE(count, 1);
      EXPECT_LE(count, RoundsFor(n));
    }
    for (const auto& [m, count] : total) {
      EXPECT_GE(count, static_cast<int>(x));
      EXPECT_LE(count, static_cast<int>(x) * RoundsFor(n));
    }
  }
}

TEST(IteratedTest, ThreadCountDoesNotChangeLedger) {
  const auto models = MakeModels(13);
  const JudgeSpec judge = SimulatedUnbiased{0.8, MakeTable(models, Ladder(13)), 2};
  const PromptSet prompts = PromptSet::Synthetic(60);
  TournamentOptions one, many;
  many.threads = 8;
  EXPECT_EQ(RunIteratedTournaments(models, prompts, judge, 5, one),
            RunIteratedTournaments(models, prompts, judge, 5, many));
}

TEST(IteratedTest, JudgeFailureKeepsFinishedPrefix) {
  const auto models = MakeModels(4);
  const PromptSet prompts = PromptSet::Synthetic(6);
  // A cache covering only the first three prompts.
  const JudgeSpec oracle = DeterministicOracle{MakeTable(models, Ladder(4))};
  auto cache = std::make_shared<MatchCache>();
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) {
        const MatchRecord r = JudgeMatch(oracle, prompts.View(p), models[i], models[j]);
        cache->Insert(prompts[p].id, {models[i], models[j], r.winner});
      }
    }
  }
  const JudgeSpec cached = Cached{cache};
  for (unsigned threads : {1u, 4u}) {
    TournamentOptions opt;
    opt.threads = threads;
    try {
      RunIteratedTournaments(models, prompts, cached, 1, opt);
      FAIL() << "cache hole not reported";
    } catch (const PartialLedgerError& e) {
      EXPECT_EQ(e.resume_from(), 3u);
      EXPECT_EQ(e.partial().size(), 9u);
      EXPECT_EQ(e.prompt_id(), "sim-3");
    }
  }
  // Resuming from the marker with a complete judge finishes the ledger.
  TournamentOptions resume;
  resume.start_ordinal = 3;
  const MatchLedger rest = RunIteratedTournaments(models, prompts, oracle, 1, resume);
  EXPECT_EQ(rest.size(), 9u);
  EXPECT_EQ(rest.records().front().prompt_id, "sim-3");
}

}  // namespace
}  // namespace bracketrank
