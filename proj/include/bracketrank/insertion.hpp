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

// Placing one new model into an existing leaderboard without rerunning the
// tournaments. Three strategies:
//
//   BinarySearchPlacement     probe the midpoint of the remaining range with
//                             a block of head-to-head matches and move up on
//                             a majority of wins, down on a majority of
//                             losses.
//   AnchoredInsertion         score the newcomer by its win rate against a
//                             reference model.
//   ImputedWinrateInsertion   same, but the incumbents' win rates against the
//                             anchor come from the existing ledger, or from
//                             their Elo ratings where the ledger is thin.

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bracketrank/core.hpp"
#include "bracketrank/error.hpp"
#include "bracketrank/judge.hpp"
#include "bracketrank/random.hpp"
#include "bracketrank/rating.hpp"

namespace bracketrank {

struct PlacementProbe {
  std::size_t mid = 0;
  std::size_t wins = 0;
  std::size_t matches = 0;
};

struct PlacementResult {
  // Index in leaderboard order where the new model goes (0 = top).
  std::size_t position = 0;
  bool is_tie = false;
  std::vector<MatchRecord> records;
  std::size_t matches_used = 0;
  // Win rate of the new model, for the score-based strategies.
  std::optional<double> score;
  // Binary search bookkeeping.
  std::size_t n_comparisons = 0;
  std::size_t n_matches = 0;
  std::vector<PlacementProbe> probes;
};

struct BinarySearchPlan {
  std::size_t n_comparisons;  // floor(log2 |L|)
  std::size_t n_matches;      // floor(|X| / n_comparisons)
};

inline BinarySearchPlan PlanBinarySearch(std::size_t leaderboard_size,
                                         std::size_t n_prompts) {
  if (leaderboard_size < 2) {
    throw DataError("binary search placement needs a leaderboard of at least two models");
  }
  const std::size_t n_comparisons = std::bit_width(leaderboard_size) - 1;
  if (!(n_prompts > leaderboard_size && leaderboard_size > n_comparisons)) {
    throw DataError("binary search placement needs |X| > |L| > floor(log2 |L|); got |X|=" +
                    std::to_string(n_prompts) + ", |L|=" +
                    std::to_string(leaderboard_size));
  }
  return {n_comparisons, n_prompts / n_comparisons};
}

inline PlacementResult BinarySearchPlacement(std::span<const ModelId> leaderboard,
                                             const ModelId& new_model,
                                             const PromptSet& prompts,
                                             const JudgeSpec& judge, std::uint64_t seed,
                                             const OutputStore* outputs = nullptr) {
  ValidateJudge(judge);
  if (std::find(leaderboard.begin(), leaderboard.end(), new_model) != leaderboard.end()) {
    throw DataError("'" + new_model.str() + "' is already on the leaderboard");
  }
  const BinarySearchPlan plan = PlanBinarySearch(leaderboard.size(), prompts.size());

  // Shuffled prompt ordinals, concatenated with themselves; popped from the back.
  std::vector<std::size_t> queue(prompts.size());
  std::iota(queue.begin(), queue.end(), std::size_t{0});
  CounterStream stream(StreamKey(seed, "binary-search", new_model.str()));
  Shuffle(std::span<std::size_t>(queue), stream);
  queue.insert(queue.end(), queue.begin(), queue.end());

  PlacementResult result;
  result.n_comparisons = plan.n_comparisons;
  result.n_matches = plan.n_matches;

  std::ptrdiff_t low = 0;
  std::ptrdiff_t high = static_cast<std::ptrdiff_t>(leaderboard.size()) - 1;
  // Without exact splits the loop runs at most floor(log2 |L|) + 1 probes,
  // which the doubled queue always covers. Repeated splits can drain it; the
  // last probe then uses whatever is left.
  while (low <= high && !queue.empty()) {
    const std::ptrdiff_t mid = (low + high) / 2;
    const ModelId& incumbent = leaderboard[static_cast<std::size_t>(mid)];
    const std::size_t take = std::min(plan.n_matches, queue.size());
    std::size_t wins = 0;
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t ordinal = queue.back();
      queue.pop_back();
      MatchRecord r = JudgeMatch(judge, prompts.View(ordinal), new_model, incumbent, outputs);
      if (r.winner == new_model) ++wins;
      result.records.push_back(std::move(r));
    }
    result.matches_used += take;
    result.probes.push_back({static_cast<std::size_t>(mid), wins, take});

    // Compare 2 * wins against the probe size to avoid halving an odd count.
    if (2 * wins > take) {
      high = mid - 1;
    } else if (2 * wins < take) {
      low = mid + 1;
    } else if (!queue.empty()) {
      continue;  // exact split: replay the same midpoint on fresh prompts
    } else {
      result.position = static_cast<std::size_t>(mid);
      result.is_tie = true;
      return result;
    }
  }
  result.position = static_cast<std::size_t>(low);
  return result;
}

// Inserts `model` at `position`. On a tie it takes the score (and so the
// rank) of the incumbent at `position`; otherwise its score is interpolated
// between the neighbours so the board stays sorted.
inline Leaderboard InsertIntoLeaderboard(const Leaderboard& board, const ModelId& model,
                                         std::size_t position, bool is_tie) {
  const auto entries = board.entries();
  if (position > entries.size()) throw DataError("insert position past the end");
  if (is_tie && position >= entries.size()) {
    throw DataError("tie insert needs an incumbent at the position");
  }
  double score = 0;
  if (is_tie) {
    score = entries[position].score;
  } else if (entries.empty()) {
    score = 0;
  } else if (position == 0) {
    score = entries.front().score + 1.0;
  } else if (position == entries.size()) {
    score = entries.back().score - 1.0;
  } else {
    score = 0.5 * (entries[position - 1].score + entries[position].score);
  }
  std::vector<std::pair<ModelId, double>> rows;
  rows.reserve(entries.size() + 1);
  for (std::size_t i = 0; i <= entries.size(); ++i) {
    if (i == position) rows.emplace_back(model, score);
    if (i < entries.size()) rows.emplace_back(entries[i].model, entries[i].score);
  }
  return Leaderboard::FromOrdered(rows);
}

// Places a scored newcomer among scored incumbents: below every incumbent
// whose score is at least as high.
inline std::size_t ScorePosition(const std::map<ModelId, double>& incumbents,
                                 double new_score) {
  return static_cast<std::size_t>(std::count_if(
      incumbents.begin(), incumbents.end(),
      [&](const auto& kv) { return kv.second >= new_score; }));
}

// Incumbents in score order with the newcomer inserted at `position`.
inline Leaderboard ScoredLeaderboard(const std::map<ModelId, double>& incumbents,
                                     const ModelId& new_model, double new_score) {
  const Leaderboard board = RankFromScores(incumbents);
  const std::size_t position = ScorePosition(incumbents, new_score);
  std::vector<std::pair<ModelId, double>> rows;
  for (std::size_t i = 0; i <= board.size(); ++i) {
    if (i == position) rows.emplace_back(new_model, new_score);
    if (i < board.size()) rows.emplace_back(board.entries()[i].model, board.entries()[i].score);
  }
  return Leaderboard::FromOrdered(rows);
}

namespace insertion_internal {

inline std::pair<std::vector<MatchRecord>, double> PlayAgainst(
    const ModelId& new_model, const ModelId& opponent, const PromptSet& prompts,
    const JudgeSpec& judge, const OutputStore* outputs) {
  std::vector<MatchRecord> records;
  records.reserve(prompts.size());
  std::size_t wins = 0;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    MatchRecord r = JudgeMatch(judge, prompts.View(p), new_model, opponent, outputs);
    if (r.winner == new_model) ++wins;
    records.push_back(std::move(r));
  }
  return {std::move(records),
          static_cast<double>(wins) / static_cast<double>(prompts.size())};
}

}  // namespace insertion_internal

// `existing_scores` are win rates against `ref_model` over the same prompts.
inline PlacementResult AnchoredInsertion(const std::map<ModelId, double>& existing_scores,
                                         const ModelId& new_model, const PromptSet& prompts,
                                         const JudgeSpec& judge, const ModelId& ref_model,
                                         const OutputStore* outputs = nullptr) {
  ValidateJudge(judge);
  if (new_model == ref_model) throw DataError("new model cannot be the reference");
  if (existing_scores.contains(new_model)) {
    throw DataError("'" + new_model.str() + "' is already scored");
  }
  auto [records, score] =
      insertion_internal::PlayAgainst(new_model, ref_model, prompts, judge, outputs);
  PlacementResult result;
  result.records = std::move(records);
  result.matches_used = prompts.size();
  result.score = score;
  result.position = ScorePosition(existing_scores, score);
  return result;
}

struct ImputedPlacement {
  PlacementResult placement;
  // Incumbent win rates against the anchor (anchor itself at 0.5).
  std::map<ModelId, double> incumbent_scores;
  // Incumbents whose score came from the ledger rather than their rating.
  std::vector<ModelId> direct;
};

inline ImputedPlacement ImputedWinrateInsertion(
    const RatingTable& table, const MatchLedger& ledger, const ModelId& anchor,
    const ModelId& new_model, const PromptSet& prompts, const JudgeSpec& judge,
    const OutputStore* outputs = nullptr, std::size_t min_direct_matches = 20) {
  ValidateJudge(judge);
  if (!table.contains(anchor)) {
    throw DataError("anchor '" + anchor.str() + "' is not in the rating table");
  }
  if (table.contains(new_model)) {
    throw DataError("'" + new_model.str() + "' is already in the rating table");
  }
  std::map<ModelId, std::pair<std::size_t, std::size_t>> direct;  // wins, games
  for (const auto& r : ledger.records()) {
    if (r.model_a != anchor && r.model_b != anchor) continue;
    const ModelId& other = r.model_a == anchor ? r.model_b : r.model_a;
    auto& [wins, games] = direct[other];
    ++games;
    if (r.winner == other) ++wins;
  }

  ImputedPlacement out;
  const auto from_ratings = WinrateVsAnchorFromRatings(table, anchor);
  for (const auto& [model, converted] : from_ratings) {
    double score = converted;
    if (model != anchor) {
      const auto it = direct.find(model);
      if (it != direct.end() && it->second.second >= min_direct_matches) {
        score = static_cast<double>(it->second.first) /
                static_cast<double>(it->second.second);
        out.direct.push_back(model);
      }
    }
    out.incumbent_scores.emplace(model, score);
  }

  auto [records, score] =
      insertion_internal::PlayAgainst(new_model, anchor, prompts, judge, outputs);
  out.placement.records = std::move(records);
  out.placement.matches_used = prompts.size();
  out.placement.score = score;
  out.placement.position = ScorePosition(out.incumbent_scores, score);
  return out;
}

}  // namespace bracketrank
