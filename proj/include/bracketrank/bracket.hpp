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

// Single-elimination brackets and iterated tournaments: one independently
// shuffled bracket per prompt, all matches pooled into one ledger.

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bracketrank/core.hpp"
#include "bracketrank/error.hpp"
#include "bracketrank/judge.hpp"
#include "bracketrank/parallel.hpp"
#include "bracketrank/random.hpp"

namespace bracketrank {

// Number of rounds needed for n players: ceil(log2 n).
constexpr int RoundsFor(std::size_t n) {
  return n <= 1 ? 0 : static_cast<int>(std::bit_width(n - 1));
}

struct Bracket {
  // Power-of-two slots; nullopt is a bye. Slots 2k and 2k+1 meet in round 1.
  std::vector<std::optional<ModelId>> slots;
  std::size_t real_models = 0;

  int rounds() const { return RoundsFor(real_models); }
  std::size_t byes() const { return slots.size() - real_models; }
};

// Shuffles the participants with a stream keyed by (seed, prompt_id) and
// pads to a power of two. Byes are spread over distinct first-round pairs,
// so no bye meets a bye and every bye disappears after round one.
inline Bracket MakeBracket(std::span<const ModelId> models, std::string_view prompt_id,
                           std::uint64_t seed) {
  if (models.size() < 2) throw DataError("need at least two participants");
  std::vector<ModelId> order = SortedUniqueModels(models);
  CounterStream stream(StreamKey(seed, "bracket", prompt_id));
  Shuffle(std::span<ModelId>(order), stream);

  const std::size_t n = order.size();
  const std::size_t slots = std::bit_ceil(n);
  const std::size_t pairs = slots / 2;
  const std::size_t byes = slots - n;  // < pairs because n > slots / 2

  std::vector<bool> bye_pair(pairs, false);
  for (std::size_t k = 0; k < byes; ++k) bye_pair[k * pairs / byes] = true;

  Bracket bracket;
  bracket.real_models = n;
  bracket.slots.reserve(slots);
  std::size_t next = 0;
  for (std::size_t p = 0; p < pairs; ++p) {
    bracket.slots.emplace_back(order[next++]);
    if (bye_pair[p]) {
      bracket.slots.emplace_back(std::nullopt);
    } else {
      bracket.slots.emplace_back(order[next++]);
    }
  }
  return bracket;
}

struct TournamentResult {
  ModelId champion;
  std::vector<MatchRecord> records;
};

// Plays the bracket round by round, matches in slot order. A bye advances
// its opponent without a record, so n real players yield n - 1 records.
inline TournamentResult RunTournament(const Bracket& bracket, const JudgeSpec& judge,
                                      PromptView prompt,
                                      const OutputStore* outputs = nullptr,
                                      std::optional<std::int64_t> trial_id = std::nullopt) {
  if (bracket.real_models < 2) throw DataError("need at least two participants");
  std::vector<std::optional<ModelId>> alive = bracket.slots;
  std::vector<MatchRecord> records;
  records.reserve(bracket.real_models - 1);
  while (alive.size() > 1) {
    std::vector<std::optional<ModelId>> next;
    next.reserve(alive.size() / 2);
    for (std::size_t k = 0; k + 1 < alive.size(); k += 2) {
      const auto& left = alive[k];
      const auto& right = alive[k + 1];
      if (!left || !right) {
        next.push_back(left ? left : right);
        continue;
      }
      MatchRecord r = JudgeMatch(judge, prompt, *left, *right, outputs, trial_id);
      next.push_back(r.winner);
      records.push_back(std::move(r));
    }
    alive = std::move(next);
  }
  return {*alive.front(), std::move(records)};
}

inline std::int64_t ExpectedMatchCount(std::int64_t n_models, std::int64_t n_prompts) {
  if (n_models < 2) throw DataError("need at least two participants");
  if (n_prompts < 1) throw DataError("need at least one prompt");
  return n_prompts * (n_models - 1);
}

// A judge failure stopped an iterated run. `partial` holds the records of
// every prompt before `resume_from`, which is the first prompt ordinal that
// did not finish.
class PartialLedgerError : public JudgeError {
 public:
  PartialLedgerError(const JudgeError& cause, MatchLedger partial, std::size_t resume_from)
      : JudgeError(cause), partial_(std::move(partial)), resume_from_(resume_from) {}

  const MatchLedger& partial() const noexcept { return partial_; }
  std::size_t resume_from() const noexcept { return resume_from_; }

 private:
  MatchLedger partial_;
  std::size_t resume_from_;
};

struct TournamentOptions {
  unsigned threads = 1;
  const OutputStore* outputs = nullptr;
  std::optional<std::int64_t> trial_id;
  // Prompts before this ordinal are skipped (resuming a stopped run).
  std::size_t start_ordinal = 0;
};

inline MatchLedger RunIteratedTournaments(std::span<const ModelId> models,
                                          const PromptSet& prompts,
                                          const JudgeSpec& judge, std::uint64_t seed,
                                          const TournamentOptions& options = {}) {
  if (models.size() < 2) throw DataError("need at least two participants");
  ValidateJudge(judge);
  const auto participants = SortedUniqueModels(models);
  const std::size_t start = std::min(options.start_ordinal, prompts.size());
  const std::size_t count = prompts.size() - start;

  std::vector<std::vector<MatchRecord>> per_prompt(count);
  std::vector<std::optional<JudgeError>> failures(count);
  ParallelFor(count, options.threads, [&](std::size_t k) {
    const std::size_t ordinal = start + k;
    const PromptView view = prompts.View(ordinal);
    const Bracket bracket = MakeBracket(participants, view.id, seed);
    try {
      per_prompt[k] =
          RunTournament(bracket, judge, view, options.outputs, options.trial_id).records;
    } catch (const JudgeError& e) {
      failures[k] = e;
    }
  });

  MatchLedger ledger;
  for (std::size_t k = 0; k < count; ++k) {
    if (failures[k]) throw PartialLedgerError(*failures[k], std::move(ledger), start + k);
    for (auto& r : per_prompt[k]) ledger.Append(std::move(r));
  }
  return ledger;
}

}  // namespace bracketrank
