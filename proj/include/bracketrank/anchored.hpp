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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bracketrank/core.hpp"
#include "bracketrank/judge.hpp"
#include "bracketrank/parallel.hpp"
#include "bracketrank/rating.hpp"

namespace bracketrank {

struct AnchoredOptions {
  unsigned threads = 1;
  const OutputStore* outputs = nullptr;
  std::optional<std::int64_t> trial_id;
};

struct AnchoredRun {
  MatchLedger ledger;
  std::map<ModelId, double> scores;
};

// Every model plays the reference once per prompt: |X| * n matches.
inline AnchoredRun RunAnchoredComparison(std::span<const ModelId> models,
                                         const PromptSet& prompts,
                                         const ModelId& ref_model,
                                         const JudgeSpec& judge,
                                         const AnchoredOptions& options = {}) {
  ValidateJudge(judge);
  const auto participants = SortedUniqueModels(models);
  if (participants.empty()) throw DataError("no participants");
  for (const auto& m : participants) {
    if (m == ref_model) {
      throw DataError("reference model '" + ref_model.str() +
                      "' cannot also be a participant");
    }
  }
  std::vector<std::vector<MatchRecord>> per_prompt(prompts.size());
  ParallelFor(prompts.size(), options.threads, [&](std::size_t p) {
    const PromptView view = prompts.View(p);
    auto& out = per_prompt[p];
    out.reserve(participants.size());
    for (const auto& m : participants) {
      out.push_back(JudgeMatch(judge, view, m, ref_model, options.outputs, options.trial_id));
    }
  });
  AnchoredRun run;
  for (auto& records : per_prompt) {
    for (auto& r : records) run.ledger.Append(std::move(r));
  }
  run.scores = AnchoredScores(run.ledger, ref_model);
  return run;
}

}  // namespace bracketrank
