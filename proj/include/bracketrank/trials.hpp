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

// Repeated-trial comparisons of the tournament and anchored approaches, on
// simulated judges (ground truth known) or on a full-grid verdict cache.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bracketrank/anchored.hpp"
#include "bracketrank/bracket.hpp"
#include "bracketrank/core.hpp"
#include "bracketrank/error.hpp"
#include "bracketrank/judge.hpp"
#include "bracketrank/parallel.hpp"
#include "bracketrank/random.hpp"
#include "bracketrank/rating.hpp"
#include "bracketrank/stats.hpp"
#include "bracketrank/text.hpp"

namespace bracketrank {

enum class Approach { kTournament, kAnchored };

inline std::string_view ApproachName(Approach a) {
  return a == Approach::kTournament ? "tournament" : "anchored";
}

struct TrialRow {
  std::int64_t trial_id = 0;
  Approach approach = Approach::kTournament;
  double spearman = 0;
  std::int64_t matches = 0;

  friend bool operator==(const TrialRow&, const TrialRow&) = default;
};

struct ArmSummary {
  Approach approach = Approach::kTournament;
  std::size_t trials = 0;
  double median = 0;
  double ci_low = 0;
  double ci_high = 0;
};

struct TrialReport {
  // Sorted by trial id, tournament before anchored within a trial.
  std::vector<TrialRow> rows;
  std::vector<ArmSummary> summaries;

  std::vector<double> Spearmans(Approach approach) const {
    std::vector<double> out;
    for (const auto& r : rows) {
      if (r.approach == approach) out.push_back(r.spearman);
    }
    return out;
  }

  const ArmSummary* Summary(Approach approach) const {
    for (const auto& s : summaries) {
      if (s.approach == approach) return &s;
    }
    return nullptr;
  }
};

struct BootstrapConfig {
  std::size_t resamples = 1000;
  double level = 0.95;
};

enum class SimulatedJudgeKind { kSimulated, kOracle };

struct SimulationConfig {
  std::shared_ptr<const RatingTable> gt_ratings;
  std::size_t n_models = 0;
  std::size_t n_prompts = 0;
  double judge_precision = 1.0;
  std::size_t trials = 50;
  // Reference for the anchored arm; without one only the tournament arm runs.
  std::optional<ModelId> ref_model;
  std::uint64_t seed = 0;
  SimulatedJudgeKind judge_kind = SimulatedJudgeKind::kSimulated;
  unsigned threads = 1;
  FitConfig fit;
  BootstrapConfig bootstrap;

  void Validate() const {
    if (!gt_ratings) throw UsageError("simulation needs ground-truth ratings");
    if (n_models < 2) throw UsageError("n_models must be at least 2");
    if (n_models > gt_ratings->ratings.size()) {
      throw UsageError("n_models " + std::to_string(n_models) + " exceeds the " +
                       std::to_string(gt_ratings->ratings.size()) + " rated models");
    }
    if (n_prompts < 1) throw UsageError("n_prompts must be at least 1");
    if (!(judge_precision >= 0.0 && judge_precision <= 1.0)) {
      throw UsageError("judge precision must lie in [0, 1]");
    }
    if (trials < 1) throw UsageError("trials must be at least 1");
    if (ref_model && !gt_ratings->contains(*ref_model)) {
      throw DataError("reference model '" + ref_model->str() + "' has no rating");
    }
    fit.Validate();
  }
};

// The top `n_models` by rating, excluding `exclude`. Of several models with
// exactly the same rating only the lexicographically smallest is eligible.
inline std::vector<ModelId> SelectParticipants(const RatingTable& gt, std::size_t n_models,
                                               const std::optional<ModelId>& exclude) {
  std::vector<std::pair<ModelId, double>> eligible;
  std::optional<double> last;
  const Leaderboard board = RankFromScores(gt.ratings);
  for (const auto& entry : board.entries()) {
    if (exclude && entry.model == *exclude) continue;
    if (last && *last == entry.score) continue;  // RankFromScores puts the smallest id first
    eligible.emplace_back(entry.model, entry.score);
    last = entry.score;
  }
  if (eligible.size() < n_models) {
    throw DataError("only " + std::to_string(eligible.size()) +
                    " models remain after removing the reference and tied ratings; need " +
                    std::to_string(n_models));
  }
  std::vector<ModelId> out;
  for (std::size_t i = 0; i < n_models; ++i) out.push_back(eligible[i].first);
  return out;
}

inline Leaderboard GroundTruthLeaderboard(const RatingTable& gt,
                                          std::span<const ModelId> participants) {
  std::map<ModelId, double> scores;
  for (const auto& m : participants) scores.emplace(m, gt.at(m));
  return RankFromScores(scores);
}

namespace trials_internal {

struct ArmOutcome {
  double spearman;
  std::int64_t matches;
};

inline ArmOutcome TournamentArm(std::span<const ModelId> participants,
                                const PromptSet& prompts, const JudgeSpec& judge,
                                std::uint64_t bracket_seed, std::int64_t trial_id,
                                const FitConfig& fit, const Leaderboard& gt) {
  TournamentOptions options;
  options.trial_id = trial_id;
  const MatchLedger ledger =
      RunIteratedTournaments(participants, prompts, judge, bracket_seed, options);
  const RatingTable table = FitElo(ledger, fit);
  return {Spearman(RankFromScores(table.ratings), gt),
          static_cast<std::int64_t>(ledger.size())};
}

inline ArmOutcome AnchoredArm(std::span<const ModelId> participants,
                              const PromptSet& prompts, const ModelId& ref,
                              const JudgeSpec& judge, std::int64_t trial_id,
                              const Leaderboard& gt) {
  AnchoredOptions options;
  options.trial_id = trial_id;
  const AnchoredRun run = RunAnchoredComparison(participants, prompts, ref, judge, options);
  return {Spearman(RankFromScores(run.scores), gt),
          static_cast<std::int64_t>(run.ledger.size())};
}

// Runs `trial(t)` for every trial in parallel and assembles the report in
// trial order, so the output does not depend on scheduling.
template <typename TrialFn>
TrialReport Assemble(std::size_t trials, unsigned threads, bool anchored,
                     std::uint64_t seed, const BootstrapConfig& bootstrap,
                     TrialFn trial) {
  std::vector<std::pair<ArmOutcome, std::optional<ArmOutcome>>> results(
      trials, {ArmOutcome{0, 0}, std::nullopt});
  ParallelFor(trials, threads, [&](std::size_t t) { results[t] = trial(t); });

  TrialReport report;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto id = static_cast<std::int64_t>(t);
    report.rows.push_back(
        {id, Approach::kTournament, results[t].first.spearman, results[t].first.matches});
    if (results[t].second) {
      report.rows.push_back(
          {id, Approach::kAnchored, results[t].second->spearman, results[t].second->matches});
    }
  }
  std::vector<Approach> arms{Approach::kTournament};
  if (anchored) arms.push_back(Approach::kAnchored);
  for (Approach a : arms) {
    const auto values = report.Spearmans(a);
    const BootstrapInterval ci = BootstrapCi(values, bootstrap.resamples, bootstrap.level,
                                             StreamKey(seed, "summary", ApproachName(a)));
    report.summaries.push_back({a, values.size(), Median(values), ci.lo, ci.hi});
  }
  return report;
}

}  // namespace trials_internal

// Simulated comparison: per trial a fresh judge stream and fresh brackets,
// both derived from (seed, trial_id).
inline TrialReport RunSimulationGrid(const SimulationConfig& config) {
  config.Validate();
  const RatingTable& gt_table = *config.gt_ratings;
  const auto participants = SelectParticipants(gt_table, config.n_models, config.ref_model);
  const Leaderboard gt = GroundTruthLeaderboard(gt_table, participants);
  const PromptSet prompts = PromptSet::Synthetic(config.n_prompts);

  return trials_internal::Assemble(
      config.trials, config.threads, config.ref_model.has_value(), config.seed,
      config.bootstrap, [&](std::size_t t) {
        const auto trial_id = static_cast<std::int64_t>(t);
        const std::uint64_t trial_seed = StreamKey(config.seed, "trial", t);
        JudgeSpec judge;
        if (config.judge_kind == SimulatedJudgeKind::kOracle) {
          judge = DeterministicOracle{config.gt_ratings};
        } else {
          judge = SimulatedUnbiased{config.judge_precision, config.gt_ratings,
                                    StreamKey(trial_seed, "judge")};
        }
        std::pair<trials_internal::ArmOutcome, std::optional<trials_internal::ArmOutcome>>
            out{trials_internal::TournamentArm(participants, prompts, judge,
                                               StreamKey(trial_seed, "brackets"), trial_id,
                                               config.fit, gt),
                std::nullopt};
        if (config.ref_model) {
          out.second = trials_internal::AnchoredArm(participants, prompts, *config.ref_model,
                                                    judge, trial_id, gt);
        }
        return out;
      });
}

struct EmpiricalConfig {
  std::size_t n_prompts_subset = 0;  // 0 means the full prompt set
  std::size_t trials = 500;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  FitConfig fit;
  BootstrapConfig bootstrap;
};

// Replays cached verdicts: per trial a stratified prompt subset and fresh
// brackets. A cache hole surfaces as a JudgeError naming the prompt and pair.
inline TrialReport RunEmpiricalTrials(const PromptSet& prompts,
                                      std::shared_ptr<const MatchCache> cache,
                                      std::span<const ModelId> participants,
                                      const std::optional<ModelId>& ref_model,
                                      const Leaderboard& gt_order,
                                      const EmpiricalConfig& config) {
  if (!cache) throw UsageError("empirical trials need a verdict cache");
  if (config.trials < 1) throw UsageError("trials must be at least 1");
  const auto models = SortedUniqueModels(participants);
  if (models.size() < 2) throw DataError("need at least two participants");
  {
    auto gt_models = gt_order.Order();
    std::sort(gt_models.begin(), gt_models.end());
    if (gt_models != models) {
      throw DataError("ground-truth leaderboard must rank exactly the participants");
    }
  }
  const std::size_t k = config.n_prompts_subset == 0 ? prompts.size() : config.n_prompts_subset;
  if (k > prompts.size()) {
    throw UsageError("subset size " + std::to_string(k) + " exceeds the " +
                     std::to_string(prompts.size()) + " prompts");
  }
  config.fit.Validate();
  const JudgeSpec judge = Cached{std::move(cache)};

  return trials_internal::Assemble(
      config.trials, config.threads, ref_model.has_value(), config.seed, config.bootstrap,
      [&](std::size_t t) {
        const auto trial_id = static_cast<std::int64_t>(t);
        const std::uint64_t trial_seed = StreamKey(config.seed, "trial", t);
        const PromptSet subset =
            StratifiedSubsample(prompts, k, StreamKey(trial_seed, "subset"));
        std::pair<trials_internal::ArmOutcome, std::optional<trials_internal::ArmOutcome>>
            out{trials_internal::TournamentArm(models, subset, judge,
                                               StreamKey(trial_seed, "brackets"), trial_id,
                                               config.fit, gt_order),
                std::nullopt};
        if (ref_model) {
          out.second =
              trials_internal::AnchoredArm(models, subset, *ref_model, judge, trial_id, gt_order);
        }
        return out;
      });
}

// Per-trial rows as TSV: trial_id, approach, spearman, matches.
inline void WriteTrialRows(const TrialReport& report, std::ostream& out) {
  out << "trial_id\tapproach\tspearman\tmatches\n";
  for (const auto& r : report.rows) {
    out << r.trial_id << '\t' << ApproachName(r.approach) << '\t'
        << text::FormatDouble(r.spearman) << '\t' << r.matches << '\n';
  }
}

}  // namespace bracketrank
