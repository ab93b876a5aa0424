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

// The bracketrank subcommands, independent of flag parsing. Each command
// reads its inputs, writes data files and a manifest into the output
// directory, and returns a one-line JSON summary.

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bracketrank/anchored.hpp"
#include "bracketrank/bracket.hpp"
#include "bracketrank/core.hpp"
#include "bracketrank/error.hpp"
#include "bracketrank/insertion.hpp"
#include "bracketrank/io.hpp"
#include "bracketrank/judge.hpp"
#include "bracketrank/judge_http.hpp"
#include "bracketrank/parallel.hpp"
#include "bracketrank/random.hpp"
#include "bracketrank/rating.hpp"
#include "bracketrank/stats.hpp"
#include "bracketrank/text.hpp"
#include "bracketrank/trials.hpp"
#include "json.hpp"

#ifndef BRACKETRANK_VERSION
#define BRACKETRANK_VERSION "0.0.0"
#endif

namespace bracketrank {

inline constexpr std::string_view kVersion = BRACKETRANK_VERSION;

using LogFn = std::function<void(const std::string&)>;

struct CommonOptions {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  unsigned threads = 0;  // 0: all hardware threads
  // Resolved configuration, recorded verbatim in the manifest.
  std::string config_dump;
  LogFn log;
};

// ---------------------------------------------------------------- judges

enum class JudgeKind { kOracle, kSimulated, kCache, kExternal };

struct JudgeFlag {
  JudgeKind kind = JudgeKind::kOracle;
  double precision = 1.0;  // simulated
  std::string target;      // cache path or endpoint URL
};

// oracle | simulated:<precision> | cache:<path> | external:<url>
inline JudgeFlag ParseJudgeFlag(std::string_view flag) {
  const auto colon = flag.find(':');
  const std::string_view kind = flag.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view{} : flag.substr(colon + 1);
  if (kind == "oracle" && colon == std::string_view::npos) return {JudgeKind::kOracle, 1.0, {}};
  if (kind == "simulated") {
    const auto p = text::ParseDouble(arg);
    if (!p || !(*p >= 0.0 && *p <= 1.0)) {
      throw UsageError("--judge simulated:<precision> needs a precision in [0, 1], got '" +
                       std::string(arg) + "'");
    }
    return {JudgeKind::kSimulated, *p, {}};
  }
  if (kind == "cache" && !arg.empty()) return {JudgeKind::kCache, 1.0, std::string(arg)};
  if (kind == "external" && !arg.empty()) return {JudgeKind::kExternal, 1.0, std::string(arg)};
  throw UsageError("--judge must be oracle, simulated:<precision>, cache:<path> or "
                   "external:<url>; got '" + std::string(flag) + "'");
}

struct JudgeOptions {
  std::string judge = "oracle";
  // Ground-truth ratings for the oracle and simulated judges.
  std::optional<std::filesystem::path> gt_ratings;
  // External judge settings.
  std::optional<std::filesystem::path> prompt_template;
  std::string auth_env;
  int retries = 3;
  int timeout_ms = 60000;
  int backoff_ms = 500;
  // Replaces the HTTP client (tests).
  HttpTransport transport;
};

struct ResolvedJudge {
  JudgeFlag flag;
  JudgeSpec spec;
  std::shared_ptr<const RatingTable> gt_ratings;  // oracle and simulated only
  std::shared_ptr<const MatchCache> cache;        // cache only
};

inline ResolvedJudge MakeJudge(const JudgeOptions& options, std::uint64_t seed) {
  ResolvedJudge out;
  out.flag = ParseJudgeFlag(options.judge);
  switch (out.flag.kind) {
    case JudgeKind::kOracle:
    case JudgeKind::kSimulated: {
      if (!options.gt_ratings) {
        throw UsageError("--judge " + options.judge + " needs --gt-ratings");
      }
      out.gt_ratings = std::make_shared<const RatingTable>(ReadRatingTable(*options.gt_ratings));
      if (out.flag.kind == JudgeKind::kOracle) {
        out.spec = DeterministicOracle{out.gt_ratings};
      } else {
        out.spec = SimulatedUnbiased{out.flag.precision, out.gt_ratings,
                                     StreamKey(seed, "judge")};
      }
      break;
    }
    case JudgeKind::kCache:
      out.cache = std::make_shared<const MatchCache>(ReadCache(out.flag.target));
      out.spec = Cached{out.cache};
      break;
    case JudgeKind::kExternal: {
      External ext;
      ext.endpoint = out.flag.target;
      if (options.prompt_template) ext.prompt_template = LoadPromptTemplate(*options.prompt_template);
      ext.auth_env = options.auth_env;
      ext.retries = options.retries;
      ext.timeout = std::chrono::milliseconds(options.timeout_ms);
      ext.backoff = std::chrono::milliseconds(options.backoff_ms);
      ext.transport = options.transport ? options.transport : MakeHttplibTransport();
      out.spec = std::move(ext);
      break;
    }
  }
  ValidateJudge(out.spec);
  return out;
}

// ---------------------------------------------------------------- inputs

namespace commands_internal {

inline void Log(const CommonOptions& common, const std::string& message) {
  if (common.log) common.log(message);
}

inline std::vector<ModelId> ToModels(const std::vector<std::string>& names) {
  std::vector<ModelId> out;
  out.reserve(names.size());
  for (const auto& n : names) out.emplace_back(n);
  return SortedUniqueModels(out);
}

inline std::vector<ModelId> CacheModels(const MatchCache& cache) {
  std::set<ModelId> seen;
  for (const auto& [key, entry] : cache.entries()) {
    seen.insert(entry.first);
    seen.insert(entry.second);
  }
  return {seen.begin(), seen.end()};
}

// Explicit list, else every model the judge knows about, minus `exclude`.
inline std::vector<ModelId> ResolveModels(const std::vector<std::string>& names,
                                          const ResolvedJudge& judge,
                                          const std::vector<ModelId>& exclude = {}) {
  std::vector<ModelId> models;
  if (!names.empty()) {
    models = ToModels(names);
  } else if (judge.gt_ratings) {
    for (const auto& [m, r] : judge.gt_ratings->ratings) models.push_back(m);
  } else if (judge.cache) {
    models = CacheModels(*judge.cache);
  } else {
    throw UsageError("--models is required with this judge");
  }
  std::erase_if(models, [&](const ModelId& m) {
    return std::find(exclude.begin(), exclude.end(), m) != exclude.end();
  });
  return models;
}

inline PromptSet ResolvePrompts(const std::optional<std::filesystem::path>& path,
                                std::size_t n_prompts) {
  if (path) return LoadPromptSet(*path);
  if (n_prompts > 0) return PromptSet::Synthetic(n_prompts);
  throw UsageError("either --prompts or --n-prompts is required");
}

// Loads model outputs when given; the external judge cannot work without.
inline std::optional<OutputStore> ResolveOutputs(
    const std::optional<std::filesystem::path>& path, const ResolvedJudge& judge,
    std::span<const ModelId> models, const PromptSet& prompts) {
  if (path) return LoadOutputStore(*path, models, prompts);
  if (judge.flag.kind == JudgeKind::kExternal) {
    throw UsageError("--judge external needs --outputs");
  }
  return std::nullopt;
}

inline std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void WriteJson(const nlohmann::json& doc, const std::filesystem::path& path) {
  auto out = io_internal::OpenForWrite(path);
  out << doc.dump(2) << '\n';
  io_internal::CheckWritten(out, path);
}

inline void WriteManifest(const CommonOptions& common, std::string_view command,
                          const std::vector<std::string>& files) {
  nlohmann::json doc = {
      {"tool", "bracketrank"},
      {"version", std::string(kVersion)},
      {"command", std::string(command)},
      {"seed", common.seed},
      {"threads", ResolveThreads(common.threads)},
      {"config", common.config_dump},
      {"outputs", files},
      {"timestamp", UtcTimestamp()},
  };
  WriteJson(doc, common.out_dir / "manifest.json");
}

inline nlohmann::json BoardSummary(const Leaderboard& board) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& e : board.entries()) {
    if (top.size() == 3) break;
    top.push_back(e.model.str());
  }
  return top;
}

}  // namespace commands_internal

// ---------------------------------------------------------------- rank

struct RankOptions {
  CommonOptions common;
  JudgeOptions judge;
  std::optional<std::filesystem::path> prompts;
  std::size_t n_prompts = 0;  // synthetic prompts when no file is given
  std::optional<std::filesystem::path> outputs;
  std::vector<std::string> models;
  // More than one trial replays the tournaments with fresh brackets and
  // reports per-model bootstrap intervals.
  std::size_t trials = 1;
  bool resume = false;
  FitConfig fit;
  std::string format = "csv";  // leaderboard format: csv or json
};

// Runs the iterated tournaments, fits ratings and writes ledger.tsv,
// ratings.json, leaderboard.{csv,json} and manifest.json. A judge failure
// leaves the finished prompts in ledger.tsv with a resume marker.
inline nlohmann::json CmdRank(const RankOptions& opt) {
  using namespace commands_internal;
  const auto& common = opt.common;
  if (opt.format != "csv" && opt.format != "json") {
    throw UsageError("--format must be csv or json");
  }
  if (opt.trials < 1) throw UsageError("--trials must be at least 1");
  if (opt.resume && opt.trials > 1) throw UsageError("--resume needs --trials 1");
  opt.fit.Validate();

  const ResolvedJudge judge = MakeJudge(opt.judge, common.seed);
  const PromptSet prompts = ResolvePrompts(opt.prompts, opt.n_prompts);
  const auto models = ResolveModels(opt.models, judge);
  if (models.size() < 2) throw DataError("need at least two participants");
  const auto outputs = ResolveOutputs(opt.outputs, judge, models, prompts);
  const unsigned threads = ResolveThreads(common.threads);
  const auto ledger_path = common.out_dir / "ledger.tsv";
  Log(common, "rank: " + std::to_string(models.size()) + " models, " +
                  std::to_string(prompts.size()) + " prompts, judge " + JudgeId(judge.spec));

  TournamentOptions topt;
  topt.threads = threads;
  topt.outputs = outputs ? &*outputs : nullptr;

  MatchLedger ledger;
  Leaderboard board;
  RatingTable table;
  if (opt.trials == 1) {
    MatchLedger prior;
    if (opt.resume && std::filesystem::exists(ledger_path)) {
      LedgerFile existing = ReadLedger(ledger_path);
      prior = std::move(existing.ledger);
      topt.start_ordinal = existing.resume_from.value_or(prompts.size());
      Log(common, "resuming at prompt " + std::to_string(topt.start_ordinal) + " with " +
                      std::to_string(prior.size()) + " records");
    }
    try {
      ledger = MatchLedger::Concat(
          prior, RunIteratedTournaments(models, prompts, judge.spec,
                                        StreamKey(common.seed, "brackets"), topt));
    } catch (const PartialLedgerError& e) {
      WriteLedger(MatchLedger::Concat(prior, e.partial()), ledger_path, e.resume_from());
      Log(common, "judge failure; partial ledger written, rerun with --resume");
      throw;
    }
    table = FitElo(ledger, opt.fit);
    board = RankFromScores(table.ratings);
  } else {
    std::map<ModelId, std::vector<double>> per_model;
    for (std::size_t t = 0; t < opt.trials; ++t) {
      topt.trial_id = static_cast<std::int64_t>(t);
      const MatchLedger trial = RunIteratedTournaments(
          models, prompts, judge.spec, StreamKey(common.seed, "trial", t, "brackets"), topt);
      for (const auto& [m, r] : FitElo(trial, opt.fit).ratings) per_model[m].push_back(r);
      ledger.Append(trial);
    }
    table = FitElo(ledger, opt.fit);
    std::vector<std::pair<ModelId, double>> rows;
    std::map<ModelId, std::pair<double, double>> cis;
    for (const auto& [m, values] : per_model) {
      const auto ci = BootstrapCi(values, 1000, 0.95, StreamKey(common.seed, "ci", m.str()));
      rows.emplace_back(m, ci.median);
      cis.emplace(m, std::pair{ci.lo, ci.hi});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::pair<double, double>> ordered_cis;
    for (const auto& [m, s] : rows) ordered_cis.push_back(cis.at(m));
    board = Leaderboard::FromOrdered(rows, ordered_cis);
  }

  WriteLedger(ledger, ledger_path);
  WriteRatingTable(table, common.out_dir / "ratings.json");
  const std::string board_file = "leaderboard." + opt.format;
  if (opt.format == "csv") {
    WriteLeaderboardCsv(board, common.out_dir / board_file);
  } else {
    WriteLeaderboardJson(board, common.out_dir / board_file);
  }
  WriteManifest(common, "rank", {"ledger.tsv", "ratings.json", board_file});
  return {{"command", "rank"},         {"models", models.size()},
          {"prompts", prompts.size()}, {"trials", opt.trials},
          {"matches", ledger.size()},  {"top", BoardSummary(board)},
          {"out_dir", common.out_dir.string()}};
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  CommonOptions common;
  std::filesystem::path gt_ratings;
  std::vector<std::size_t> n_models{20};
  std::vector<std::size_t> n_prompts{50};
  std::vector<double> precisions{0.8};
  std::size_t trials = 50;
  std::optional<std::string> ref_model;
  std::string judge_kind = "simulated";  // simulated or oracle
  std::size_t bootstrap_resamples = 1000;
  double ci_level = 0.95;
  FitConfig fit;
};

inline std::string CellName(std::size_t n_models, std::size_t n_prompts, double precision) {
  return "n" + std::to_string(n_models) + "_x" + std::to_string(n_prompts) + "_p" +
         text::FormatDouble(precision);
}

// One TrialReport per (n_models, n_prompts, precision) cell, written to
// cells/<cell>.tsv, plus summary.csv with the per-arm aggregates.
inline nlohmann::json CmdSimulate(const SimulateOptions& opt) {
  using namespace commands_internal;
  const auto& common = opt.common;
  if (opt.n_models.empty() || opt.n_prompts.empty() || opt.precisions.empty()) {
    throw UsageError("grid lists must not be empty");
  }
  SimulatedJudgeKind kind;
  if (opt.judge_kind == "simulated") {
    kind = SimulatedJudgeKind::kSimulated;
  } else if (opt.judge_kind == "oracle") {
    kind = SimulatedJudgeKind::kOracle;
  } else {
    throw UsageError("--judge-kind must be simulated or oracle");
  }
  const auto gt = std::make_shared<const RatingTable>(ReadRatingTable(opt.gt_ratings));
  // The oracle ignores precision; run its cells once.
  const std::vector<double> precisions =
      kind == SimulatedJudgeKind::kOracle ? std::vector<double>{1.0} : opt.precisions;

  std::vector<SimulationConfig> cells;
  for (std::size_t n : opt.n_models) {
    for (std::size_t x : opt.n_prompts) {
      for (double p : precisions) {
        SimulationConfig c;
        c.gt_ratings = gt;
        c.n_models = n;
        c.n_prompts = x;
        c.judge_precision = p;
        c.trials = opt.trials;
        if (opt.ref_model) c.ref_model = ModelId(*opt.ref_model);
        c.seed = StreamKey(common.seed, "cell", n, x, text::FormatDouble(p));
        c.judge_kind = kind;
        c.threads = ResolveThreads(common.threads);
        c.fit = opt.fit;
        c.bootstrap = {opt.bootstrap_resamples, opt.ci_level};
        c.Validate();
        cells.push_back(c);
      }
    }
  }

  std::vector<std::string> files;
  std::string summary = "n_models,n_prompts,precision,approach,trials,median,ci_low,ci_high\n";
  nlohmann::json medians = nlohmann::json::array();
  for (const auto& c : cells) {
    const std::string name = CellName(c.n_models, c.n_prompts, c.judge_precision);
    Log(common, "simulate: cell " + name);
    const TrialReport report = RunSimulationGrid(c);
    const std::string file = "cells/" + name + ".tsv";
    {
      auto out = io_internal::OpenForWrite(common.out_dir / file);
      WriteTrialRows(report, out);
      io_internal::CheckWritten(out, common.out_dir / file);
    }
    files.push_back(file);
    nlohmann::json cell = {{"cell", name}};
    for (const auto& s : report.summaries) {
      summary += std::to_string(c.n_models) + "," + std::to_string(c.n_prompts) + "," +
                 text::FormatDouble(c.judge_precision) + "," +
                 std::string(ApproachName(s.approach)) + "," + std::to_string(s.trials) + "," +
                 text::FormatDouble(s.median) + "," + text::FormatDouble(s.ci_low) + "," +
                 text::FormatDouble(s.ci_high) + "\n";
      cell[std::string(ApproachName(s.approach))] = s.median;
    }
    medians.push_back(cell);
  }
  {
    auto out = io_internal::OpenForWrite(common.out_dir / "summary.csv");
    out << summary;
    io_internal::CheckWritten(out, common.out_dir / "summary.csv");
  }
  files.push_back("summary.csv");
  WriteManifest(common, "simulate", files);
  return {{"command", "simulate"}, {"cells", cells.size()}, {"trials", opt.trials},
          {"medians", medians},    {"out_dir", common.out_dir.string()}};
}

// ---------------------------------------------------------------- anchored

struct AnchoredCmdOptions {
  CommonOptions common;
  JudgeOptions judge;
  std::optional<std::filesystem::path> prompts;
  std::size_t n_prompts = 0;
  std::optional<std::filesystem::path> outputs;
  std::vector<std::string> models;
  std::string ref_model;
  std::string format = "csv";
};

// Scores every model by its win rate against the reference; writes
// ledger.tsv and a win-rate leaderboard.
inline nlohmann::json CmdAnchored(const AnchoredCmdOptions& opt) {
  using namespace commands_internal;
  const auto& common = opt.common;
  if (opt.format != "csv" && opt.format != "json") {
    throw UsageError("--format must be csv or json");
  }
  if (opt.ref_model.empty()) throw UsageError("--ref-model is required");
  const ModelId ref(opt.ref_model);
  const ResolvedJudge judge = MakeJudge(opt.judge, common.seed);
  const PromptSet prompts = ResolvePrompts(opt.prompts, opt.n_prompts);
  const auto models = ResolveModels(opt.models, judge, {ref});
  std::vector<ModelId> with_ref = models;
  with_ref.push_back(ref);
  const auto outputs = ResolveOutputs(opt.outputs, judge, with_ref, prompts);
  Log(common, "anchored: " + std::to_string(models.size()) + " models against " + ref.str());

  AnchoredOptions aopt;
  aopt.threads = ResolveThreads(common.threads);
  aopt.outputs = outputs ? &*outputs : nullptr;
  const AnchoredRun run = RunAnchoredComparison(models, prompts, ref, judge.spec, aopt);
  const Leaderboard board = RankFromScores(run.scores);

  WriteLedger(run.ledger, common.out_dir / "ledger.tsv");
  const std::string board_file = "leaderboard." + opt.format;
  if (opt.format == "csv") {
    WriteLeaderboardCsv(board, common.out_dir / board_file);
  } else {
    WriteLeaderboardJson(board, common.out_dir / board_file);
  }
  WriteManifest(common, "anchored", {"ledger.tsv", board_file});
  return {{"command", "anchored"},     {"models", models.size()},
          {"prompts", prompts.size()}, {"matches", run.ledger.size()},
          {"top", BoardSummary(board)}, {"out_dir", common.out_dir.string()}};
}

// ---------------------------------------------------------------- insert

struct InsertOptions {
  CommonOptions common;
  JudgeOptions judge;
  std::string strategy = "binary";  // binary, anchored or imputed
  std::string new_model;
  std::optional<std::filesystem::path> prompts;
  std::size_t n_prompts = 0;
  std::optional<std::filesystem::path> outputs;
  // binary: the leaderboard to search. anchored: incumbent win rates
  // against --ref-model.
  std::optional<std::filesystem::path> leaderboard;
  std::string ref_model;
  // imputed: fitted ratings and the ledger they came from.
  std::optional<std::filesystem::path> rating_table;
  std::optional<std::filesystem::path> ledger;
  std::size_t min_direct_matches = 20;
};

inline nlohmann::json PlacementToJson(const PlacementResult& p) {
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& pr : p.probes) {
    probes.push_back({{"mid", pr.mid}, {"wins", pr.wins}, {"matches", pr.matches}});
  }
  nlohmann::json doc = {{"position", p.position}, {"is_tie", p.is_tie},
                        {"matches_used", p.matches_used}};
  if (p.score) doc["score"] = *p.score;
  if (!p.probes.empty()) {
    doc["n_comparisons"] = p.n_comparisons;
    doc["n_matches"] = p.n_matches;
    doc["probes"] = probes;
  }
  return doc;
}

// Places --new-model and writes placement.json, the updated leaderboard and
// the new match records.
inline nlohmann::json CmdInsert(const InsertOptions& opt) {
  using namespace commands_internal;
  const auto& common = opt.common;
  if (opt.new_model.empty()) throw UsageError("--new-model is required");
  const ModelId newcomer(opt.new_model);
  const ResolvedJudge judge = MakeJudge(opt.judge, common.seed);
  const PromptSet prompts = ResolvePrompts(opt.prompts, opt.n_prompts);

  PlacementResult placement;
  Leaderboard updated;
  if (opt.strategy == "binary") {
    if (!opt.leaderboard) throw UsageError("--strategy binary needs --leaderboard");
    const Leaderboard board = ReadLeaderboard(*opt.leaderboard);
    const auto order = board.Order();
    std::vector<ModelId> everyone = order;
    everyone.push_back(newcomer);
    const auto outputs = ResolveOutputs(opt.outputs, judge, everyone, prompts);
    placement = BinarySearchPlacement(order, newcomer, prompts, judge.spec,
                                      StreamKey(common.seed, "insert"),
                                      outputs ? &*outputs : nullptr);
    updated = InsertIntoLeaderboard(board, newcomer, placement.position, placement.is_tie);
  } else if (opt.strategy == "anchored") {
    if (!opt.leaderboard) throw UsageError("--strategy anchored needs --leaderboard");
    if (opt.ref_model.empty()) throw UsageError("--strategy anchored needs --ref-model");
    const ModelId ref(opt.ref_model);
    const Leaderboard board = ReadLeaderboard(*opt.leaderboard);
    std::map<ModelId, double> existing;
    for (const auto& e : board.entries()) {
      existing.emplace(e.model, e.score);
    }
    const auto outputs =
        ResolveOutputs(opt.outputs, judge, std::vector<ModelId>{newcomer, ref}, prompts);
    placement = AnchoredInsertion(existing, newcomer, prompts, judge.spec, ref,
                                  outputs ? &*outputs : nullptr);
    updated = ScoredLeaderboard(existing, newcomer, *placement.score);
  } else if (opt.strategy == "imputed") {
    if (!opt.rating_table || !opt.ledger) {
      throw UsageError("--strategy imputed needs --rating-table and --ledger");
    }
    if (opt.ref_model.empty()) throw UsageError("--strategy imputed needs --ref-model");
    const ModelId anchor(opt.ref_model);
    const RatingTable table = ReadRatingTable(*opt.rating_table);
    const LedgerFile ledger = ReadLedger(*opt.ledger);
    const auto outputs =
        ResolveOutputs(opt.outputs, judge, std::vector<ModelId>{newcomer, anchor}, prompts);
    ImputedPlacement imputed =
        ImputedWinrateInsertion(table, ledger.ledger, anchor, newcomer, prompts, judge.spec,
                                outputs ? &*outputs : nullptr, opt.min_direct_matches);
    placement = std::move(imputed.placement);
    updated = ScoredLeaderboard(imputed.incumbent_scores, newcomer, *placement.score);
  } else {
    throw UsageError("--strategy must be binary, anchored or imputed");
  }
  Log(common, "insert: " + newcomer.str() + " placed at " + std::to_string(placement.position) +
                  " after " + std::to_string(placement.matches_used) + " matches");

  MatchLedger records;
  for (const auto& r : placement.records) records.Append(r);
  WriteLedger(records, common.out_dir / "ledger.tsv");
  WriteLeaderboardCsv(updated, common.out_dir / "leaderboard.csv");
  nlohmann::json report = PlacementToJson(placement);
  report["strategy"] = opt.strategy;
  report["new_model"] = newcomer.str();
  WriteJson(report, common.out_dir / "placement.json");
  WriteManifest(common, "insert", {"ledger.tsv", "leaderboard.csv", "placement.json"});
  report["command"] = "insert";
  report.erase("probes");
  report["out_dir"] = common.out_dir.string();
  return report;
}

// ---------------------------------------------------------------- cache

struct CacheOptions {
  CommonOptions common;
  JudgeOptions judge;
  std::optional<std::filesystem::path> prompts;
  std::size_t n_prompts = 0;
  std::optional<std::filesystem::path> outputs;
  std::vector<std::string> models;
};

// Builds (or resumes) cache.tsv with every pair on every prompt. Failed
// matches go to cache_failures.json and the command exits with a judge
// error; rerunning retries only the holes.
inline nlohmann::json CmdCache(const CacheOptions& opt) {
  using namespace commands_internal;
  const auto& common = opt.common;
  const ResolvedJudge judge = MakeJudge(opt.judge, common.seed);
  if (judge.flag.kind == JudgeKind::kCache) {
    throw UsageError("cache needs a judge other than cache:<path>");
  }
  const PromptSet prompts = ResolvePrompts(opt.prompts, opt.n_prompts);
  const auto models = ResolveModels(opt.models, judge);
  const auto outputs = ResolveOutputs(opt.outputs, judge, models, prompts);

  FullGridOptions gopt;
  gopt.threads = ResolveThreads(common.threads);
  gopt.cache_path = common.out_dir / "cache.tsv";
  const FullGridReport report =
      BuildFullGridCache(models, prompts, judge.spec, outputs ? &*outputs : nullptr, gopt);
  Log(common, "cache: " + std::to_string(report.cache.size()) + "/" +
                  std::to_string(report.expected_entries) + " entries (" +
                  std::to_string(report.reused) + " reused)");

  const auto failures_path = common.out_dir / "cache_failures.json";
  std::vector<std::string> files{"cache.tsv"};
  if (!report.failures.empty()) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& f : report.failures) {
      list.push_back({{"prompt_id", f.prompt_id},
                      {"first", f.first.str()},
                      {"second", f.second.str()},
                      {"message", f.message}});
    }
    WriteJson(list, failures_path);
    files.push_back("cache_failures.json");
  } else if (std::filesystem::exists(failures_path)) {
    std::filesystem::remove(failures_path);
  }
  WriteManifest(common, "cache", files);
  if (!report.failures.empty()) {
    const auto& f = report.failures.front();
    throw JudgeError(std::to_string(report.failures.size()) +
                         " matches failed; see cache_failures.json and rerun to retry. First: " +
                         f.message,
                     f.prompt_id, f.first.str(), f.second.str());
  }
  return {{"command", "cache"},
          {"entries", report.cache.size()},
          {"expected", report.expected_entries},
          {"reused", report.reused},
          {"requested", report.requested},
          {"out_dir", common.out_dir.string()}};
}

// ---------------------------------------------------------------- empirical

struct EmpiricalOptions {
  CommonOptions common;
  std::filesystem::path prompts;
  std::filesystem::path cache;
  std::filesystem::path ground_truth;  // leaderboard file
  std::vector<std::string> models;     // default: the ground-truth models
  std::optional<std::string> ref_model;
  std::size_t subset = 0;  // 0: all prompts
  std::size_t trials = 500;
  std::size_t bootstrap_resamples = 1000;
  double ci_level = 0.95;
  FitConfig fit;
};

// Trials replayed from a full-grid cache; writes rows.tsv and summary.csv.
inline nlohmann::json CmdEmpirical(const EmpiricalOptions& opt) {
  using namespace commands_internal;
  const auto& common = opt.common;
  const PromptSet prompts = LoadPromptSet(opt.prompts);
  const auto cache = std::make_shared<const MatchCache>(ReadCache(opt.cache));
  const Leaderboard gt = ReadLeaderboard(opt.ground_truth);
  std::vector<ModelId> models = opt.models.empty() ? gt.Order() : ToModels(opt.models);
  std::optional<ModelId> ref;
  if (opt.ref_model) ref = ModelId(*opt.ref_model);

  EmpiricalConfig config;
  config.n_prompts_subset = opt.subset;
  config.trials = opt.trials;
  config.seed = common.seed;
  config.threads = ResolveThreads(common.threads);
  config.fit = opt.fit;
  config.bootstrap = {opt.bootstrap_resamples, opt.ci_level};
  Log(common, "empirical: " + std::to_string(opt.trials) + " trials over " +
                  std::to_string(models.size()) + " models");
  const TrialReport report = RunEmpiricalTrials(prompts, cache, models, ref, gt, config);

  {
    auto out = io_internal::OpenForWrite(common.out_dir / "rows.tsv");
    WriteTrialRows(report, out);
    io_internal::CheckWritten(out, common.out_dir / "rows.tsv");
  }
  nlohmann::json medians = nlohmann::json::object();
  {
    auto out = io_internal::OpenForWrite(common.out_dir / "summary.csv");
    out << "approach,trials,median,ci_low,ci_high\n";
    for (const auto& s : report.summaries) {
      out << ApproachName(s.approach) << ',' << s.trials << ',' << text::FormatDouble(s.median)
          << ',' << text::FormatDouble(s.ci_low) << ',' << text::FormatDouble(s.ci_high)
          << '\n';
      medians[std::string(ApproachName(s.approach))] = s.median;
    }
    io_internal::CheckWritten(out, common.out_dir / "summary.csv");
  }
  WriteManifest(common, "empirical", {"rows.tsv", "summary.csv"});
  return {{"command", "empirical"}, {"trials", opt.trials}, {"medians", medians},
          {"out_dir", common.out_dir.string()}};
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  CommonOptions common;
  std::optional<std::filesystem::path> predicted;
  std::optional<std::filesystem::path> ground_truth;
  // Per-trial rows from simulate or empirical.
  std::optional<std::filesystem::path> trial_rows;
  std::size_t bootstrap_resamples = 1000;
  double ci_level = 0.95;
};

inline TrialReport ReadTrialRows(const std::filesystem::path& path) {
  auto in = io_internal::OpenForRead(path);
  TrialReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header
    const auto fields = text::Split(line, '\t');
    const auto fail = [&](const std::string& msg) {
      return DataError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (fields.size() != 4) throw fail("expected 4 fields");
    TrialRow row;
    const auto id = text::ParseInt(fields[0]);
    const auto rho = text::ParseDouble(fields[2]);
    const auto matches = text::ParseInt(fields[3]);
    if (!id || !rho || !matches) throw fail("malformed number");
    row.trial_id = *id;
    if (fields[1] == "tournament") {
      row.approach = Approach::kTournament;
    } else if (fields[1] == "anchored") {
      row.approach = Approach::kAnchored;
    } else {
      throw fail("unknown approach '" + std::string(fields[1]) + "'");
    }
    row.spearman = *rho;
    row.matches = *matches;
    report.rows.push_back(row);
  }
  return report;
}

// Compares leaderboards and/or summarizes trial rows into report.json.
inline nlohmann::json CmdReport(const ReportOptions& opt) {
  using namespace commands_internal;
  const auto& common = opt.common;
  if (opt.predicted.has_value() != opt.ground_truth.has_value()) {
    throw UsageError("--predicted and --ground-truth go together");
  }
  if (!opt.predicted && !opt.trial_rows) {
    throw UsageError("nothing to report: give --predicted/--ground-truth or --trial-rows");
  }
  nlohmann::json doc = nlohmann::json::object();
  if (opt.predicted) {
    const Leaderboard predicted = ReadLeaderboard(*opt.predicted);
    const Leaderboard gt = ReadLeaderboard(*opt.ground_truth);
    doc["models"] = predicted.size();
    doc["spearman"] = Spearman(predicted, gt);
    doc["mean_rank_deviation"] = MeanRankDeviation(predicted, gt);
  }
  if (opt.trial_rows) {
    const TrialReport rows = ReadTrialRows(*opt.trial_rows);
    nlohmann::json arms = nlohmann::json::object();
    for (Approach a : {Approach::kTournament, Approach::kAnchored}) {
      const auto values = rows.Spearmans(a);
      if (values.empty()) continue;
      const auto ci = BootstrapCi(values, opt.bootstrap_resamples, opt.ci_level,
                                  StreamKey(common.seed, "report", ApproachName(a)));
      arms[std::string(ApproachName(a))] = {{"trials", values.size()},
                                            {"median", Median(values)},
                                            {"bootstrap_median", ci.median},
                                            {"ci_low", ci.lo},
                                            {"ci_high", ci.hi}};
    }
    doc["arms"] = arms;
  }
  WriteJson(doc, common.out_dir / "report.json");
  WriteManifest(common, "report", {"report.json"});
  doc["command"] = "report";
  doc["out_dir"] = common.out_dir.string();
  return doc;
}

}  // namespace bracketrank
