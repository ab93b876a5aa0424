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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bracketrank/commands.hpp"
#include "test_util.hpp"

namespace bracketrank {
namespace {

using testing::MakeModels;
using testing::TempDir;

std::string Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 20 models rated 1500, 1480, ...
std::filesystem::path WriteGt(const TempDir& dir, std::size_t n = 20) {
  RatingTable t;
  const auto models = MakeModels(n);
  for (std::size_t i = 0; i < n; ++i) t.ratings.emplace(models[i], 1500.0 - 20.0 * i);
  const auto path = dir / "gt.json";
  WriteRatingTable(t, path);
  return path;
}

CommonOptions Common(const std::filesystem::path& out, unsigned threads = 1) {
  CommonOptions c;
  c.seed = 11;
  c.out_dir = out;
  c.threads = threads;
  return c;
}

TEST(JudgeFlagTest, Parses) {
  EXPECT_EQ(ParseJudgeFlag("oracle").kind, JudgeKind::kOracle);
  const auto sim = ParseJudgeFlag("simulated:0.7");
  EXPECT_EQ(sim.kind, JudgeKind::kSimulated);
  EXPECT_DOUBLE_EQ(sim.precision, 0.7);
  EXPECT_EQ(ParseJudgeFlag("cache:/tmp/c.tsv").target, "/tmp/c.tsv");
  EXPECT_EQ(ParseJudgeFlag("external:https://x/y").target, "https://x/y");
  for (const char* bad : {"simulated:1.5", "simulated:", "cache:", "oracle:x", "gpt"}) {
    EXPECT_THROW(ParseJudgeFlag(bad), UsageError) << bad;
  }
}

TEST(CmdRankTest, CachedJudgeAtFullScale) {
  TempDir dir("rank-cache");
  const auto gt = WriteGt(dir);
  // Full-grid cache for 20 models x 500 prompts from the oracle.
  CacheOptions cache;
  cache.common = Common(dir / "cache", 0);
  cache.judge.judge = "oracle";
  cache.judge.gt_ratings = gt;
  cache.n_prompts = 500;
  const auto cached = CmdCache(cache);
  EXPECT_EQ(cached.at("entries"), 95000);

  RankOptions rank;
  rank.common = Common(dir / "rank");
  rank.judge.judge = "cache:" + (dir / "cache" / "cache.tsv").string();
  rank.n_prompts = 500;
  const auto summary = CmdRank(rank);
  EXPECT_EQ(summary.at("matches"), 9500);
  const Leaderboard board = ReadLeaderboard(dir / "rank" / "leaderboard.csv");
  EXPECT_EQ(board.size(), 20u);
  EXPECT_EQ(board.Order(), MakeModels(20));
  EXPECT_EQ(ReadLedger(dir / "rank" / "ledger.tsv").ledger.size(), 9500u);

  const std::string first = Slurp(dir / "rank" / "leaderboard.csv");
  CmdRank(rank);
  EXPECT_EQ(Slurp(dir / "rank" / "leaderboard.csv"), first);

  const auto manifest = nlohmann::json::parse(Slurp(dir / "rank" / "manifest.json"));
  EXPECT_EQ(manifest.at("command"), "rank");
  EXPECT_EQ(manifest.at("seed"), 11);
}

TEST(CmdRankTest, MissingOutputIsDataError) {
  TempDir dir("rank-missing");
  const auto gt = WriteGt(dir, 3);
  PromptSet prompts = PromptSet::Synthetic(2);
  WritePromptSet(prompts, dir / "prompts.tsv");
  OutputStore outputs;
  for (const auto& m : MakeModels(3)) outputs.Insert("sim-0", m, "x");
  outputs.Insert("sim-1", ModelId("m000"), "x");
  outputs.Insert("sim-1", ModelId("m001"), "x");
  WriteOutputStore(outputs, dir / "outputs.tsv");

  RankOptions rank;
  rank.common = Common(dir / "out");
  rank.judge.judge = "external:http://judge.invalid";
  rank.prompts = dir / "prompts.tsv";
  rank.outputs = dir / "outputs.tsv";
  rank.models = {"m000", "m001", "m002"};
  try {
    CmdRank(rank);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("(sim-1, m002)"), std::string::npos);
  }
}

TEST(CmdRankTest, ResumeMatchesUninterruptedRun) {
  TempDir dir("rank-resume");
  const auto gt = WriteGt(dir, 6);
  const auto models = MakeModels(6);
  const PromptSet prompts = PromptSet::Synthetic(12);
  WritePromptSet(prompts, dir / "prompts.tsv");
  OutputStore outputs;
  for (const auto& p : prompts.prompts()) {
    for (const auto& m : models) outputs.Insert(p.id, m, m.str());
  }
  WriteOutputStore(outputs, dir / "outputs.tsv");
  const auto table = ReadRatingTable(gt);

  int calls = 0;
  bool failing = true;
  RankOptions rank;
  rank.common = Common(dir / "out");
  rank.judge.judge = "external:http://judge.invalid";
  rank.judge.retries = 0;
  rank.judge.backoff_ms = 0;
  rank.prompts = dir / "prompts.tsv";
  rank.outputs = dir / "outputs.tsv";
  rank.models = {"m000", "m001", "m002", "m003", "m004", "m005"};
  rank.judge.transport = [&](const HttpRequest& request) {
    ++calls;
    const std::string user = nlohmann::json::parse(request.body).at("user");
    // Prompt 11 is the last; its final match fails.
    if (failing && calls == 60) return HttpResponse{503, ""};
    const auto a = user.find("m00");
    const ModelId first(user.substr(a, 4));
    const ModelId second(user.substr(user.find("m00", a + 4), 4));
    return HttpResponse{200, table.at(first) > table.at(second) ? "Output (a)" : "Output (b)"};
  };
  EXPECT_THROW(CmdRank(rank), JudgeError);
  const LedgerFile partial = ReadLedger(dir / "out" / "ledger.tsv");
  ASSERT_TRUE(partial.resume_from.has_value());
  EXPECT_EQ(partial.ledger.size(), *partial.resume_from * 5);

  failing = false;
  rank.resume = true;
  CmdRank(rank);
  const std::string resumed = Slurp(dir / "out" / "ledger.tsv");
  const std::string board = Slurp(dir / "out" / "leaderboard.csv");

  rank.resume = false;
  rank.common.out_dir = dir / "fresh";
  CmdRank(rank);
  EXPECT_EQ(Slurp(dir / "fresh" / "ledger.tsv"), resumed);
  EXPECT_EQ(Slurp(dir / "fresh" / "leaderboard.csv"), board);
}

TEST(CmdRankTest, TrialsAddIntervals) {
  TempDir dir("rank-trials");
  RankOptions rank;
  rank.common = Common(dir / "out");
  rank.judge.judge = "simulated:0.8";
  rank.judge.gt_ratings = WriteGt(dir, 8);
  rank.n_prompts = 10;
  rank.trials = 5;
  rank.format = "json";
  const auto summary = CmdRank(rank);
  EXPECT_EQ(summary.at("matches"), 5 * 10 * 7);
  const Leaderboard board = ReadLeaderboard(dir / "out" / "leaderboard.json");
  for (const auto& e : board.entries()) {
    ASSERT_TRUE(e.ci_low.has_value());
    EXPECT_LE(*e.ci_low, *e.ci_high);
  }
  rank.resume = true;
  EXPECT_THROW(CmdRank(rank), UsageError);
}

TEST(CmdSimulateTest, GridAndDeterminism) {
  TempDir dir("simulate");
  SimulateOptions sim;
  sim.common = Common(dir / "a", 2);
  sim.gt_ratings = WriteGt(dir);
  sim.n_models = {6};
  sim.n_prompts = {10, 20};
  sim.precisions = {0.7, 0.9};
  sim.trials = 4;
  sim.ref_model = "m019";
  sim.bootstrap_resamples = 100;
  const auto summary = CmdSimulate(sim);
  EXPECT_EQ(summary.at("cells"), 4);
  const std::string csv = Slurp(dir / "a" / "summary.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2);
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "cells" / "n6_x10_p0.7.tsv"));

  sim.common = Common(dir / "b", 5);
  CmdSimulate(sim);
  EXPECT_EQ(Slurp(dir / "b" / "summary.csv"), csv);
  EXPECT_EQ(Slurp(dir / "b" / "cells" / "n6_x20_p0.9.tsv"),
            Slurp(dir / "a" / "cells" / "n6_x20_p0.9.tsv"));

  sim.trials = 1;
  sim.common = Common(dir / "c");
  CmdSimulate(sim);
  const std::string one = Slurp(dir / "c" / "cells" / "n6_x10_p0.7.tsv");
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 3);

  sim.precisions = {1.5};
  EXPECT_THROW(CmdSimulate(sim), UsageError);
  sim.precisions = {};
  EXPECT_THROW(CmdSimulate(sim), UsageError);
}

TEST(CmdReportTest, IdenticalBoards) {
  TempDir dir("report");
  const Leaderboard board = RankFromScores({{ModelId("a"), 3}, {ModelId("b"), 2}, {ModelId("c"), 1}});
  WriteLeaderboardCsv(board, dir / "board.csv");
  ReportOptions opt;
  opt.common = Common(dir / "out");
  opt.predicted = dir / "board.csv";
  opt.ground_truth = dir / "board.csv";
  const auto doc = CmdReport(opt);
  EXPECT_DOUBLE_EQ(doc.at("spearman").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(doc.at("mean_rank_deviation").get<double>(), 0.0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "report.json"));

  ReportOptions none;
  none.common = Common(dir / "none");
  EXPECT_THROW(CmdReport(none), UsageError);
}

TEST(CmdReportTest, TrialRowsRoundTrip) {
  TempDir dir("report-rows");
  TrialReport report;
  for (int t = 0; t < 10; ++t) {
    report.rows.push_back({t, Approach::kTournament, 0.9, 63});
    report.rows.push_back({t, Approach::kAnchored, 0.5 + 0.01 * t, 70});
  }
  {
    std::ofstream out(dir / "rows.tsv");
    WriteTrialRows(report, out);
  }
  EXPECT_EQ(ReadTrialRows(dir / "rows.tsv").rows, report.rows);
  ReportOptions opt;
  opt.common = Common(dir / "out");
  opt.trial_rows = dir / "rows.tsv";
  const auto doc = CmdReport(opt);
  EXPECT_DOUBLE_EQ(doc.at("arms").at("tournament").at("ci_low").get<double>(), 0.9);
  EXPECT_EQ(doc.at("arms").at("anchored").at("trials"), 10);
}

TEST(CmdInsertTest, BinaryReportShowsProbeSize) {
  TempDir dir("insert");
  const auto gt = WriteGt(dir, 21);
  std::map<ModelId, double> scores;
  const auto models = MakeModels(20);
  for (std::size_t i = 0; i < 20; ++i) scores.emplace(models[i], 20.0 - i);
  WriteLeaderboardCsv(RankFromScores(scores), dir / "board.csv");

  InsertOptions opt;
  opt.common = Common(dir / "out");
  opt.judge.judge = "oracle";
  opt.judge.gt_ratings = gt;
  opt.new_model = "m020";
  opt.n_prompts = 500;
  opt.leaderboard = dir / "board.csv";
  const auto summary = CmdInsert(opt);
  EXPECT_EQ(summary.at("n_matches"), 125);
  EXPECT_EQ(summary.at("n_comparisons"), 4);
  EXPECT_EQ(summary.at("position"), 20);
  const auto placement = nlohmann::json::parse(Slurp(dir / "out" / "placement.json"));
  for (const auto& probe : placement.at("probes")) EXPECT_EQ(probe.at("matches"), 125);
  EXPECT_EQ(ReadLeaderboardCsv(dir / "out" / "leaderboard.csv").Order().back(), ModelId("m020"));
}

TEST(CmdInsertTest, AnchoredAndImputed) {
  TempDir dir("insert-scored");
  const auto gt = WriteGt(dir, 6);
  AnchoredCmdOptions anchored;
  anchored.common = Common(dir / "anchored");
  anchored.judge.judge = "oracle";
  anchored.judge.gt_ratings = gt;
  anchored.n_prompts = 10;
  anchored.models = {"m000", "m002", "m004"};
  anchored.ref_model = "m003";
  const auto run = CmdAnchored(anchored);
  EXPECT_EQ(run.at("matches"), 30);

  InsertOptions opt;
  opt.common = Common(dir / "a");
  opt.judge.judge = "oracle";
  opt.judge.gt_ratings = gt;
  opt.strategy = "anchored";
  opt.new_model = "m001";
  opt.ref_model = "m003";
  opt.n_prompts = 10;
  opt.leaderboard = dir / "anchored" / "leaderboard.csv";
  // m000 and m002 also beat the reference every time; ties rank below.
  EXPECT_EQ(CmdInsert(opt).at("position"), 2);

  RankOptions rank;
  rank.common = Common(dir / "rank");
  rank.judge = opt.judge;
  rank.n_prompts = 10;
  rank.models = {"m000", "m002", "m003", "m004"};
  CmdRank(rank);
  opt.common = Common(dir / "i");
  opt.strategy = "imputed";
  opt.rating_table = dir / "rank" / "ratings.json";
  opt.ledger = dir / "rank" / "ledger.tsv";
  const auto imputed = CmdInsert(opt);
  EXPECT_DOUBLE_EQ(imputed.at("score").get<double>(), 1.0);

  opt.strategy = "bogus";
  EXPECT_THROW(CmdInsert(opt), UsageError);
}

TEST(CmdCacheTest, FailuresAreReportedAndRetried) {
  TempDir dir("cache-cmd");
  const auto models = MakeModels(3);
  const PromptSet prompts = PromptSet::Synthetic(4);
  WritePromptSet(prompts, dir / "prompts.tsv");
  OutputStore outputs;
  for (const auto& p : prompts.prompts()) {
    for (const auto& m : models) outputs.Insert(p.id, m, m.str());
  }
  WriteOutputStore(outputs, dir / "outputs.tsv");
  bool broken = true;
  CacheOptions opt;
  opt.common = Common(dir / "out");
  opt.judge.judge = "external:http://judge.invalid";
  opt.judge.retries = 0;
  opt.judge.transport = [&](const HttpRequest& request) {
    const std::string user = nlohmann::json::parse(request.body).at("user");
    if (broken && user.find("m002") != std::string::npos) return HttpResponse{500, ""};
    return HttpResponse{200, "Output (a)"};
  };
  opt.prompts = dir / "prompts.tsv";
  opt.outputs = dir / "outputs.tsv";
  opt.models = {"m000", "m001", "m002"};
  EXPECT_THROW(CmdCache(opt), JudgeError);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "cache_failures.json"));
  EXPECT_EQ(ReadCache(dir / "out" / "cache.tsv").size(), 4u);
  broken = false;
  const auto done = CmdCache(opt);
  EXPECT_EQ(done.at("reused"), 4);
  EXPECT_EQ(done.at("requested"), 8);
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "cache_failures.json"));
}

// ---------------------------------------------------------------- binary

int RunCli(const std::string& args) {
  const std::string cmd = std::string(BRACKETRANK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, ExitCodes) {
  TempDir dir("cli");
  const auto gt = WriteGt(dir, 6);
  const std::string out = " --out-dir " + (dir / "out").string();
  EXPECT_EQ(RunCli("--help"), 0);
  EXPECT_EQ(RunCli("--version"), 0);
  EXPECT_EQ(RunCli("rank --no-such-flag"), 1);
  EXPECT_EQ(RunCli("rank --judge simulated:2" + out + " --n-prompts 3 --gt-ratings " + gt.string()),
            1);
  EXPECT_EQ(RunCli("rank --judge oracle --n-prompts 4 --gt-ratings " + gt.string() + out), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "leaderboard.csv"));
  EXPECT_EQ(RunCli("rank --judge oracle --n-prompts 4 --gt-ratings " + (dir / "nope.json").string() +
                   out),
            2);
  EXPECT_EQ(RunCli("rank --judge cache:" + (dir / "empty.tsv").string() + " --n-prompts 4" + out),
            2);
  {
    std::ofstream cache(dir / "holes.tsv");
    cache << kCacheHeader << "\n";
    cache << FormatCacheLine("sim-0", {ModelId("m000"), ModelId("m001"), ModelId("m000")}) << "\n";
  }
  EXPECT_EQ(RunCli("rank --judge cache:" + (dir / "holes.tsv").string() +
                   " --models m000,m001 --n-prompts 2" + out),
            3);
}

TEST(CliTest, ConfigFileMirrorsFlags) {
  TempDir dir("cli-config");
  const auto gt = WriteGt(dir, 6);
  {
    std::ofstream cfg(dir / "run.toml");
    cfg << "seed = 5\nout-dir = \"" << (dir / "out").string() << "\"\n"
        << "[simulate]\ngt-ratings = \"" << gt.string() << "\"\n"
        << "n-models = [4]\nn-prompts = [8]\nprecision = [0.8]\ntrials = 2\n"
        << "bootstrap-resamples = 50\n";
  }
  EXPECT_EQ(RunCli("simulate --config " + (dir / "run.toml").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "cells" / "n4_x8_p0.8.tsv"));
  const auto manifest = nlohmann::json::parse(Slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest.at("seed"), 5);
  EXPECT_NE(manifest.at("config").get<std::string>().find("trials"), std::string::npos);
}

}  // namespace
}  // namespace bracketrank
