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

// bracketrank: rank models with iterated single-elimination tournaments.
//
//   bracketrank rank      --prompts p.tsv --judge cache:c.tsv
//   bracketrank simulate  --gt-ratings gt.json --precision 0.6,0.7,0.8,0.9
//   bracketrank anchored  --ref-model m --judge ...
//   bracketrank insert    --strategy binary --leaderboard lb.csv --new-model m
//   bracketrank cache     --prompts p.tsv --outputs o.tsv --judge external:URL
//   bracketrank empirical --prompts p.tsv --cache c.tsv --ground-truth lb.csv
//   bracketrank report    --predicted a.csv --ground-truth b.csv
//
// Every flag can also come from --config (TOML or INI, one section per
// subcommand). Data goes to --out-dir, logs to stderr and a one-line JSON
// summary to stdout. Exit codes: 0 ok, 1 usage, 2 data, 3 judge.

#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "bracketrank/commands.hpp"

namespace {

using bracketrank::CommonOptions;
using bracketrank::FitConfig;
using bracketrank::JudgeOptions;

void AddJudgeFlags(CLI::App* cmd, JudgeOptions& j) {
  cmd->add_option("--judge", j.judge,
                  "oracle | simulated:<precision> | cache:<path> | external:<url>")
      ->capture_default_str();
  cmd->add_option("--gt-ratings", j.gt_ratings,
                  "ground-truth ratings JSON for the oracle and simulated judges");
  cmd->add_option("--prompt-template", j.prompt_template,
                  "judge prompt template JSON (external judge)");
  cmd->add_option("--auth-env", j.auth_env,
                  "environment variable holding the judge API token");
  cmd->add_option("--retries", j.retries, "external judge retries")->capture_default_str();
  cmd->add_option("--timeout-ms", j.timeout_ms, "external judge request timeout")
      ->capture_default_str();
  cmd->add_option("--backoff-ms", j.backoff_ms, "initial retry backoff")
      ->capture_default_str();
}

void AddFitFlags(CLI::App* cmd, FitConfig& fit) {
  cmd->add_option("--l2-lambda", fit.l2_lambda, "ridge penalty on logit ratings")
      ->capture_default_str();
  cmd->add_option("--anchor-mean", fit.anchor_mean, "mean of the fitted ratings")
      ->capture_default_str();
  cmd->add_option("--max-iterations", fit.max_iterations, "Newton iteration cap")
      ->capture_default_str();
}

void AddPromptFlags(CLI::App* cmd, std::optional<std::filesystem::path>& prompts,
                    std::size_t& n_prompts, std::optional<std::filesystem::path>& outputs) {
  cmd->add_option("--prompts", prompts, "prompt set TSV (prompt_id, stratum, instruction)");
  cmd->add_option("--n-prompts", n_prompts,
                  "use this many synthetic prompts instead (oracle/simulated judges)");
  cmd->add_option("--outputs", outputs, "model outputs TSV (prompt_id, model_id, response)");
}

// Global flags plus those of the subcommand that ran.
std::string SelectedConfig(const CLI::App& app) {
  const std::string prefix = app.get_subcommands().front()->get_name() + ".";
  std::istringstream all(app.config_to_str(true, false));
  std::string out;
  std::string line;
  while (std::getline(all, line)) {
    const std::string key = line.substr(0, line.find('='));
    if (key.find('.') == std::string::npos || key.rfind(prefix, 0) == 0) out += line + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-free LLM ranking with iterated single-elimination tournaments"};
  app.set_version_flag("--version", std::string(bracketrank::kVersion));
  app.set_config("--config", "", "read flags from a TOML/INI file");
  app.fallthrough();  // global flags may follow the subcommand
  app.require_subcommand(1);

  CommonOptions common;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--seed", common.seed, "master random seed")->capture_default_str();
  app.add_option("--out-dir", common.out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", common.threads, "worker threads (0: all cores)")
      ->capture_default_str();
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "warnings and errors only");

  bracketrank::RankOptions rank;
  auto* rank_cmd = app.add_subcommand("rank", "tournaments + rating fit -> leaderboard");
  AddJudgeFlags(rank_cmd, rank.judge);
  AddPromptFlags(rank_cmd, rank.prompts, rank.n_prompts, rank.outputs);
  rank_cmd->add_option("--models", rank.models, "participants (default: all known to the judge)")
      ->delimiter(',');
  rank_cmd->add_option("--trials", rank.trials, "tournament replays for bootstrap intervals")
      ->capture_default_str();
  rank_cmd->add_flag("--resume", rank.resume, "continue a ledger stopped by a judge failure");
  rank_cmd->add_option("--format", rank.format, "leaderboard format: csv or json")
      ->capture_default_str();
  AddFitFlags(rank_cmd, rank.fit);

  bracketrank::SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "simulated tournament vs anchored comparison");
  sim_cmd->add_option("--gt-ratings", sim.gt_ratings, "ground-truth ratings JSON")->required();
  sim_cmd->add_option("--n-models", sim.n_models, "participant counts")
      ->delimiter(',')
      ->capture_default_str();
  sim_cmd->add_option("--n-prompts", sim.n_prompts, "prompt counts")
      ->delimiter(',')
      ->capture_default_str();
  sim_cmd->add_option("--precision", sim.precisions, "judge precisions")
      ->delimiter(',')
      ->capture_default_str();
  sim_cmd->add_option("--trials", sim.trials, "trials per cell")->capture_default_str();
  sim_cmd->add_option("--ref-model", sim.ref_model, "reference model for the anchored arm");
  sim_cmd->add_option("--judge-kind", sim.judge_kind, "simulated or oracle")
      ->capture_default_str();
  sim_cmd->add_option("--bootstrap-resamples", sim.bootstrap_resamples)->capture_default_str();
  sim_cmd->add_option("--ci-level", sim.ci_level)->capture_default_str();
  AddFitFlags(sim_cmd, sim.fit);

  bracketrank::AnchoredCmdOptions anchored;
  auto* anchored_cmd = app.add_subcommand("anchored", "win rate against a reference model");
  AddJudgeFlags(anchored_cmd, anchored.judge);
  AddPromptFlags(anchored_cmd, anchored.prompts, anchored.n_prompts, anchored.outputs);
  anchored_cmd->add_option("--models", anchored.models, "participants")->delimiter(',');
  anchored_cmd->add_option("--ref-model", anchored.ref_model, "reference model")->required();
  anchored_cmd->add_option("--format", anchored.format, "leaderboard format: csv or json")
      ->capture_default_str();

  bracketrank::InsertOptions insert;
  auto* insert_cmd = app.add_subcommand("insert", "add one model to an existing leaderboard");
  AddJudgeFlags(insert_cmd, insert.judge);
  AddPromptFlags(insert_cmd, insert.prompts, insert.n_prompts, insert.outputs);
  insert_cmd->add_option("--strategy", insert.strategy, "binary, anchored or imputed")
      ->capture_default_str();
  insert_cmd->add_option("--new-model", insert.new_model, "model to place")->required();
  insert_cmd->add_option("--leaderboard", insert.leaderboard,
                         "existing leaderboard (binary) or win rates (anchored)");
  insert_cmd->add_option("--ref-model", insert.ref_model, "reference/anchor model");
  insert_cmd->add_option("--rating-table", insert.rating_table, "fitted ratings (imputed)");
  insert_cmd->add_option("--ledger", insert.ledger, "ledger behind the ratings (imputed)");
  insert_cmd->add_option("--min-direct-matches", insert.min_direct_matches,
                         "ledger games needed to use a direct win rate (imputed)")
      ->capture_default_str();

  bracketrank::CacheOptions cache;
  auto* cache_cmd = app.add_subcommand("cache", "judge every pair on every prompt (resumable)");
  AddJudgeFlags(cache_cmd, cache.judge);
  AddPromptFlags(cache_cmd, cache.prompts, cache.n_prompts, cache.outputs);
  cache_cmd->add_option("--models", cache.models, "participants")->delimiter(',');

  bracketrank::EmpiricalOptions emp;
  auto* emp_cmd = app.add_subcommand("empirical", "trials replayed from a full-grid cache");
  emp_cmd->add_option("--prompts", emp.prompts, "prompt set TSV")->required();
  emp_cmd->add_option("--cache", emp.cache, "full-grid cache TSV")->required();
  emp_cmd->add_option("--ground-truth", emp.ground_truth, "reference leaderboard")->required();
  emp_cmd->add_option("--models", emp.models, "participants (default: ground-truth models)")
      ->delimiter(',');
  emp_cmd->add_option("--ref-model", emp.ref_model, "reference model for the anchored arm");
  emp_cmd->add_option("--subset", emp.subset, "prompts per trial (0: all)")
      ->capture_default_str();
  emp_cmd->add_option("--trials", emp.trials, "trials")->capture_default_str();
  emp_cmd->add_option("--bootstrap-resamples", emp.bootstrap_resamples)->capture_default_str();
  emp_cmd->add_option("--ci-level", emp.ci_level)->capture_default_str();
  AddFitFlags(emp_cmd, emp.fit);

  bracketrank::ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "rank agreement and trial summaries");
  report_cmd->add_option("--predicted", report.predicted, "leaderboard to evaluate");
  report_cmd->add_option("--ground-truth", report.ground_truth, "reference leaderboard");
  report_cmd->add_option("--trial-rows", report.trial_rows, "per-trial rows TSV");
  report_cmd->add_option("--bootstrap-resamples", report.bootstrap_resamples)
      ->capture_default_str();
  report_cmd->add_option("--ci-level", report.ci_level)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(bracketrank::ErrorKind::kUsage);
  }

  auto logger = spdlog::stderr_color_mt("bracketrank");
  logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
  logger->set_level(verbose ? spdlog::level::debug
                            : quiet ? spdlog::level::warn : spdlog::level::info);
  common.log = [logger](const std::string& msg) { logger->info(msg); };
  common.config_dump = SelectedConfig(app);

  try {
    nlohmann::json summary;
    if (*rank_cmd) {
      rank.common = common;
      summary = bracketrank::CmdRank(rank);
    } else if (*sim_cmd) {
      sim.common = common;
      summary = bracketrank::CmdSimulate(sim);
    } else if (*anchored_cmd) {
      anchored.common = common;
      summary = bracketrank::CmdAnchored(anchored);
    } else if (*insert_cmd) {
      insert.common = common;
      summary = bracketrank::CmdInsert(insert);
    } else if (*cache_cmd) {
      cache.common = common;
      summary = bracketrank::CmdCache(cache);
    } else if (*emp_cmd) {
      emp.common = common;
      summary = bracketrank::CmdEmpirical(emp);
    } else {
      report.common = common;
      summary = bracketrank::CmdReport(report);
    }
    std::cout << summary.dump() << std::endl;
    return 0;
  } catch (const bracketrank::Error& e) {
    logger->error("{}", e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    logger->error("{}", e.what());
    return static_cast<int>(bracketrank::ErrorKind::kData);
  }
}
