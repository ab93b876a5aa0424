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

// Judge backends. Every backend returns a strict winner for a pair of models
// on one prompt:
//
//   SimulatedUnbiased    the higher-rated side wins with probability
//                        precision * P_gt(higher beats lower), else the lower
//                        side wins. Draws come from a stream keyed by
//                        (seed, prompt, unordered pair).
//   DeterministicOracle  the higher-rated side always wins.
//   Cached               replays a precomputed verdict.
//   External             renders a pairwise prompt and POSTs it to an HTTP
//                        service; response order alternates with the prompt
//                        ordinal to spread position bias.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "bracketrank/core.hpp"
#include "bracketrank/error.hpp"
#include "bracketrank/io.hpp"
#include "bracketrank/parallel.hpp"
#include "bracketrank/random.hpp"
#include "bracketrank/rating.hpp"
#include "bracketrank/text.hpp"
#include "json.hpp"

namespace bracketrank {

enum class Side { kA, kB };

// ---------------------------------------------------------------- templates

class PromptTemplate {
 public:
  static constexpr std::string_view kInstruction = "{instruction}";
  static constexpr std::string_view kResponseA = "{response_a}";
  static constexpr std::string_view kResponseB = "{response_b}";

  PromptTemplate(std::string system_text, std::string user_text,
                 std::string verdict_a, std::string verdict_b)
      : system_text_(std::move(system_text)),
        user_text_(std::move(user_text)),
        verdict_a_(std::move(verdict_a)),
        verdict_b_(std::move(verdict_b)) {
    for (auto placeholder : {kInstruction, kResponseA, kResponseB}) {
      const auto first = user_text_.find(placeholder);
      if (first == std::string::npos) {
        throw DataError("judge template is missing placeholder " +
                        std::string(placeholder));
      }
      if (user_text_.find(placeholder, first + 1) != std::string::npos) {
        throw DataError("judge template repeats placeholder " +
                        std::string(placeholder));
      }
    }
    const auto a = text::ToLower(text::Trim(verdict_a_));
    const auto b = text::ToLower(text::Trim(verdict_b_));
    if (a.empty() || b.empty() || a == b) {
      throw DataError("judge template verdict strings must be non-empty and distinct");
    }
  }

  const std::string& system_text() const noexcept { return system_text_; }
  const std::string& user_text() const noexcept { return user_text_; }
  const std::string& verdict_a() const noexcept { return verdict_a_; }
  const std::string& verdict_b() const noexcept { return verdict_b_; }

 private:
  std::string system_text_;
  std::string user_text_;
  std::string verdict_a_;
  std::string verdict_b_;
};

// Pairwise comparison prompt (LLMBar "Metrics" variant with four extra
// writing-quality criteria).
inline PromptTemplate DefaultPromptTemplate() {
  static constexpr std::string_view kSystem =
      "You are a helpful assistant in evaluating the quality of the outputs for "
      "a given instruction. Your goal is to select the best output for the given "
      "instruction.";
  static constexpr std::string_view kUser = R"tmpl(Select the Output (a) or Output (b) that is better for the given instruction. The two outputs are generated by two different AI chatbots respectively.

Here are some rules of the evaluation:
(1) You should prioritize evaluating whether the output honestly/precisely/closely executes the instruction, then consider its helpfulness, accuracy, level of detail, harmlessness, etc.
(2) Outputs should NOT contain more/less than what the instruction asks for, as such outputs do NOT precisely execute the instruction.
(3) You should avoid any potential bias and your judgment should be as objective as possible. For example, the order in which the outputs were presented should NOT affect your judgment, as Output (a) and Output (b) are **equally likely** to be the better.

Do NOT provide any explanation for your choice.
Do NOT say both / neither are good.
You should answer using ONLY "Output (a)" or "Output (b)". Do NOT output any other words.

# Instruction:
{instruction}

# Output (a):
{response_a}

# Output (b):
{response_b}

# Questions about Outputs:
Here are at most three questions about the outputs, which are presented from most important to least important. You can do the evaluation based on thinking about all the questions.
* Does the output well satisfy the intent of the user request?
* If applicable, is the output well-grounded in the given context information?
* Does the output itself satisfy the requirements of good writing in terms of:
    1) Coherence
    2) Logicality
    3) Plausibility
    4) Interestingness


# Which is better, Output (a) or Output (b)? Your response should be either "Output (a)" or "Output (b)":)tmpl";
  return PromptTemplate(std::string(kSystem), std::string(kUser), "Output (a)",
                        "Output (b)");
}

// JSON document: {"system": str, "user": str, "verdicts": [str, str]}.
inline PromptTemplate PromptTemplateFromJson(const nlohmann::json& doc) {
  try {
    const auto& verdicts = doc.at("verdicts");
    if (!verdicts.is_array() || verdicts.size() != 2) {
      throw DataError("judge template needs exactly two verdict strings");
    }
    return PromptTemplate(doc.at("system").get<std::string>(),
                          doc.at("user").get<std::string>(),
                          verdicts[0].get<std::string>(),
                          verdicts[1].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("judge template: ") + e.what());
  }
}

inline nlohmann::json PromptTemplateToJson(const PromptTemplate& t) {
  return {{"system", t.system_text()},
          {"user", t.user_text()},
          {"verdicts", {t.verdict_a(), t.verdict_b()}}};
}

inline PromptTemplate LoadPromptTemplate(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open judge template '" + path.string() + "'");
  try {
    return PromptTemplateFromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

struct RenderedPrompt {
  std::string system;
  std::string user;
};

// Single left-to-right pass, so placeholder-like text inside the substituted
// values is copied through untouched.
inline RenderedPrompt RenderJudgePrompt(const PromptTemplate& tmpl,
                                        std::string_view instruction,
                                        std::string_view response_a,
                                        std::string_view response_b) {
  const std::string& src = tmpl.user_text();
  std::string out;
  out.reserve(src.size() + instruction.size() + response_a.size() +
              response_b.size());
  std::size_t i = 0;
  while (i < src.size()) {
    if (src[i] == '{') {
      const std::string_view rest(src.data() + i, src.size() - i);
      bool replaced = false;
      for (const auto& [placeholder, value] :
           {std::pair{PromptTemplate::kInstruction, instruction},
            std::pair{PromptTemplate::kResponseA, response_a},
            std::pair{PromptTemplate::kResponseB, response_b}}) {
        if (rest.starts_with(placeholder)) {
          out += value;
          i += placeholder.size();
          replaced = true;
          break;
        }
      }
      if (replaced) continue;
    }
    out += src[i++];
  }
  return {tmpl.system_text(), std::move(out)};
}

// Whitespace- and case-insensitive exact match against the two verdicts.
inline std::optional<Side> TryParseVerdict(std::string_view reply,
                                           const PromptTemplate& tmpl) {
  const auto r = text::ToLower(text::Trim(reply));
  if (r == text::ToLower(text::Trim(tmpl.verdict_a()))) return Side::kA;
  if (r == text::ToLower(text::Trim(tmpl.verdict_b()))) return Side::kB;
  return std::nullopt;
}

inline Side ParseVerdict(std::string_view reply, const PromptTemplate& tmpl) {
  if (text::Trim(reply).empty()) throw DataError("empty judge reply");
  if (auto side = TryParseVerdict(reply, tmpl)) return *side;
  throw DataError("unparseable verdict: '" + std::string(reply) + "'");
}

// ---------------------------------------------------------------- ordering

struct PositionOrderResult {
  ModelId first;
  ModelId second;
  bool swapped;
};

// Lexicographic order on even ordinals, reversed on odd ones.
inline PositionOrderResult PositionOrder(std::size_t prompt_ordinal,
                                         const ModelId& a, const ModelId& b) {
  if (a == b) throw DataError("position order needs two distinct models");
  const ModelId& lo = a < b ? a : b;
  const ModelId& hi = a < b ? b : a;
  if (prompt_ordinal % 2 == 1) return {hi, lo, true};
  return {lo, hi, false};
}

// ---------------------------------------------------------------- backends

struct SimulatedUnbiased {
  double precision = 1.0;
  std::shared_ptr<const RatingTable> gt_ratings;
  std::uint64_t seed = 0;
};

struct DeterministicOracle {
  std::shared_ptr<const RatingTable> gt_ratings;
};

struct Cached {
  std::shared_ptr<const MatchCache> cache;
};

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::chrono::milliseconds timeout{60000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Performs one POST. Throws (any std::exception) on connection failures and
// timeouts; HTTP error statuses are returned, not thrown.
using HttpTransport = std::function<HttpResponse(const HttpRequest&)>;

struct External {
  std::string endpoint;
  PromptTemplate prompt_template = DefaultPromptTemplate();
  // Name of the environment variable holding the bearer token; empty for none.
  std::string auth_env;
  std::chrono::milliseconds timeout{60000};
  int retries = 3;
  std::chrono::milliseconds backoff{500};
  int max_tokens = 6;
  HttpTransport transport;
  // Distinguishes judge configurations in ledgers; defaults to the endpoint.
  std::string label;
};

using JudgeSpec = std::variant<SimulatedUnbiased, DeterministicOracle, Cached, External>;

inline void ValidateJudge(const JudgeSpec& judge) {
  std::visit(
      [](const auto& j) {
        using J = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<J, SimulatedUnbiased>) {
          if (!(j.precision >= 0.0 && j.precision <= 1.0)) {
            throw UsageError("judge precision must lie in [0, 1]");
          }
          if (!j.gt_ratings) throw UsageError("simulated judge needs ratings");
        } else if constexpr (std::is_same_v<J, DeterministicOracle>) {
          if (!j.gt_ratings) throw UsageError("oracle judge needs ratings");
        } else if constexpr (std::is_same_v<J, Cached>) {
          if (!j.cache) throw UsageError("cached judge needs a cache");
        } else {
          if (j.endpoint.empty()) throw UsageError("external judge needs an endpoint");
          if (j.retries < 0) throw UsageError("retries must be non-negative");
        }
      },
      judge);
}

inline std::string JudgeId(const JudgeSpec& judge) {
  return std::visit(
      [](const auto& j) -> std::string {
        using J = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<J, SimulatedUnbiased>) {
          return "simulated:" + text::FormatDouble(j.precision);
        } else if constexpr (std::is_same_v<J, DeterministicOracle>) {
          return "oracle";
        } else if constexpr (std::is_same_v<J, Cached>) {
          return "cache";
        } else {
          return "external:" + (j.label.empty() ? j.endpoint : j.label);
        }
      },
      judge);
}

// One draw of the noisy-judge model. The higher-rated side (side A when the
// ratings are equal and `a_is_higher_on_tie`) wins with probability
// precision * ExpectedWinRate(higher, lower). At equal ratings this gives the
// designated side precision / 2, so the model is not symmetric there.
inline Side SimulatedOutcome(double precision, double rating_a, double rating_b,
                             CounterStream& stream, bool a_is_higher_on_tie = true) {
  const bool a_higher =
      rating_a > rating_b || (rating_a == rating_b && a_is_higher_on_tie);
  const double high = a_higher ? rating_a : rating_b;
  const double low = a_higher ? rating_b : rating_a;
  const double p_high = precision * ExpectedWinRate(high, low);
  const bool high_wins = stream.NextUnit() < p_high;
  return (high_wins == a_higher) ? Side::kA : Side::kB;
}

namespace judge_internal {

inline std::string ExtractReply(const std::string& body) {
  nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) return body;
  if (doc.is_string()) return doc.get<std::string>();
  if (!doc.is_object()) return body;
  for (const char* key : {"text", "content", "verdict", "output"}) {
    if (doc.contains(key) && doc[key].is_string()) return doc[key].get<std::string>();
  }
  if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
    const auto& c = doc["choices"][0];
    if (c.contains("message") && c["message"].contains("content") &&
        c["message"]["content"].is_string()) {
      return c["message"]["content"].get<std::string>();
    }
    if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
  }
  return body;
}

inline ModelId AskExternal(const External& judge, PromptView prompt,
                           const ModelId& first, const ModelId& second,
                           const OutputStore* outputs) {
  const auto fail = [&](const std::string& msg, std::string raw = {}) {
    return JudgeError(msg, std::string(prompt.id), first.str(), second.str(),
                      std::move(raw));
  };
  if (!outputs) throw fail("external judge needs model outputs");
  const std::string* out_first = outputs->Find(prompt.id, first);
  const std::string* out_second = outputs->Find(prompt.id, second);
  if (!out_first || !out_second) throw fail("missing model output");
  if (!judge.transport) throw fail("external judge has no HTTP transport");

  const RenderedPrompt rendered = RenderJudgePrompt(
      judge.prompt_template, prompt.instruction, *out_first, *out_second);
  HttpRequest request;
  request.url = judge.endpoint;
  request.timeout = judge.timeout;
  request.headers.emplace_back("Content-Type", "application/json");
  if (!judge.auth_env.empty()) {
    const char* token = std::getenv(judge.auth_env.c_str());
    if (!token || !*token) {
      throw fail("environment variable " + judge.auth_env + " is not set");
    }
    request.headers.emplace_back("Authorization", std::string("Bearer ") + token);
  }
  request.body = nlohmann::json{{"system", rendered.system},
                                {"user", rendered.user},
                                {"max_tokens", judge.max_tokens}}
                     .dump();

  std::string last_error;
  std::string last_reply;
  for (int attempt = 0; attempt <= judge.retries; ++attempt) {
    if (attempt > 0 && judge.backoff.count() > 0) {
      std::this_thread::sleep_for(judge.backoff * (1 << std::min(attempt - 1, 6)));
    }
    HttpResponse response;
    try {
      response = judge.transport(request);
    } catch (const std::exception& e) {
      last_error = std::string("transport error: ") + e.what();
      continue;
    }
    if (response.status == 429 || response.status >= 500) {
      last_error = "HTTP " + std::to_string(response.status);
      continue;
    }
    if (response.status < 200 || response.status >= 300) {
      throw fail("HTTP " + std::to_string(response.status), response.body);
    }
    last_reply = ExtractReply(response.body);
    if (auto side = TryParseVerdict(last_reply, judge.prompt_template)) {
      return *side == Side::kA ? first : second;
    }
    last_error = "unparseable verdict";
  }
  throw fail(last_error + " after " + std::to_string(judge.retries + 1) +
                 " attempt(s)",
             last_reply);
}

}  // namespace judge_internal

// Adjudicates one match. `outputs` is only consulted by the external backend.
inline MatchRecord JudgeMatch(const JudgeSpec& judge, PromptView prompt,
                              const ModelId& model_a, const ModelId& model_b,
                              const OutputStore* outputs = nullptr,
                              std::optional<std::int64_t> trial_id = std::nullopt) {
  if (model_a == model_b) {
    throw DataError("cannot judge '" + model_a.str() + "' against itself");
  }
  MatchRecord record{std::string(prompt.id), model_a, model_b, model_a,
                     JudgeId(judge), false, trial_id};
  const auto fail = [&](const std::string& msg) {
    return JudgeError(msg, std::string(prompt.id), model_a.str(), model_b.str());
  };
  const auto rating = [&](const RatingTable& table, const ModelId& m) {
    const auto it = table.ratings.find(m);
    if (it == table.ratings.end()) throw fail("no rating for '" + m.str() + "'");
    return it->second;
  };

  std::visit(
      [&](const auto& j) {
        using J = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<J, SimulatedUnbiased>) {
          const ModelId& lo = model_a < model_b ? model_a : model_b;
          const ModelId& hi = model_a < model_b ? model_b : model_a;
          CounterStream stream(StreamKey(j.seed, "match", prompt.id, lo.str(), hi.str()));
          const Side side =
              SimulatedOutcome(j.precision, rating(*j.gt_ratings, model_a),
                               rating(*j.gt_ratings, model_b), stream, model_a < model_b);
          record.winner = side == Side::kA ? model_a : model_b;
        } else if constexpr (std::is_same_v<J, DeterministicOracle>) {
          const double ra = rating(*j.gt_ratings, model_a);
          const double rb = rating(*j.gt_ratings, model_b);
          if (ra != rb) {
            record.winner = ra > rb ? model_a : model_b;
          } else {
            // No higher-rated side: alternate with the prompt ordinal.
            const ModelId& lo = model_a < model_b ? model_a : model_b;
            const ModelId& hi = model_a < model_b ? model_b : model_a;
            record.winner = prompt.ordinal % 2 == 0 ? lo : hi;
          }
        } else if constexpr (std::is_same_v<J, Cached>) {
          const CacheEntry* entry = j.cache->Find(prompt.id, model_a, model_b);
          if (!entry) throw fail("cache miss");
          record.winner = entry->winner;
          record.position_swapped = entry->second < entry->first;
        } else {
          const auto order = PositionOrder(prompt.ordinal, model_a, model_b);
          record.winner =
              judge_internal::AskExternal(j, prompt, order.first, order.second, outputs);
          record.position_swapped = order.swapped;
        }
      },
      judge);
  return record;
}

// ---------------------------------------------------------------- full grid

struct FullGridOptions {
  unsigned threads = 1;
  // When set, verdicts already in this file are reused and new ones are
  // appended as they arrive; the file is rewritten in canonical order at the
  // end.
  std::optional<std::filesystem::path> cache_path;
};

struct GridFailure {
  std::string prompt_id;
  ModelId first;
  ModelId second;
  std::string message;
};

struct FullGridReport {
  MatchCache cache;
  std::size_t expected_entries = 0;
  std::size_t reused = 0;
  std::size_t requested = 0;
  std::vector<GridFailure> failures;  // the retry manifest

  bool complete() const { return failures.empty() && cache.size() == expected_entries; }
};

// Judges every unordered pair on every prompt once, showing the pair in
// PositionOrder. Individual failures are collected instead of aborting.
inline FullGridReport BuildFullGridCache(std::span<const ModelId> models,
                                         const PromptSet& prompts,
                                         const JudgeSpec& judge,
                                         const OutputStore* outputs,
                                         const FullGridOptions& options = {}) {
  ValidateJudge(judge);
  const auto sorted = SortedUniqueModels(models);
  if (sorted.size() < 2) throw DataError("full grid needs at least two models");

  FullGridReport report;
  if (options.cache_path && std::filesystem::exists(*options.cache_path)) {
    report.cache = ReadCache(*options.cache_path);
  }
  const std::size_t n = sorted.size();
  report.expected_entries = prompts.size() * n * (n - 1) / 2;

  struct Task {
    std::size_t ordinal;
    std::size_t i;
    std::size_t j;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (report.cache.Contains(prompts[p].id, sorted[i], sorted[j])) {
          ++report.reused;
        } else {
          tasks.push_back({p, i, j});
        }
      }
    }
  }
  report.requested = tasks.size();

  std::optional<LineAppender> appender;
  if (options.cache_path) appender.emplace(*options.cache_path, kCacheHeader);

  std::vector<std::optional<CacheEntry>> results(tasks.size());
  std::vector<std::string> errors(tasks.size());
  ParallelFor(tasks.size(), options.threads, [&](std::size_t t) {
    const Task& task = tasks[t];
    const PromptView view = prompts.View(task.ordinal);
    const auto order = PositionOrder(task.ordinal, sorted[task.i], sorted[task.j]);
    try {
      const MatchRecord r = JudgeMatch(judge, view, order.first, order.second, outputs);
      CacheEntry entry{order.first, order.second, r.winner};
      if (appender) appender->Append(FormatCacheLine(view.id, entry));
      results[t] = std::move(entry);
    } catch (const Error& e) {
      errors[t] = e.what();
    }
  });

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& prompt_id = prompts[tasks[t].ordinal].id;
    if (results[t]) {
      report.cache.Insert(prompt_id, *results[t]);
    } else {
      const auto order = PositionOrder(tasks[t].ordinal, sorted[tasks[t].i],
                                       sorted[tasks[t].j]);
      report.failures.push_back({prompt_id, order.first, order.second, errors[t]});
    }
  }

  if (options.cache_path) {
    appender.reset();
    auto tmp = *options.cache_path;
    tmp += ".tmp";
    WriteCache(report.cache, tmp);
    std::filesystem::rename(tmp, *options.cache_path);
  }
  return report;
}

}  // namespace bracketrank
