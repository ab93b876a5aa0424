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

// File formats.
//
// Line-delimited files are UTF-8, one record per line, fields separated by a
// single tab. Fields are escaped with text::EscapeField so embedded tabs and
// newlines survive. Lines starting with '#' are comments (the writers emit a
// column header comment) and blank lines are ignored.
//
//   prompts   prompt_id  stratum  instruction          (stratum may be empty)
//   outputs   prompt_id  model_id  response
//   ledger    prompt_id  model_a  model_b  winner  judge_id  position_swapped
//             trial_id                                 (swapped is 0/1,
//                                                       trial_id may be empty)
//   cache     prompt_id  model_first  model_second  winner
//
// A ledger may carry one "#resume-from<TAB><ordinal>" line, written when a run
// stopped early; it names the first prompt ordinal that has no records.
//
// Rating tables are JSON documents; leaderboards are CSV with a header row or
// a JSON document.

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bracketrank/core.hpp"
#include "bracketrank/error.hpp"
#include "bracketrank/text.hpp"
#include "json.hpp"

namespace bracketrank {

namespace io_internal {

inline std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream OpenForWrite(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void CheckWritten(std::ostream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

// Calls fn(line_number, fields) for every data line.
template <typename Fn>
void ForEachRecord(std::istream& in, const std::string& source,
                   std::size_t expected_fields, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto raw = text::Split(line, '\t');
    if (raw.size() != expected_fields) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(expected_fields) + " tab-separated fields, got " +
                      std::to_string(raw.size()));
    }
    std::vector<std::string> fields;
    fields.reserve(raw.size());
    for (auto f : raw) {
      auto unescaped = text::UnescapeField(f);
      if (!unescaped) {
        throw DataError(source + ":" + std::to_string(line_no) +
                        ": bad escape sequence");
      }
      fields.push_back(std::move(*unescaped));
    }
    try {
      fn(line_no, fields);
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::string JoinFields(std::initializer_list<std::string_view> fields) {
  std::string out;
  bool first = true;
  for (auto f : fields) {
    if (!first) out += '\t';
    out += text::EscapeField(f);
    first = false;
  }
  return out;
}

}  // namespace io_internal

// ---------------------------------------------------------------- prompts

inline PromptSet ParsePromptSet(std::istream& in, const std::string& source) {
  std::vector<Prompt> prompts;
  std::set<std::string> seen;
  io_internal::ForEachRecord(in, source, 3, [&](std::size_t, auto& f) {
    if (!seen.insert(f[0]).second) {
      throw DataError("duplicate prompt_id '" + f[0] + "'");
    }
    Prompt p{f[0], f[2], std::nullopt};
    if (!f[1].empty()) p.stratum = f[1];
    if (!text::IsToken(p.id)) throw DataError("invalid prompt id '" + p.id + "'");
    if (p.stratum && !text::IsToken(*p.stratum)) {
      throw DataError("invalid stratum '" + *p.stratum + "'");
    }
    prompts.push_back(std::move(p));
  });
  if (prompts.empty()) throw DataError(source + ": empty prompt set");
  return PromptSet(std::move(prompts));
}

inline PromptSet LoadPromptSet(const std::filesystem::path& path) {
  auto in = io_internal::OpenForRead(path);
  return ParsePromptSet(in, path.string());
}

inline void WritePromptSet(const PromptSet& prompts, std::ostream& out) {
  out << "#prompt_id\tstratum\tinstruction\n";
  for (const auto& p : prompts.prompts()) {
    out << io_internal::JoinFields({p.id, p.stratum.value_or(""), p.instruction})
        << '\n';
  }
}

inline void WritePromptSet(const PromptSet& prompts,
                           const std::filesystem::path& path) {
  auto out = io_internal::OpenForWrite(path);
  WritePromptSet(prompts, out);
  io_internal::CheckWritten(out, path);
}

// ---------------------------------------------------------------- outputs

// Keeps rows for the given participants and prompts (other rows are
// ignored) and requires every (prompt, participant) pair to be present.
inline OutputStore ParseOutputStore(std::istream& in, const std::string& source,
                                    std::span<const ModelId> participants,
                                    const PromptSet& prompts) {
  if (participants.empty()) throw DataError("no participants");
  const std::set<ModelId> wanted(participants.begin(), participants.end());
  OutputStore store;
  io_internal::ForEachRecord(in, source, 3, [&](std::size_t, auto& f) {
    const ModelId model(f[1]);
    if (!wanted.contains(model) || !prompts.IndexOf(f[0])) return;
    if (!store.Insert(f[0], model, f[2])) {
      throw DataError("duplicate output for prompt '" + f[0] + "' model '" +
                      f[1] + "'");
    }
  });
  std::vector<std::string> gaps;
  for (const auto& p : prompts.prompts()) {
    for (const auto& m : wanted) {
      if (!store.Find(p.id, m)) gaps.push_back("(" + p.id + ", " + m.str() + ")");
    }
  }
  if (!gaps.empty()) {
    std::string msg = source + ": missing " + std::to_string(gaps.size()) +
                      " output(s):";
    for (const auto& g : gaps) msg += " " + g;
    throw DataError(msg);
  }
  return store;
}

inline OutputStore LoadOutputStore(const std::filesystem::path& path,
                                   std::span<const ModelId> participants,
                                   const PromptSet& prompts) {
  auto in = io_internal::OpenForRead(path);
  return ParseOutputStore(in, path.string(), participants, prompts);
}

inline void WriteOutputStore(const OutputStore& store, std::ostream& out) {
  out << "#prompt_id\tmodel_id\tresponse\n";
  for (const auto& [key, response] : store.entries()) {
    out << io_internal::JoinFields({key.first, key.second, response}) << '\n';
  }
}

inline void WriteOutputStore(const OutputStore& store,
                             const std::filesystem::path& path) {
  auto out = io_internal::OpenForWrite(path);
  WriteOutputStore(store, out);
  io_internal::CheckWritten(out, path);
}

// ---------------------------------------------------------------- ledger

struct LedgerFile {
  MatchLedger ledger;
  std::optional<std::size_t> resume_from;
};

inline std::string FormatLedgerRecord(const MatchRecord& r) {
  const std::string trial = r.trial_id ? std::to_string(*r.trial_id) : "";
  return io_internal::JoinFields({r.prompt_id, r.model_a.str(), r.model_b.str(),
                                  r.winner.str(), r.judge_id,
                                  r.position_swapped ? "1" : "0", trial});
}

inline void WriteLedger(const MatchLedger& ledger, std::ostream& out,
                        std::optional<std::size_t> resume_from = std::nullopt) {
  out << "#prompt_id\tmodel_a\tmodel_b\twinner\tjudge_id\tposition_swapped\t"
         "trial_id\n";
  if (resume_from) out << "#resume-from\t" << *resume_from << '\n';
  for (const auto& r : ledger.records()) out << FormatLedgerRecord(r) << '\n';
}

inline void WriteLedger(const MatchLedger& ledger,
                        const std::filesystem::path& path,
                        std::optional<std::size_t> resume_from = std::nullopt) {
  auto out = io_internal::OpenForWrite(path);
  WriteLedger(ledger, out, resume_from);
  io_internal::CheckWritten(out, path);
}

inline LedgerFile ParseLedger(std::istream& in, const std::string& source) {
  // The resume marker is a comment line, so it has to be picked out first.
  std::stringstream body;
  LedgerFile result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    constexpr std::string_view kMarker = "#resume-from\t";
    if (line.rfind(kMarker, 0) == 0) {
      const auto v = text::ParseInt(std::string_view(line).substr(kMarker.size()));
      if (!v || *v < 0) {
        throw DataError(source + ":" + std::to_string(line_no) +
                        ": bad resume marker");
      }
      result.resume_from = static_cast<std::size_t>(*v);
      body << "#\n";  // keeps line numbers aligned
      continue;
    }
    body << line << '\n';
  }
  io_internal::ForEachRecord(body, source, 7, [&](std::size_t, auto& f) {
    MatchRecord r{f[0], ModelId(f[1]), ModelId(f[2]), ModelId(f[3]), f[4],
                  false, std::nullopt};
    if (f[5] == "1") {
      r.position_swapped = true;
    } else if (f[5] != "0") {
      throw DataError("position_swapped must be 0 or 1");
    }
    if (!f[6].empty()) {
      const auto trial = text::ParseInt(f[6]);
      if (!trial) throw DataError("bad trial_id '" + f[6] + "'");
      r.trial_id = *trial;
    }
    result.ledger.Append(std::move(r));
  });
  return result;
}

inline LedgerFile ReadLedger(const std::filesystem::path& path) {
  auto in = io_internal::OpenForRead(path);
  return ParseLedger(in, path.string());
}

// Serializes appends from many threads into one line-oriented file. Each
// line is flushed before Append returns, so readers always see a prefix of
// complete lines.
class LineAppender {
 public:
  explicit LineAppender(const std::filesystem::path& path,
                        std::string_view header = {})
      : path_(path) {
    const bool fresh = !std::filesystem::exists(path) ||
                       std::filesystem::file_size(path) == 0;
    if (path.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(path.parent_path(), ec);
    }
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw DataError("cannot open '" + path.string() + "' for append");
    if (fresh && !header.empty()) out_ << header << '\n' << std::flush;
  }

  void Append(const std::string& line) {
    std::lock_guard lock(mu_);
    out_ << line << '\n' << std::flush;
    if (!out_) throw DataError("append to '" + path_.string() + "' failed");
  }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

// ---------------------------------------------------------------- cache

inline constexpr std::string_view kCacheHeader =
    "#prompt_id\tmodel_first\tmodel_second\twinner";

inline std::string FormatCacheLine(std::string_view prompt_id,
                                   const CacheEntry& e) {
  return io_internal::JoinFields(
      {prompt_id, e.first.str(), e.second.str(), e.winner.str()});
}

inline void WriteCache(const MatchCache& cache, std::ostream& out) {
  out << kCacheHeader << '\n';
  for (const auto& [key, entry] : cache.entries()) {
    out << FormatCacheLine(std::get<0>(key), entry) << '\n';
  }
}

inline void WriteCache(const MatchCache& cache,
                       const std::filesystem::path& path) {
  auto out = io_internal::OpenForWrite(path);
  WriteCache(cache, out);
  io_internal::CheckWritten(out, path);
}

inline MatchCache ParseCache(std::istream& in, const std::string& source) {
  MatchCache cache;
  io_internal::ForEachRecord(in, source, 4, [&](std::size_t, auto& f) {
    cache.Insert(f[0], CacheEntry{ModelId(f[1]), ModelId(f[2]), ModelId(f[3])});
  });
  return cache;
}

inline MatchCache ReadCache(const std::filesystem::path& path) {
  auto in = io_internal::OpenForRead(path);
  return ParseCache(in, path.string());
}

// ---------------------------------------------------------------- ratings

inline nlohmann::json RatingTableToJson(const RatingTable& table) {
  nlohmann::json ratings = nlohmann::json::object();
  for (const auto& [model, r] : table.ratings) ratings[model.str()] = r;
  return {
      {"anchor_mean", table.anchor_mean},
      {"fit",
       {{"iterations", table.fit_meta.iterations},
        {"gradient_norm", table.fit_meta.gradient_norm},
        {"regularization", table.fit_meta.regularization}}},
      {"ratings", ratings},
  };
}

// "anchor_mean" defaults to the mean of the ratings and "fit" is optional,
// so a bare {"ratings": {...}} document is accepted as ground truth.
inline RatingTable RatingTableFromJson(const nlohmann::json& doc) {
  RatingTable table;
  if (!doc.is_object() || !doc.contains("ratings") || !doc["ratings"].is_object()) {
    throw DataError("rating table needs a \"ratings\" object");
  }
  double sum = 0;
  for (const auto& [name, value] : doc["ratings"].items()) {
    if (!value.is_number()) throw DataError("rating for '" + name + "' is not a number");
    const double r = value.get<double>();
    if (!std::isfinite(r)) throw DataError("rating for '" + name + "' is not finite");
    table.ratings.emplace(ModelId(name), r);
    sum += r;
  }
  if (table.ratings.empty()) throw DataError("rating table is empty");
  table.anchor_mean = doc.contains("anchor_mean")
                          ? doc["anchor_mean"].get<double>()
                          : sum / static_cast<double>(table.ratings.size());
  if (doc.contains("fit")) {
    const auto& fit = doc["fit"];
    table.fit_meta.iterations = fit.value("iterations", std::int64_t{0});
    table.fit_meta.gradient_norm = fit.value("gradient_norm", 0.0);
    table.fit_meta.regularization = fit.value("regularization", 0.0);
  }
  return table;
}

inline void WriteRatingTable(const RatingTable& table,
                             const std::filesystem::path& path) {
  auto out = io_internal::OpenForWrite(path);
  out << RatingTableToJson(table).dump(2) << '\n';
  io_internal::CheckWritten(out, path);
}

inline RatingTable ReadRatingTable(const std::filesystem::path& path) {
  auto in = io_internal::OpenForRead(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    return RatingTableFromJson(doc);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- leaderboard

inline void WriteLeaderboardCsv(const Leaderboard& board, std::ostream& out) {
  out << "rank,model,score,ci_low,ci_high\n";
  for (const auto& e : board.entries()) {
    out << e.rank << ',' << e.model.str() << ',' << text::FormatDouble(e.score)
        << ',' << (e.ci_low ? text::FormatDouble(*e.ci_low) : "") << ','
        << (e.ci_high ? text::FormatDouble(*e.ci_high) : "") << '\n';
  }
}

inline void WriteLeaderboardCsv(const Leaderboard& board,
                                const std::filesystem::path& path) {
  auto out = io_internal::OpenForWrite(path);
  WriteLeaderboardCsv(board, out);
  io_internal::CheckWritten(out, path);
}

inline Leaderboard ParseLeaderboardCsv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<LeaderboardEntry> entries;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "rank,model,score,ci_low,ci_high") {
        throw DataError(source + ":1: expected header rank,model,score,ci_low,ci_high");
      }
      header_seen = true;
      continue;
    }
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    const auto f = text::Split(line, ',');
    if (f.size() != 5) throw DataError(where + "expected 5 comma-separated fields");
    const auto rank = text::ParseInt(f[0]);
    const auto score = text::ParseDouble(f[2]);
    if (!rank || !score) throw DataError(where + "bad rank or score");
    LeaderboardEntry e{static_cast<int>(*rank), ModelId(std::string(f[1])), *score,
                       std::nullopt, std::nullopt};
    if (!f[3].empty() || !f[4].empty()) {
      e.ci_low = text::ParseDouble(f[3]);
      e.ci_high = text::ParseDouble(f[4]);
      if (!e.ci_low || !e.ci_high) throw DataError(where + "bad confidence bounds");
    }
    entries.push_back(std::move(e));
  }
  if (!header_seen) throw DataError(source + ": empty leaderboard file");
  try {
    return Leaderboard(std::move(entries));
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

inline Leaderboard ReadLeaderboardCsv(const std::filesystem::path& path) {
  auto in = io_internal::OpenForRead(path);
  return ParseLeaderboardCsv(in, path.string());
}

inline nlohmann::json LeaderboardToJson(const Leaderboard& board) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : board.entries()) {
    entries.push_back({
        {"rank", e.rank},
        {"model", e.model.str()},
        {"score", e.score},
        {"ci_low", e.ci_low ? nlohmann::json(*e.ci_low) : nlohmann::json()},
        {"ci_high", e.ci_high ? nlohmann::json(*e.ci_high) : nlohmann::json()},
    });
  }
  return {{"entries", entries}};
}

inline Leaderboard LeaderboardFromJson(const nlohmann::json& doc) {
  std::vector<LeaderboardEntry> entries;
  for (const auto& item : doc.at("entries")) {
    LeaderboardEntry e{item.at("rank").get<int>(),
                       ModelId(item.at("model").get<std::string>()),
                       item.at("score").get<double>(), std::nullopt, std::nullopt};
    if (item.contains("ci_low") && !item["ci_low"].is_null()) {
      e.ci_low = item["ci_low"].get<double>();
    }
    if (item.contains("ci_high") && !item["ci_high"].is_null()) {
      e.ci_high = item["ci_high"].get<double>();
    }
    entries.push_back(std::move(e));
  }
  return Leaderboard(std::move(entries));
}

inline void WriteLeaderboardJson(const Leaderboard& board,
                                 const std::filesystem::path& path) {
  auto out = io_internal::OpenForWrite(path);
  out << LeaderboardToJson(board).dump(2) << '\n';
  io_internal::CheckWritten(out, path);
}

// Accepts either format, chosen by extension (.json, anything else is CSV).
inline Leaderboard ReadLeaderboard(const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    auto in = io_internal::OpenForRead(path);
    try {
      return LeaderboardFromJson(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return ReadLeaderboardCsv(path);
}

}  // namespace bracketrank
