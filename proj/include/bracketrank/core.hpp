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

// Domain value types shared by every module: identifiers, prompt sets,
// response stores, match records, the match ledger, rating tables,
// leaderboards and the full-grid verdict cache.

#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bracketrank/error.hpp"
#include "bracketrank/text.hpp"

namespace bracketrank {

class ModelId {
 public:
  explicit ModelId(std::string name) : name_(std::move(name)) {
    if (!text::IsToken(name_)) {
      throw DataError("invalid model id '" + name_ +
                      "': must be a non-empty token without whitespace or "
                      "commas");
    }
  }

  const std::string& str() const noexcept { return name_; }

  friend auto operator<=>(const ModelId&, const ModelId&) = default;
  friend bool operator==(const ModelId&, const ModelId&) = default;

 private:
  std::string name_;
};

// Sorted, de-duplicated copy; throws on duplicates.
inline std::vector<ModelId> SortedUniqueModels(std::span<const ModelId> models) {
  std::vector<ModelId> sorted(models.begin(), models.end());
  std::sort(sorted.begin(), sorted.end());
  const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
  if (dup != sorted.end()) {
    throw DataError("duplicate participant '" + dup->str() + "'");
  }
  return sorted;
}

struct Prompt {
  std::string id;
  std::string instruction;
  std::optional<std::string> stratum;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

// A prompt together with its position in the owning PromptSet. The ordinal
// drives response-position alternation for real judges.
struct PromptView {
  std::string_view id;
  std::string_view instruction;
  std::size_t ordinal = 0;
};

class PromptSet {
 public:
  explicit PromptSet(std::vector<Prompt> prompts) : prompts_(std::move(prompts)) {
    if (prompts_.empty()) throw DataError("empty prompt set");
    for (std::size_t i = 0; i < prompts_.size(); ++i) {
      const Prompt& p = prompts_[i];
      if (!text::IsToken(p.id)) {
        throw DataError("invalid prompt id '" + p.id + "'");
      }
      if (p.stratum && !p.stratum->empty() && !text::IsToken(*p.stratum)) {
        throw DataError("invalid stratum '" + *p.stratum + "' for prompt '" +
                        p.id + "'");
      }
      if (!index_.emplace(p.id, i).second) {
        throw DataError("duplicate prompt_id '" + p.id + "'");
      }
    }
  }

  // Synthetic prompts with ids "<prefix>0", "<prefix>1", ... and no text.
  static PromptSet Synthetic(std::size_t count, std::string_view prefix = "sim-") {
    std::vector<Prompt> prompts;
    prompts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      prompts.push_back({std::string(prefix) + std::to_string(i), "", std::nullopt});
    }
    return PromptSet(std::move(prompts));
  }

  std::size_t size() const noexcept { return prompts_.size(); }
  const Prompt& operator[](std::size_t i) const { return prompts_[i]; }
  std::span<const Prompt> prompts() const noexcept { return prompts_; }

  PromptView View(std::size_t i) const {
    return {prompts_[i].id, prompts_[i].instruction, i};
  }

  std::optional<std::size_t> IndexOf(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const PromptSet& a, const PromptSet& b) {
    return a.prompts_ == b.prompts_;
  }

 private:
  std::vector<Prompt> prompts_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Response text per (prompt_id, model).
class OutputStore {
 public:
  OutputStore() = default;

  // Returns false if the pair was already present.
  bool Insert(std::string prompt_id, const ModelId& model, std::string response) {
    return outputs_.emplace(Key{std::move(prompt_id), model.str()},
                            std::move(response)).second;
  }

  const std::string* Find(std::string_view prompt_id, const ModelId& model) const {
    const auto it = outputs_.find(Key{std::string(prompt_id), model.str()});
    return it == outputs_.end() ? nullptr : &it->second;
  }

  std::size_t size() const noexcept { return outputs_.size(); }

  // Iterates (prompt_id, model_id) -> response in key order.
  const auto& entries() const noexcept { return outputs_; }

  friend bool operator==(const OutputStore&, const OutputStore&) = default;

 private:
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::string> outputs_;
};

struct MatchRecord {
  std::string prompt_id;
  ModelId model_a;
  ModelId model_b;
  ModelId winner;
  std::string judge_id;
  bool position_swapped = false;
  std::optional<std::int64_t> trial_id;

  const ModelId& loser() const { return winner == model_a ? model_b : model_a; }

  void Validate() const {
    if (model_a == model_b) {
      throw DataError("match record pairs '" + model_a.str() + "' with itself");
    }
    if (winner != model_a && winner != model_b) {
      throw DataError("match record winner '" + winner.str() +
                      "' is not one of '" + model_a.str() + "', '" +
                      model_b.str() + "'");
    }
  }

  friend bool operator==(const MatchRecord&, const MatchRecord&) = default;
};

// Append-only sequence of adjudicated matches.
class MatchLedger {
 public:
  MatchLedger() = default;

  void Append(MatchRecord record) {
    record.Validate();
    records_.push_back(std::move(record));
  }

  void Append(const MatchLedger& other) {
    records_.insert(records_.end(), other.records_.begin(), other.records_.end());
  }

  static MatchLedger Concat(const MatchLedger& a, const MatchLedger& b) {
    MatchLedger out = a;
    out.Append(b);
    return out;
  }

  std::span<const MatchRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  friend bool operator==(const MatchLedger&, const MatchLedger&) = default;

 private:
  std::vector<MatchRecord> records_;
};

struct FitMeta {
  std::int64_t iterations = 0;
  double gradient_norm = 0;
  double regularization = 0;

  friend bool operator==(const FitMeta&, const FitMeta&) = default;
};

struct RatingTable {
  std::map<ModelId, double> ratings;
  double anchor_mean = 1000.0;
  FitMeta fit_meta;

  double at(const ModelId& model) const {
    const auto it = ratings.find(model);
    if (it == ratings.end()) {
      throw DataError("no rating for model '" + model.str() + "'");
    }
    return it->second;
  }

  bool contains(const ModelId& model) const { return ratings.contains(model); }

  friend bool operator==(const RatingTable&, const RatingTable&) = default;
};

struct LeaderboardEntry {
  int rank = 1;
  ModelId model;
  double score = 0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;

  friend bool operator==(const LeaderboardEntry&, const LeaderboardEntry&) = default;
};

// Entries sorted by score, highest first, with competition ranks (1,2,2,4).
class Leaderboard {
 public:
  Leaderboard() = default;

  explicit Leaderboard(std::vector<LeaderboardEntry> entries)
      : entries_(std::move(entries)) {
    std::set<ModelId> seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (!seen.insert(e.model).second) {
        throw DataError("leaderboard lists '" + e.model.str() + "' twice");
      }
      if (i > 0 && e.score > entries_[i - 1].score) {
        throw DataError("leaderboard is not sorted by descending score at '" +
                        e.model.str() + "'");
      }
      const int expected =
          (i > 0 && e.score == entries_[i - 1].score)
              ? entries_[i - 1].rank
              : static_cast<int>(i) + 1;
      if (e.rank != expected) {
        throw DataError("leaderboard rank for '" + e.model.str() + "' is " +
                        std::to_string(e.rank) + ", expected " +
                        std::to_string(expected));
      }
      if (e.ci_low.has_value() != e.ci_high.has_value()) {
        throw DataError("leaderboard entry '" + e.model.str() +
                        "' has only one confidence bound");
      }
      if (e.ci_low && !(*e.ci_low <= e.score && e.score <= *e.ci_high)) {
        throw DataError("leaderboard entry '" + e.model.str() +
                        "' has score outside its confidence interval");
      }
    }
  }

  // Assigns competition ranks to (model, score) rows already in display order.
  static Leaderboard FromOrdered(
      std::span<const std::pair<ModelId, double>> rows,
      std::span<const std::pair<double, double>> cis = {}) {
    std::vector<LeaderboardEntry> entries;
    entries.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const int rank = (i > 0 && rows[i].second == rows[i - 1].second)
                           ? entries.back().rank
                           : static_cast<int>(i) + 1;
      LeaderboardEntry e{rank, rows[i].first, rows[i].second, std::nullopt,
                         std::nullopt};
      if (!cis.empty()) {
        e.ci_low = cis[i].first;
        e.ci_high = cis[i].second;
      }
      entries.push_back(std::move(e));
    }
    return Leaderboard(std::move(entries));
  }

  std::span<const LeaderboardEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::vector<ModelId> Order() const {
    std::vector<ModelId> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.model);
    return out;
  }

  friend bool operator==(const Leaderboard&, const Leaderboard&) = default;

 private:
  std::vector<LeaderboardEntry> entries_;
};

// One cached verdict. `first` is the model whose response was shown first.
struct CacheEntry {
  ModelId first;
  ModelId second;
  ModelId winner;

  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

// Verdicts keyed by (prompt, unordered pair). Lookups of (a, b) and (b, a)
// resolve to the same entry.
class MatchCache {
 public:
  MatchCache() = default;

  // Returns false if an identical entry was already present; throws on a
  // conflicting duplicate.
  bool Insert(const std::string& prompt_id, CacheEntry entry) {
    if (entry.first == entry.second) {
      throw DataError("cache entry pairs '" + entry.first.str() + "' with itself");
    }
    if (entry.winner != entry.first && entry.winner != entry.second) {
      throw DataError("cache entry winner '" + entry.winner.str() +
                      "' is not in the pair");
    }
    auto key = MakeKey(prompt_id, entry.first, entry.second);
    const auto [it, inserted] = entries_.emplace(std::move(key), entry);
    if (!inserted && it->second != entry) {
      throw DataError("conflicting cache entries for prompt '" + prompt_id +
                      "' pair " + entry.first.str() + "," + entry.second.str());
    }
    return inserted;
  }

  const CacheEntry* Find(std::string_view prompt_id, const ModelId& a,
                         const ModelId& b) const {
    const auto it = entries_.find(MakeKey(std::string(prompt_id), a, b));
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool Contains(std::string_view prompt_id, const ModelId& a,
                const ModelId& b) const {
    return Find(prompt_id, a, b) != nullptr;
  }

  std::size_t size() const noexcept { return entries_.size(); }

  // (prompt_id, lo, hi) -> entry in key order.
  const auto& entries() const noexcept { return entries_; }

  friend bool operator==(const MatchCache&, const MatchCache&) = default;

 private:
  using Key = std::tuple<std::string, std::string, std::string>;

  static Key MakeKey(std::string prompt_id, const ModelId& a, const ModelId& b) {
    return a < b ? Key{std::move(prompt_id), a.str(), b.str()}
                 : Key{std::move(prompt_id), b.str(), a.str()};
  }

  std::map<Key, CacheEntry> entries_;
};

}  // namespace bracketrank

template <>
struct std::hash<bracketrank::ModelId> {
  std::size_t operator()(const bracketrank::ModelId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
