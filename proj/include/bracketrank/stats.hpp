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

// Rank agreement metrics, bootstrap intervals and stratified prompt
// subsampling.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bracketrank/core.hpp"
#include "bracketrank/error.hpp"
#include "bracketrank/random.hpp"

namespace bracketrank {

// 1-based ranks, tied values sharing the average of the positions they span.
inline std::vector<double> AverageRanks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

// Pearson correlation. Returns 0 when either side has zero variance, where
// the coefficient is undefined.
inline double Pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Spearman correlation of two paired samples (ties get average ranks).
inline double Spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("spearman needs samples of equal length");
  if (x.size() < 2) throw DataError("spearman needs at least two items");
  const auto rx = AverageRanks(x);
  const auto ry = AverageRanks(y);
  return Pearson(rx, ry);
}

namespace stats_internal {

// Per model: the leaderboard's competition rank moved to the middle of its
// tie block, e.g. ranks 1,2,2,4 become 1,2.5,2.5,4.
inline std::map<ModelId, double> FractionalRanks(const Leaderboard& board) {
  std::map<int, int> block_size;
  for (const auto& e : board.entries()) ++block_size[e.rank];
  std::map<ModelId, double> out;
  for (const auto& e : board.entries()) {
    out.emplace(e.model, e.rank + 0.5 * (block_size[e.rank] - 1));
  }
  return out;
}

inline void RequireSameModels(const Leaderboard& a, const Leaderboard& b) {
  std::vector<ModelId> ma = a.Order();
  std::vector<ModelId> mb = b.Order();
  std::sort(ma.begin(), ma.end());
  std::sort(mb.begin(), mb.end());
  if (ma != mb) throw DataError("leaderboards rank different model sets");
}

}  // namespace stats_internal

inline double Spearman(const Leaderboard& a, const Leaderboard& b) {
  stats_internal::RequireSameModels(a, b);
  if (a.size() < 2) throw DataError("spearman needs at least two items");
  const auto ra = stats_internal::FractionalRanks(a);
  const auto rb = stats_internal::FractionalRanks(b);
  std::vector<double> x, y;
  for (const auto& [model, r] : ra) {
    x.push_back(r);
    y.push_back(rb.at(model));
  }
  return Pearson(x, y);
}

inline double MeanRankDeviation(const Leaderboard& predicted,
                                const Leaderboard& ground_truth) {
  stats_internal::RequireSameModels(predicted, ground_truth);
  if (predicted.size() == 0) throw DataError("empty leaderboards");
  std::map<ModelId, int> gt;
  for (const auto& e : ground_truth.entries()) gt.emplace(e.model, e.rank);
  double total = 0;
  for (const auto& e : predicted.entries()) total += std::abs(e.rank - gt.at(e.model));
  return total / static_cast<double>(predicted.size());
}

// Midpoint median.
inline double Median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty sample");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

// Linearly interpolated empirical quantile of sorted data (R type 7).
inline double QuantileSorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct BootstrapInterval {
  double median;
  double lo;
  double hi;

  friend bool operator==(const BootstrapInterval&, const BootstrapInterval&) = default;
};

// Percentile bootstrap of the median: `n_resamples` resamples with
// replacement, reporting the median of the resampled medians and their
// (1 - level) / 2 and 1 - (1 - level) / 2 quantiles.
inline BootstrapInterval BootstrapCi(std::span<const double> samples,
                                     std::size_t n_resamples, double level,
                                     std::uint64_t seed) {
  if (samples.empty()) throw DataError("bootstrap needs at least one sample");
  if (n_resamples < 1) throw DataError("bootstrap needs at least one resample");
  if (!(level > 0 && level < 1)) throw DataError("confidence level must lie in (0, 1)");
  CounterStream stream(StreamKey(seed, "bootstrap"));
  std::vector<double> medians(n_resamples);
  std::vector<double> draw(samples.size());
  for (std::size_t r = 0; r < n_resamples; ++r) {
    for (auto& d : draw) d = samples[stream.NextBelow(samples.size())];
    medians[r] = Median(draw);
  }
  std::sort(medians.begin(), medians.end());
  const double alpha = (1.0 - level) / 2.0;
  return {QuantileSorted(medians, 0.5), QuantileSorted(medians, alpha),
          QuantileSorted(medians, 1.0 - alpha)};
}

// Largest-remainder apportionment of k items over strata of the given sizes.
// Remainder ties go to the earlier stratum.
inline std::vector<std::size_t> StratumAllocation(std::span<const std::size_t> sizes,
                                                  std::size_t k) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (k > total) throw DataError("cannot allocate more items than available");
  std::vector<std::size_t> alloc(sizes.size());
  std::vector<std::size_t> remainder(sizes.size());
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    alloc[s] = k * sizes[s] / total;
    remainder[s] = k * sizes[s] % total;
    assigned += alloc[s];
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (std::size_t i = 0; assigned < k; ++i, ++assigned) ++alloc[order[i]];
  return alloc;
}

// Draws k prompts preserving per-stratum proportions. Prompts without a
// stratum form one implicit stratum. Output keeps the original order.
inline PromptSet StratifiedSubsample(const PromptSet& prompts, std::size_t k,
                                     std::uint64_t seed) {
  if (k < 1 || k > prompts.size()) {
    throw DataError("subsample size " + std::to_string(k) + " outside [1, " +
                    std::to_string(prompts.size()) + "]");
  }
  if (k == prompts.size()) return prompts;

  std::vector<std::optional<std::string>> labels;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto& stratum = prompts[i].stratum;
    auto it = std::find(labels.begin(), labels.end(), stratum);
    if (it == labels.end()) {
      labels.push_back(stratum);
      members.emplace_back();
      it = labels.end() - 1;
    }
    members[static_cast<std::size_t>(it - labels.begin())].push_back(i);
  }
  std::vector<std::size_t> sizes;
  for (const auto& m : members) sizes.push_back(m.size());
  const auto alloc = StratumAllocation(sizes, k);

  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t s = 0; s < members.size(); ++s) {
    auto pool = members[s];
    CounterStream stream(labels[s] ? StreamKey(seed, "stratum", *labels[s])
                                   : StreamKey(seed, "stratum-none"));
    // Partial Fisher-Yates: the first alloc[s] slots become the sample.
    for (std::size_t i = 0; i < alloc[s]; ++i) {
      const auto j = i + static_cast<std::size_t>(stream.NextBelow(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(alloc[s]));
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<Prompt> subset;
  subset.reserve(k);
  for (std::size_t i : chosen) subset.push_back(prompts[i]);
  return PromptSet(std::move(subset));
}

}  // namespace bracketrank
