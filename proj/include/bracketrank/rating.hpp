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

// Elo ratings from a match ledger.
//
// The ratings maximize the Bradley-Terry likelihood with the Elo link
//
//   P(i beats j) = 1 / (1 + base^((R_j - R_i) / scale)).
//
// Writing theta = R * ln(base) / scale, we minimize
//
//   f(theta) = (1/N) sum_{records} softplus(theta_loser - theta_winner)
//              + (lambda / 2) sum_k (theta_k - mean(theta))^2
//
// with damped Newton steps restricted to the zero-sum subspace (f is
// translation invariant). The penalty keeps all-win and all-loss models
// finite and ties disconnected components of the comparison graph together.
// Ratings are shifted afterwards so their mean equals FitConfig::anchor_mean.
//
// Wins are first aggregated into an integer matrix over lexicographically
// ordered models, so the fit is bit-identical under any permutation of the
// ledger.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bracketrank/core.hpp"
#include "bracketrank/error.hpp"

namespace bracketrank {

inline constexpr double kEloScale = 400.0;
inline constexpr double kEloBase = 10.0;

// Expected probability that a player rated `rating_i` beats one rated
// `rating_j`.
inline double ExpectedWinRate(double rating_i, double rating_j,
                              double scale = kEloScale, double base = kEloBase) {
  return 1.0 / (1.0 + std::pow(base, (rating_j - rating_i) / scale));
}

struct FitConfig {
  double scale = kEloScale;
  double base = kEloBase;
  double anchor_mean = 1000.0;
  // Penalty on mean-centered ratings in logit units, per record.
  double l2_lambda = 1e-6;
  int max_iterations = 100;
  double gradient_tolerance = 1e-10;

  void Validate() const {
    if (!(scale > 0)) throw UsageError("fit scale must be positive");
    if (!(base > 1)) throw UsageError("fit base must exceed 1");
    if (!(l2_lambda >= 0)) throw UsageError("l2_lambda must be non-negative");
    if (max_iterations < 1) throw UsageError("max_iterations must be at least 1");
    if (!(gradient_tolerance > 0)) {
      throw UsageError("gradient_tolerance must be positive");
    }
  }
};

namespace rating_internal {

inline double Softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Newton steps below this (logit units, ~1.7e-4 Elo) count as settled.
inline constexpr double kStepTolerance = 1e-6;

struct Problem {
  Eigen::MatrixXd wins;  // wins(i, j): times i beat j
  double inv_records = 0;
  double lambda = 0;

  Eigen::Index size() const { return wins.rows(); }

  double Objective(const Eigen::VectorXd& theta) const {
    const Eigen::Index n = size();
    double nll = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (wins(i, j) > 0) nll += wins(i, j) * Softplus(theta(j) - theta(i));
      }
    }
    const double mean = theta.mean();
    return nll * inv_records +
           0.5 * lambda * (theta.array() - mean).square().sum();
  }

  void GradientAndHessian(const Eigen::VectorXd& theta, Eigen::VectorXd& grad,
                          Eigen::MatrixXd& hess) const {
    const Eigen::Index n = size();
    grad.setZero(n);
    hess.setZero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double games = wins(i, j) + wins(j, i);
        if (games == 0) continue;
        // Both tails from Sigmoid directly; 1 - p would round to zero long
        // before the tail underflows and fake a stationary point.
        const double p = Sigmoid(theta(i) - theta(j));  // P(i beats j)
        const double q = Sigmoid(theta(j) - theta(i));
        // d/dtheta_i of the pair's NLL: games * p - wins(i, j).
        const double g = (wins(j, i) * p - wins(i, j) * q) * inv_records;
        grad(i) += g;
        grad(j) -= g;
        const double h = games * p * q * inv_records;
        hess(i, i) += h;
        hess(j, j) += h;
        hess(i, j) -= h;
        hess(j, i) -= h;
      }
    }
    const double mean = theta.mean();
    grad.array() += lambda * (theta.array() - mean);
    hess -= Eigen::MatrixXd::Constant(n, n, lambda / static_cast<double>(n));
    hess.diagonal().array() += lambda;
  }
};

}  // namespace rating_internal

inline RatingTable FitElo(const MatchLedger& ledger, const FitConfig& config = {}) {
  using rating_internal::kStepTolerance;
  config.Validate();
  if (ledger.empty()) throw DataError("cannot fit ratings to an empty ledger");

  std::map<ModelId, Eigen::Index> index;
  for (const auto& r : ledger.records()) {
    index.emplace(r.model_a, 0);
    index.emplace(r.model_b, 0);
  }
  if (index.size() < 2) throw DataError("rating fit needs at least two models");
  {
    Eigen::Index k = 0;
    for (auto& [model, i] : index) i = k++;
  }
  const auto n = static_cast<Eigen::Index>(index.size());

  rating_internal::Problem problem;
  problem.wins.setZero(n, n);
  for (const auto& r : ledger.records()) {
    problem.wins(index.at(r.winner), index.at(r.loser())) += 1.0;
  }
  problem.inv_records = 1.0 / static_cast<double>(ledger.size());
  problem.lambda = config.l2_lambda;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd hess(n, n);
  // The Hessian is singular along the all-ones direction; adding the
  // projector onto it, scaled to the Hessian's own magnitude, makes the
  // system solvable without changing the step within the zero-sum subspace.
  const Eigen::MatrixXd ones_projector =
      Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));

  double grad_norm = std::numeric_limits<double>::infinity();
  double objective = problem.Objective(theta);
  int iter = 0;
  bool converged = false;
  for (; iter < config.max_iterations; ++iter) {
    problem.GradientAndHessian(theta, grad, hess);
    grad_norm = grad.lpNorm<Eigen::Infinity>();
    const double curvature = hess.diagonal().mean();
    if (!(curvature > 0)) break;
    Eigen::VectorXd step = -(hess + curvature * ones_projector).ldlt().solve(grad);
    step.array() -= step.mean();
    if (!step.allFinite()) break;
    const double step_norm = step.lpNorm<Eigen::Infinity>();
    if (grad_norm < config.gradient_tolerance && step_norm < kStepTolerance) {
      converged = true;
      break;
    }
    const double slope = grad.dot(step);
    // Predicted decrease below the objective's rounding error: the line
    // search can no longer tell better from worse, so take the plain step.
    if (-slope <= 1e-14 * (1.0 + std::abs(objective))) {
      theta += step;
      objective = problem.Objective(theta);
      continue;
    }
    // Backtracking line search (Armijo).
    double t = 1.0;
    Eigen::VectorXd candidate = theta + step;
    double candidate_obj = problem.Objective(candidate);
    for (int halvings = 0;
         halvings < 60 && !(candidate_obj <= objective + 1e-4 * t * slope);
         ++halvings) {
      t *= 0.5;
      candidate = theta + t * step;
      candidate_obj = problem.Objective(candidate);
    }
    if (!(candidate_obj <= objective)) {
      // No decrease is possible at double precision; accept the point if the
      // gradient already meets the tolerance.
      converged = grad_norm < config.gradient_tolerance;
      break;
    }
    theta = std::move(candidate);
    objective = candidate_obj;
  }
  if (!converged) {
    throw ConvergenceError(
        "rating fit did not converge within " +
            std::to_string(config.max_iterations) +
            " iterations (last gradient norm " + text::FormatDouble(grad_norm) +
            ")",
        grad_norm);
  }

  RatingTable table;
  table.anchor_mean = config.anchor_mean;
  table.fit_meta = {iter, grad_norm, config.l2_lambda};
  const double to_elo = config.scale / std::log(config.base);
  const double mean = theta.mean();
  for (const auto& [model, i] : index) {
    table.ratings.emplace(model, config.anchor_mean + (theta(i) - mean) * to_elo);
  }
  return table;
}

// Descending by score; exact ties share a competition rank and are listed in
// lexicographic model order.
inline Leaderboard RankFromScores(const std::map<ModelId, double>& scores) {
  if (scores.empty()) throw DataError("cannot rank an empty score table");
  std::vector<std::pair<ModelId, double>> rows(scores.begin(), scores.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  return Leaderboard::FromOrdered(rows);
}

inline std::map<ModelId, double> WinrateVsAnchorFromRatings(
    const RatingTable& table, const ModelId& anchor,
    double scale = kEloScale, double base = kEloBase) {
  if (!table.contains(anchor)) {
    throw DataError("anchor '" + anchor.str() + "' is not in the rating table");
  }
  const double anchor_rating = table.at(anchor);
  std::map<ModelId, double> out;
  for (const auto& [model, r] : table.ratings) {
    out.emplace(model, model == anchor ? 0.5
                                       : ExpectedWinRate(r, anchor_rating, scale, base));
  }
  return out;
}

// Win rate of each model against the reference, from a ledger in which every
// match involves the reference.
inline std::map<ModelId, double> AnchoredScores(const MatchLedger& ledger,
                                                const ModelId& ref_model) {
  std::map<ModelId, std::pair<std::int64_t, std::int64_t>> tally;  // wins, games
  for (const auto& r : ledger.records()) {
    if (r.model_a != ref_model && r.model_b != ref_model) {
      throw DataError("anchored ledger contains non-reference match " +
                      r.model_a.str() + " vs " + r.model_b.str());
    }
    const ModelId& other = r.model_a == ref_model ? r.model_b : r.model_a;
    auto& [wins, games] = tally[other];
    ++games;
    if (r.winner == other) ++wins;
  }
  std::map<ModelId, double> scores;
  for (const auto& [model, t] : tally) {
    scores.emplace(model, static_cast<double>(t.first) / static_cast<double>(t.second));
  }
  return scores;
}

enum class Outcome { kWin, kLoss };
enum class Usefulness { kUseful, kUseless };

// Whether comparing two models against a reference on one prompt separates
// them: only when the reference falls between the two.
constexpr Usefulness ClassifyAnchoredUsefulness(Outcome a_vs_ref, Outcome b_vs_ref) {
  return a_vs_ref != b_vs_ref ? Usefulness::kUseful : Usefulness::kUseless;
}

}  // namespace bracketrank
