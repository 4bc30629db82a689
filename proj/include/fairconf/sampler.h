/*
 * Copyright 2026 The fairconf Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FAIRCONF_SAMPLER_H_
#define FAIRCONF_SAMPLER_H_

// F1-driven class-weighted sampling.
//
// The sampler holds one weight per class. Weights start at normalized
// inverse class frequencies. Every `update_period` epochs they are replaced
// by normalized inverse validation F1 scores, after which every weight below
// a threshold lambda is lifted (or lowered) to a baseline beta and the vector
// is renormalized. Training indices for an epoch are then drawn with
// replacement so that class c is drawn with probability weights[c].

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

namespace fairconf {

// How lambda or beta is obtained from the current weight vector.
struct ThresholdPolicy {
  enum class Kind { kFixed, kMeanPlusSigma };

  Kind kind = Kind::kMeanPlusSigma;
  double value = 1.0;  // the fixed value, or k in mean + k * stddev

  static ThresholdPolicy Fixed(double v) { return {Kind::kFixed, v}; }
  static ThresholdPolicy MeanPlusSigma(double k) {
    return {Kind::kMeanPlusSigma, k};
  }

  friend bool operator==(const ThresholdPolicy&,
                         const ThresholdPolicy&) = default;
};

struct SamplerConfig {
  ThresholdPolicy lambda_policy = ThresholdPolicy::MeanPlusSigma(1.0);
  ThresholdPolicy beta_policy = ThresholdPolicy::MeanPlusSigma(2.0);
  int update_period = 4;  // epochs between weight refreshes
  int cv_folds = 10;      // validation folds averaged per F1 estimate
  double f1_epsilon = 1e-3;
  // When false, lambda and beta are resolved once from the initial
  // frequency weights and reused at every update.
  bool recompute_policies = true;

  void Validate() const;

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

struct SamplerState {
  std::vector<double> class_weights;
  int last_update_epoch = 0;
  // Set only when policies are frozen (recompute_policies == false).
  std::optional<std::pair<double, double>> frozen_lambda_beta;

  friend bool operator==(const SamplerState&, const SamplerState&) = default;
};

// w_i = (1 / n_i) / sum_j (1 / n_j). Throws DataError on a zero count.
std::vector<double> InitFrequencyWeights(std::span<const size_t> counts);

// Floors each score at f1_epsilon, inverts, and normalizes to sum 1.
std::vector<double> F1ToWeights(std::span<const double> f1_scores,
                                double f1_epsilon);

// Replaces each weight below lambda by beta, keeps the rest, renormalizes.
// Requires 0 < beta <= lambda (ConfigError otherwise).
std::vector<double> ApplyThreshold(std::span<const double> weights,
                                   double lambda, double beta);

// Resolves (lambda, beta) for the given weights. mean_plus_sigma uses the
// population standard deviation. beta is clamped to min(beta, lambda).
// Throws NumericError when lambda or beta resolves to a non-positive value.
std::pair<double, double> ResolvePolicies(std::span<const double> weights,
                                          const SamplerConfig& config);

// Initial state from training class counts; last_update_epoch = 0.
SamplerState InitSamplerState(std::span<const size_t> counts,
                              const SamplerConfig& config);

// Returns `state` unchanged when epoch - last_update_epoch < update_period.
// Otherwise the weights become
//   ApplyThreshold(F1ToWeights(f1_scores), lambda, beta)
// with (lambda, beta) resolved from the F1 weights (or the frozen pair), and
// last_update_epoch = epoch.
SamplerState UpdateSampler(const SamplerState& state,
                           std::span<const double> f1_scores,
                           const SamplerConfig& config, int epoch);

// Draws n_draws sample indices i.i.d. with replacement. Sample j is drawn
// with probability class_weights[labels[j]] / count(labels[j]). Throws
// DataError if a class with positive weight has no samples.
std::vector<size_t> DrawEpochIndices(const SamplerState& state,
                                     std::span<const int> labels,
                                     size_t n_draws, uint64_t rng_seed);

void to_json(nlohmann::json& j, const ThresholdPolicy& policy);
void from_json(const nlohmann::json& j, ThresholdPolicy& policy);
void to_json(nlohmann::json& j, const SamplerConfig& config);
void from_json(const nlohmann::json& j, SamplerConfig& config);

}  // namespace fairconf

#endif  // FAIRCONF_SAMPLER_H_
