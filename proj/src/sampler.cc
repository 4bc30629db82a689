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

#include "fairconf/sampler.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairconf/errors.h"
#include "fairconf/random.h"

namespace fairconf {
namespace {

std::vector<double> Normalized(std::vector<double> values) {
  double total = 0.0;
  for (const double v : values) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericError("cannot normalize weights with sum " +
                       std::to_string(total));
  }
  for (double& v : values) v /= total;
  return values;
}

double ResolveOne(const ThresholdPolicy& policy, double mean, double stddev) {
  switch (policy.kind) {
    case ThresholdPolicy::Kind::kFixed:
      return policy.value;
    case ThresholdPolicy::Kind::kMeanPlusSigma:
      return mean + policy.value * stddev;
  }
  return policy.value;
}

}  // namespace

void SamplerConfig::Validate() const {
  if (update_period < 1) throw ConfigError("sampler: update_period must be >= 1");
  if (cv_folds < 1) throw ConfigError("sampler: cv_folds must be >= 1");
  if (!(f1_epsilon > 0.0) || f1_epsilon > 1.0) {
    throw ConfigError("sampler: f1_epsilon must be in (0, 1]");
  }
  for (const auto* p : {&lambda_policy, &beta_policy}) {
    if (!std::isfinite(p->value)) {
      throw ConfigError("sampler: policy values must be finite");
    }
  }
}

std::vector<double> InitFrequencyWeights(std::span<const size_t> counts) {
  if (counts.empty()) throw DataError("no class counts given");
  std::vector<double> inverse;
  inverse.reserve(counts.size());
  for (size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw DataError("class " + std::to_string(c) +
                      " has zero training samples");
    }
    inverse.push_back(1.0 / static_cast<double>(counts[c]));
  }
  return Normalized(std::move(inverse));
}

std::vector<double> F1ToWeights(std::span<const double> f1_scores,
                                double f1_epsilon) {
  if (f1_scores.empty()) throw DataError("no F1 scores given");
  std::vector<double> inverse;
  inverse.reserve(f1_scores.size());
  for (const double f1 : f1_scores) {
    if (!(f1 >= 0.0 && f1 <= 1.0)) {
      throw NumericError("F1 score outside [0, 1]: " + std::to_string(f1));
    }
    inverse.push_back(1.0 / std::max(f1, f1_epsilon));
  }
  return Normalized(std::move(inverse));
}

std::vector<double> ApplyThreshold(std::span<const double> weights,
                                   double lambda, double beta) {
  if (!(beta > 0.0)) throw ConfigError("baseline weight beta must be positive");
  if (beta > lambda) {
    throw ConfigError("baseline weight beta (" + std::to_string(beta) +
                      ") exceeds threshold lambda (" + std::to_string(lambda) +
                      ")");
  }
  std::vector<double> raw(weights.begin(), weights.end());
  for (double& w : raw) {
    if (w < lambda) w = beta;
  }
  return Normalized(std::move(raw));
}

std::pair<double, double> ResolvePolicies(std::span<const double> weights,
                                          const SamplerConfig& config) {
  if (weights.size() < 2) {
    throw DataError("threshold policies need at least two classes");
  }
  const double n = static_cast<double>(weights.size());
  double mean = 0.0;
  for (const double w : weights) mean += w;
  mean /= n;
  double sq = 0.0;
  for (const double w : weights) sq += (w - mean) * (w - mean);
  const double stddev = std::sqrt(sq / n);

  const double lambda = ResolveOne(config.lambda_policy, mean, stddev);
  double beta = ResolveOne(config.beta_policy, mean, stddev);
  if (!(lambda > 0.0)) {
    throw NumericError("threshold lambda resolved to a non-positive value " +
                       std::to_string(lambda));
  }
  beta = std::min(beta, lambda);
  if (!(beta > 0.0)) {
    throw NumericError("baseline beta resolved to a non-positive value " +
                       std::to_string(beta));
  }
  return {lambda, beta};
}

SamplerState InitSamplerState(std::span<const size_t> counts,
                              const SamplerConfig& config) {
  config.Validate();
  SamplerState state;
  state.class_weights = InitFrequencyWeights(counts);
  state.last_update_epoch = 0;
  if (!config.recompute_policies) {
    state.frozen_lambda_beta = ResolvePolicies(state.class_weights, config);
  }
  return state;
}

SamplerState UpdateSampler(const SamplerState& state,
                           std::span<const double> f1_scores,
                           const SamplerConfig& config, int epoch) {
  if (epoch - state.last_update_epoch < config.update_period) return state;
  if (f1_scores.size() != state.class_weights.size()) {
    throw DataError("F1 vector length does not match the number of classes");
  }
  const std::vector<double> f1_weights =
      F1ToWeights(f1_scores, config.f1_epsilon);
  const auto [lambda, beta] = state.frozen_lambda_beta
                                  ? *state.frozen_lambda_beta
                                  : ResolvePolicies(f1_weights, config);
  SamplerState next = state;
  next.class_weights = ApplyThreshold(f1_weights, lambda, beta);
  next.last_update_epoch = epoch;
  return next;
}

std::vector<size_t> DrawEpochIndices(const SamplerState& state,
                                     std::span<const int> labels,
                                     size_t n_draws, uint64_t rng_seed) {
  const size_t n_classes = state.class_weights.size();
  std::vector<std::vector<size_t>> members(n_classes);
  for (size_t j = 0; j < labels.size(); ++j) {
    const int label = labels[j];
    if (label < 0 || static_cast<size_t>(label) >= n_classes) {
      throw DataError("label " + std::to_string(label) + " out of range");
    }
    members[label].push_back(j);
  }
  for (size_t c = 0; c < n_classes; ++c) {
    const double w = state.class_weights[c];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw NumericError("sampler weight for class " + std::to_string(c) +
                         " is invalid");
    }
    if (w > 0.0 && members[c].empty()) {
      throw DataError("class " + std::to_string(c) +
                      " has positive sampling weight but no samples");
    }
  }

  // Two-stage draw: class by weight, then a uniform member of that class.
  Rng rng(rng_seed);
  std::vector<size_t> drawn;
  drawn.reserve(n_draws);
  for (size_t k = 0; k < n_draws; ++k) {
    const size_t c = rng.Categorical(state.class_weights);
    drawn.push_back(members[c][rng.UniformIndex(members[c].size())]);
  }
  return drawn;
}

void to_json(nlohmann::json& j, const ThresholdPolicy& policy) {
  const char* key = policy.kind == ThresholdPolicy::Kind::kFixed
                        ? "fixed"
                        : "mean_plus_sigma";
  j = nlohmann::json{{key, policy.value}};
}

void from_json(const nlohmann::json& j, ThresholdPolicy& policy) {
  if (!j.is_object() || j.size() != 1) {
    throw ConfigError(
        "threshold policy must be {\"fixed\": v} or {\"mean_plus_sigma\": k}");
  }
  const auto it = j.begin();
  const std::string key = it.key();
  const nlohmann::json& value = it.value();
  if (!value.is_number()) throw ConfigError("threshold policy value must be a number");
  if (key == "fixed") {
    policy = ThresholdPolicy::Fixed(value.get<double>());
  } else if (key == "mean_plus_sigma") {
    policy = ThresholdPolicy::MeanPlusSigma(value.get<double>());
  } else {
    throw ConfigError("unknown threshold policy '" + key + "'");
  }
}

void to_json(nlohmann::json& j, const SamplerConfig& config) {
  j = nlohmann::json{{"lambda_policy", config.lambda_policy},
                     {"beta_policy", config.beta_policy},
                     {"update_period", config.update_period},
                     {"cv_folds", config.cv_folds},
                     {"f1_epsilon", config.f1_epsilon},
                     {"recompute_policies", config.recompute_policies}};
}

void from_json(const nlohmann::json& j, SamplerConfig& config) {
  SamplerConfig out;
  try {
    if (j.contains("lambda_policy")) out.lambda_policy = j.at("lambda_policy");
    if (j.contains("beta_policy")) out.beta_policy = j.at("beta_policy");
    out.update_period = j.value("update_period", out.update_period);
    out.cv_folds = j.value("cv_folds", out.cv_folds);
    out.f1_epsilon = j.value("f1_epsilon", out.f1_epsilon);
    out.recompute_policies =
        j.value("recompute_policies", out.recompute_policies);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sampler config: ") + e.what());
  }
  out.Validate();
  config = out;
}

}  // namespace fairconf
