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

#ifndef FAIRCONF_CONFORMAL_H_
#define FAIRCONF_CONFORMAL_H_

// Split conformal prediction for classification.
//
// Calibration scores are s_i = 1 - p_i[y_i]. For error rate alpha and n
// calibration scores, q_hat is the k-th smallest score with
// k = ceil((n + 1)(1 - alpha)), or +infinity when k > n. A test sample's
// prediction set holds every class y with p_y >= 1 - q_hat. On exchangeable
// data, 1 - alpha <= P(y in set) <= 1 - alpha + 1/(n + 1).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace fairconf {

struct CalibrationResult {
  double alpha = 0.1;
  size_t n_calibration = 0;
  size_t rank = 0;  // k, 1-based order statistic
  double q_hat = 0.0;  // +infinity when rank > n_calibration
  std::string score_kind = "one_minus_true_prob";

  bool overflow() const { return rank > n_calibration; }

  // The guaranteed coverage band [1 - alpha, 1 - alpha + 1/(n + 1)].
  double coverage_lower() const { return 1.0 - alpha; }
  double coverage_upper() const {
    return 1.0 - alpha + 1.0 / (static_cast<double>(n_calibration) + 1.0);
  }

  friend bool operator==(const CalibrationResult&,
                         const CalibrationResult&) = default;
};

struct SetEntry {
  int label = 0;
  double confidence = 0.0;

  friend bool operator==(const SetEntry&, const SetEntry&) = default;
};

struct PredictionSet {
  std::string sample_id;
  // Sorted by confidence descending, ties by ascending class index.
  std::vector<SetEntry> entries;
  // The threshold admitted no class; entries holds just the argmax.
  bool forced_top1 = false;
  std::optional<int> truth;
  bool contains_truth = false;
  std::optional<size_t> truth_rank;       // 1-based position of the truth
  std::optional<double> truth_confidence;  // set when contains_truth

  size_t size() const { return entries.size(); }

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

// s_i = 1 - probs(i, truths[i]). Rows must sum to 1 within 1e-6.
std::vector<double> NonconformityScores(const Eigen::MatrixXd& probs,
                                        std::span<const int> truths);

// k = ceil((n + 1)(1 - alpha)). Products within 1e-9 (relative) of an
// integer are treated as that integer so decimal alphas such as 0.2 behave
// as written.
size_t CalibrationRank(size_t n, double alpha);

// Throws DataError on empty scores, ConfigError when alpha is not in (0, 1).
CalibrationResult Calibrate(std::span<const double> scores, double alpha);

PredictionSet PredictSet(std::span<const double> prob_row,
                         const CalibrationResult& calibration,
                         std::string sample_id,
                         std::optional<int> truth = std::nullopt);

// Fraction of sets containing their truth. Throws DataError if a set has no
// truth; returns 0 for an empty list.
double EmpiricalCoverage(std::span<const PredictionSet> sets);

using GroupSelector = std::function<std::string(const PredictionSet&)>;
using SetSizeHistogramMap = std::map<std::string, std::map<size_t, size_t>>;

// Group value -> (set size -> count).
SetSizeHistogramMap SetSizeHistogram(std::span<const PredictionSet> sets,
                                     const GroupSelector& group_of);

// One JSON object per line:
// {"id":..,"entries":[[class,confidence],..],"forced":..,"truth":..,
//  "contains_truth":..}; confidences carry exactly 6 decimals.
std::string FormatPredictionSetLine(const PredictionSet& set);
PredictionSet ParsePredictionSetLine(const std::string& line);
void WritePredictionSets(std::span<const PredictionSet> sets,
                         const std::filesystem::path& path);
std::vector<PredictionSet> ReadPredictionSets(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const CalibrationResult& calibration);
void from_json(const nlohmann::json& j, CalibrationResult& calibration);

}  // namespace fairconf

#endif  // FAIRCONF_CONFORMAL_H_
