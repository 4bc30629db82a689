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

#include "fairconf/conformal.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fairconf/errors.h"
#include "text_io.h"

namespace fairconf {

std::vector<double> NonconformityScores(const Eigen::MatrixXd& probs,
                                        std::span<const int> truths) {
  if (truths.size() != static_cast<size_t>(probs.rows())) {
    throw DataError("truth count does not match probability rows");
  }
  std::vector<double> scores;
  scores.reserve(truths.size());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-6) {
      throw NumericError("probability row " + std::to_string(i) +
                         " does not sum to 1");
    }
    const int truth = truths[static_cast<size_t>(i)];
    if (truth < 0 || truth >= probs.cols()) {
      throw DataError("invalid truth index " + std::to_string(truth));
    }
    scores.push_back(std::clamp(1.0 - probs(i, truth), 0.0, 1.0));
  }
  return scores;
}

size_t CalibrationRank(size_t n, double alpha) {
  const double target = static_cast<double>(n + 1) * (1.0 - alpha);
  const double nearest = std::round(target);
  if (std::abs(target - nearest) <= 1e-9 * std::max(1.0, target)) {
    return static_cast<size_t>(nearest);
  }
  return static_cast<size_t>(std::ceil(target));
}

CalibrationResult Calibrate(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw DataError("calibration needs at least one score");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must be in (0, 1)");
  }
  CalibrationResult result;
  result.alpha = alpha;
  result.n_calibration = scores.size();
  result.rank = CalibrationRank(scores.size(), alpha);
  if (result.overflow()) {
    result.q_hat = std::numeric_limits<double>::infinity();
    return result;
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  const auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(result.rank - 1);
  std::nth_element(sorted.begin(), kth, sorted.end());
  result.q_hat = *kth;
  return result;
}

PredictionSet PredictSet(std::span<const double> prob_row,
                         const CalibrationResult& calibration,
                         std::string sample_id, std::optional<int> truth) {
  if (prob_row.empty()) throw DataError("empty probability row");
  PredictionSet set;
  set.sample_id = std::move(sample_id);
  const double threshold = 1.0 - calibration.q_hat;  // -inf on overflow
  std::vector<SetEntry> all;
  all.reserve(prob_row.size());
  for (size_t c = 0; c < prob_row.size(); ++c) {
    all.push_back({static_cast<int>(c), prob_row[c]});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const SetEntry& a, const SetEntry& b) {
                     return a.confidence > b.confidence;
                   });
  for (const SetEntry& e : all) {
    if (e.confidence >= threshold) set.entries.push_back(e);
  }
  if (set.entries.empty()) {
    set.entries.push_back(all.front());
    set.forced_top1 = true;
  }
  if (truth) {
    if (*truth < 0 || static_cast<size_t>(*truth) >= prob_row.size()) {
      throw DataError("invalid truth index " + std::to_string(*truth));
    }
    set.truth = truth;
    for (size_t r = 0; r < set.entries.size(); ++r) {
      if (set.entries[r].label == *truth) {
        set.contains_truth = true;
        set.truth_rank = r + 1;
        set.truth_confidence = set.entries[r].confidence;
        break;
      }
    }
  }
  return set;
}

double EmpiricalCoverage(std::span<const PredictionSet> sets) {
  if (sets.empty()) return 0.0;
  size_t covered = 0;
  for (const PredictionSet& s : sets) {
    if (!s.truth) {
      throw DataError("set '" + s.sample_id + "' has no truth label");
    }
    if (s.contains_truth) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(sets.size());
}

SetSizeHistogramMap SetSizeHistogram(std::span<const PredictionSet> sets,
                                     const GroupSelector& group_of) {
  SetSizeHistogramMap histogram;
  for (const PredictionSet& s : sets) ++histogram[group_of(s)][s.size()];
  return histogram;
}

std::string FormatPredictionSetLine(const PredictionSet& set) {
  std::string line = "{\"id\":" + nlohmann::json(set.sample_id).dump() +
                     ",\"entries\":[";
  for (size_t i = 0; i < set.entries.size(); ++i) {
    if (i) line += ',';
    line += '[' + std::to_string(set.entries[i].label) + ',' +
            internal::FormatFixed(set.entries[i].confidence, 6) + ']';
  }
  line += "],\"forced\":";
  line += set.forced_top1 ? "true" : "false";
  line += ",\"truth\":";
  line += set.truth ? std::to_string(*set.truth) : "null";
  line += ",\"contains_truth\":";
  line += set.contains_truth ? "true" : "false";
  line += '}';
  return line;
}

PredictionSet ParsePredictionSetLine(const std::string& line) {
  PredictionSet set;
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    set.sample_id = j.at("id").get<std::string>();
    for (const auto& entry : j.at("entries")) {
      if (!entry.is_array() || entry.size() != 2) {
        throw DataError("entry must be [class, confidence]");
      }
      set.entries.push_back({entry[0].get<int>(), entry[1].get<double>()});
    }
    set.forced_top1 = j.at("forced").get<bool>();
    if (!j.at("truth").is_null()) set.truth = j.at("truth").get<int>();
    set.contains_truth = j.at("contains_truth").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("prediction set record: ") + e.what());
  }
  if (set.entries.empty()) throw DataError("prediction set has no entries");
  for (size_t r = 1; r < set.entries.size(); ++r) {
    if (set.entries[r].confidence > set.entries[r - 1].confidence) {
      throw DataError("prediction set entries are not sorted by confidence");
    }
  }
  bool found = false;
  if (set.truth) {
    for (size_t r = 0; r < set.entries.size(); ++r) {
      if (set.entries[r].label == *set.truth) {
        found = true;
        set.truth_rank = r + 1;
        set.truth_confidence = set.entries[r].confidence;
        break;
      }
    }
  }
  if (found != set.contains_truth) {
    throw DataError("set '" + set.sample_id +
                    "': contains_truth disagrees with its entries");
  }
  return set;
}

void WritePredictionSets(std::span<const PredictionSet> sets,
                         const std::filesystem::path& path) {
  std::ofstream out = internal::OpenForWrite(path);
  for (const PredictionSet& s : sets) out << FormatPredictionSetLine(s) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<PredictionSet> ReadPredictionSets(
    const std::filesystem::path& path) {
  std::ifstream in = internal::OpenForRead(path);
  std::vector<PredictionSet> sets;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (internal::Trim(line).empty()) continue;
    try {
      sets.push_back(ParsePredictionSetLine(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_number) +
                      ": " + e.what());
    }
  }
  return sets;
}

void to_json(nlohmann::json& j, const CalibrationResult& calibration) {
  j = nlohmann::json{
      {"alpha", calibration.alpha},
      {"n_calibration", calibration.n_calibration},
      {"rank", calibration.rank},
      // JSON has no infinity; overflow is encoded as null.
      {"q_hat", calibration.overflow() ? nlohmann::json(nullptr)
                                       : nlohmann::json(calibration.q_hat)},
      {"score_kind", calibration.score_kind},
      {"coverage_band",
       {calibration.coverage_lower(), calibration.coverage_upper()}}};
}

void from_json(const nlohmann::json& j, CalibrationResult& calibration) {
  try {
    calibration.alpha = j.at("alpha").get<double>();
    calibration.n_calibration = j.at("n_calibration").get<size_t>();
    calibration.rank = j.at("rank").get<size_t>();
    calibration.q_hat = j.at("q_hat").is_null()
                            ? std::numeric_limits<double>::infinity()
                            : j.at("q_hat").get<double>();
    calibration.score_kind = j.at("score_kind").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("calibration record: ") + e.what());
  }
}

}  // namespace fairconf
