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

#ifndef FAIRCONF_FAIRNESS_H_
#define FAIRCONF_FAIRNESS_H_

// Demographic audits over conformal prediction sets.
//
// Every metric joins prediction sets to sample metadata by id. Ratios with
// an empty denominator are reported as absent (std::nullopt, n = 0), never
// as zero.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fairconf/conformal.h"
#include "fairconf/data_model.h"
#include "json.hpp"

namespace fairconf {

enum class Axis { kAll, kSex, kAgeBand, kAnatomicalSite, kCohort };

// "all", "sex", "age_band", "anatomical_site", "cohort"
std::string_view ToString(Axis axis);
Axis ParseAxis(std::string_view text);

// The metadata value on an axis; "all" for Axis::kAll.
std::string AxisValue(Axis axis, const DemographicMetadata& metadata);

struct SubgroupKey {
  Axis axis = Axis::kAll;
  std::string value = "all";

  friend bool operator==(const SubgroupKey&, const SubgroupKey&) = default;
};

// Conjunction of subgroup keys; an empty filter matches every sample.
struct SubgroupFilter {
  std::vector<SubgroupKey> keys;

  bool Matches(const DemographicMetadata& metadata) const;
};

// A single axis, or several axes crossed (e.g. sex x age_band). Group values
// of a crossed grouping join the per-axis values with '|'.
using Grouping = std::vector<Axis>;

// "sex", "sex_x_age_band", ...
std::string GroupingName(const Grouping& grouping);
std::string GroupValue(const Grouping& grouping,
                       const DemographicMetadata& metadata);
// Parses "sex" or "sex_x_age_band".
Grouping ParseGrouping(std::string_view name);
// The filter selecting one value of a grouping.
SubgroupFilter FilterFor(const Grouping& grouping, std::string_view value);

using MetadataIndex = std::unordered_map<std::string, DemographicMetadata>;
MetadataIndex IndexMetadata(const Dataset& dataset);

struct A2Result {
  std::optional<double> a2;  // absent when n == 0
  size_t n = 0;              // class samples in the subgroup
};

// Fraction of the class's samples (in the subgroup) whose truth ranks first
// or second in its prediction set.
A2Result A2Accuracy(std::span<const PredictionSet> sets,
                    const MetadataIndex& metadata,
                    const SubgroupFilter& filter, int class_index);

// Truth confidences of the class's sets that contain the truth, ordered by
// sample id.
std::vector<double> TruthConfidenceDistribution(
    std::span<const PredictionSet> sets, const MetadataIndex& metadata,
    int class_index, const SubgroupFilter& filter = {});

// As above, restricted to sets whose truth ranks first or second.
std::vector<double> TopTwoTruthConfidence(std::span<const PredictionSet> sets,
                                          const MetadataIndex& metadata,
                                          int class_index,
                                          const SubgroupFilter& filter = {});

struct SiteShare {
  std::string site;
  size_t count = 0;
  double percentage = 0.0;

  friend bool operator==(const SiteShare&, const SiteShare&) = default;
};

// Anatomical sites of the class's samples whose truth ranks in the top two,
// by descending share (ties by site name). "unknown" is ranked like any site.
std::vector<SiteShare> SiteRanking(std::span<const PredictionSet> sets,
                                   const MetadataIndex& metadata,
                                   int class_index);

struct SubgroupSummary {
  std::string grouping;
  std::string value;
  size_t n = 0;
  size_t n_covered = 0;
  size_t n_forced = 0;
  double coverage = 0.0;
  double mean_set_size = 0.0;
  double forced_fraction = 0.0;
  std::map<size_t, size_t> set_size_histogram;

  friend bool operator==(const SubgroupSummary&,
                         const SubgroupSummary&) = default;
};

struct A2Cell {
  std::string grouping;
  std::string value;
  int class_index = 0;
  size_t n = 0;
  size_t n_top_two = 0;
  std::optional<double> a2;

  friend bool operator==(const A2Cell&, const A2Cell&) = default;
};

struct ConfidencePoint {
  std::string sample_id;
  double confidence = 0.0;

  friend bool operator==(const ConfidencePoint&,
                         const ConfidencePoint&) = default;
};

struct ConfidenceSeries {
  std::string grouping;
  std::string value;
  int class_index = 0;
  std::vector<ConfidencePoint> truth_confidence;
  std::vector<ConfidencePoint> top_two_confidence;

  friend bool operator==(const ConfidenceSeries&,
                         const ConfidenceSeries&) = default;
};

struct SiteRankingTable {
  int class_index = 0;
  std::vector<SiteShare> rows;

  friend bool operator==(const SiteRankingTable&,
                         const SiteRankingTable&) = default;
};

// Ordering: grouping ("all" first, then as requested), value
// lexicographically, class index. Only observed subgroup values appear.
struct FairnessReport {
  std::vector<std::string> class_names;
  std::vector<std::string> groupings;
  size_t total_sets = 0;
  std::vector<SubgroupSummary> subgroups;
  std::vector<A2Cell> a2;
  std::vector<ConfidenceSeries> confidence;
  std::vector<SiteRankingTable> site_rankings;

  friend bool operator==(const FairnessReport&,
                         const FairnessReport&) = default;
};

// Throws DataError listing set ids that have no metadata, and when a set
// has no truth label or a truth outside the class list.
FairnessReport BuildFairnessReport(std::span<const PredictionSet> sets,
                                   const MetadataIndex& metadata,
                                   const std::vector<std::string>& class_names,
                                   const std::vector<Grouping>& groupings);

void to_json(nlohmann::json& j, const FairnessReport& report);
void from_json(const nlohmann::json& j, FairnessReport& report);

// Writes report.json plus the flat tables
//   coverage_by_<grouping>.csv, set_size_by_<grouping>.csv,
//   a2_by_<grouping>_class.csv, truth_confidence_<class>.csv,
//   toptwo_confidence_<class>.csv, site_ranking_<class>.csv
// and returns the written paths relative to `dir`, in write order.
std::vector<std::string> WriteFairnessReport(const FairnessReport& report,
                                             const std::filesystem::path& dir);

FairnessReport ReadFairnessReport(const std::filesystem::path& report_json);

}  // namespace fairconf

#endif  // FAIRCONF_FAIRNESS_H_
