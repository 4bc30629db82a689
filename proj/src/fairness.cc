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

#include "fairconf/fairness.h"

#include <algorithm>
#include <fstream>

#include "fairconf/errors.h"
#include "text_io.h"

namespace fairconf {
namespace {

constexpr std::array<Axis, 5> kAllAxes = {Axis::kAll, Axis::kSex,
                                          Axis::kAgeBand,
                                          Axis::kAnatomicalSite, Axis::kCohort};

const DemographicMetadata& MetadataOf(const MetadataIndex& metadata,
                                      const PredictionSet& set) {
  const auto it = metadata.find(set.sample_id);
  if (it == metadata.end()) {
    throw DataError("no metadata for sample '" + set.sample_id + "'");
  }
  return it->second;
}

bool InTopTwo(const PredictionSet& set) {
  return set.truth_rank && *set.truth_rank <= 2;
}

std::vector<ConfidencePoint> SortedById(std::vector<ConfidencePoint> points) {
  std::sort(points.begin(), points.end(),
            [](const ConfidencePoint& a, const ConfidencePoint& b) {
              return a.sample_id < b.sample_id;
            });
  return points;
}

std::vector<double> Values(const std::vector<ConfidencePoint>& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.confidence);
  return out;
}

std::vector<ConfidencePoint> CollectConfidence(
    std::span<const PredictionSet> sets, const MetadataIndex& metadata,
    int class_index, const SubgroupFilter& filter, bool top_two_only) {
  std::vector<ConfidencePoint> points;
  for (const PredictionSet& s : sets) {
    if (s.truth != class_index || !s.contains_truth) continue;
    if (top_two_only && !InTopTwo(s)) continue;
    if (!filter.Matches(MetadataOf(metadata, s))) continue;
    points.push_back({s.sample_id, *s.truth_confidence});
  }
  return SortedById(std::move(points));
}

std::vector<SiteShare> RankSites(const std::map<std::string, size_t>& counts) {
  size_t total = 0;
  for (const auto& [site, count] : counts) total += count;
  std::vector<SiteShare> rows;
  for (const auto& [site, count] : counts) {
    rows.push_back({site, count,
                    100.0 * static_cast<double>(count) /
                        static_cast<double>(total)});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SiteShare& a, const SiteShare& b) {
                     return a.count > b.count;
                   });
  return rows;
}

}  // namespace

std::string_view ToString(Axis axis) {
  switch (axis) {
    case Axis::kAll:
      return "all";
    case Axis::kSex:
      return "sex";
    case Axis::kAgeBand:
      return "age_band";
    case Axis::kAnatomicalSite:
      return "anatomical_site";
    case Axis::kCohort:
      return "cohort";
  }
  return "all";
}

Axis ParseAxis(std::string_view text) {
  for (const Axis axis : kAllAxes) {
    if (ToString(axis) == text) return axis;
  }
  throw ConfigError("unknown report axis '" + std::string(text) + "'");
}

std::string AxisValue(Axis axis, const DemographicMetadata& metadata) {
  switch (axis) {
    case Axis::kAll:
      return "all";
    case Axis::kSex:
      return std::string(ToString(metadata.sex));
    case Axis::kAgeBand:
      return std::string(ToString(metadata.age_band()));
    case Axis::kAnatomicalSite:
      return std::string(ToString(metadata.anatomical_site));
    case Axis::kCohort:
      return metadata.cohort;
  }
  return "all";
}

bool SubgroupFilter::Matches(const DemographicMetadata& metadata) const {
  for (const SubgroupKey& key : keys) {
    if (AxisValue(key.axis, metadata) != key.value) return false;
  }
  return true;
}

std::string GroupingName(const Grouping& grouping) {
  std::string name;
  for (size_t i = 0; i < grouping.size(); ++i) {
    if (i) name += "_x_";
    name += ToString(grouping[i]);
  }
  return name.empty() ? "all" : name;
}

std::string GroupValue(const Grouping& grouping,
                       const DemographicMetadata& metadata) {
  std::string value;
  for (size_t i = 0; i < grouping.size(); ++i) {
    if (i) value += '|';
    value += AxisValue(grouping[i], metadata);
  }
  return value.empty() ? "all" : value;
}

Grouping ParseGrouping(std::string_view name) {
  Grouping grouping;
  while (true) {
    const size_t sep = name.find("_x_");
    grouping.push_back(ParseAxis(name.substr(0, sep)));
    if (sep == std::string_view::npos) break;
    name.remove_prefix(sep + 3);
  }
  return grouping;
}

SubgroupFilter FilterFor(const Grouping& grouping, std::string_view value) {
  SubgroupFilter filter;
  size_t start = 0;
  for (size_t i = 0; i < grouping.size(); ++i) {
    const size_t bar = value.find('|', start);
    const std::string_view part = value.substr(
        start, bar == std::string_view::npos ? std::string_view::npos
                                             : bar - start);
    filter.keys.push_back({grouping[i], std::string(part)});
    start = bar == std::string_view::npos ? value.size() : bar + 1;
  }
  return filter;
}

MetadataIndex IndexMetadata(const Dataset& dataset) {
  MetadataIndex index;
  index.reserve(dataset.size());
  for (const Sample& s : dataset.samples()) index.emplace(s.id, s.metadata);
  return index;
}

A2Result A2Accuracy(std::span<const PredictionSet> sets,
                    const MetadataIndex& metadata,
                    const SubgroupFilter& filter, int class_index) {
  A2Result result;
  size_t hits = 0;
  for (const PredictionSet& s : sets) {
    if (s.truth != class_index) continue;
    if (!filter.Matches(MetadataOf(metadata, s))) continue;
    ++result.n;
    if (InTopTwo(s)) ++hits;
  }
  if (result.n > 0) {
    result.a2 = static_cast<double>(hits) / static_cast<double>(result.n);
  }
  return result;
}

std::vector<double> TruthConfidenceDistribution(
    std::span<const PredictionSet> sets, const MetadataIndex& metadata,
    int class_index, const SubgroupFilter& filter) {
  return Values(CollectConfidence(sets, metadata, class_index, filter, false));
}

std::vector<double> TopTwoTruthConfidence(std::span<const PredictionSet> sets,
                                          const MetadataIndex& metadata,
                                          int class_index,
                                          const SubgroupFilter& filter) {
  return Values(CollectConfidence(sets, metadata, class_index, filter, true));
}

std::vector<SiteShare> SiteRanking(std::span<const PredictionSet> sets,
                                   const MetadataIndex& metadata,
                                   int class_index) {
  std::map<std::string, size_t> counts;
  for (const PredictionSet& s : sets) {
    if (s.truth != class_index || !InTopTwo(s)) continue;
    ++counts[std::string(ToString(MetadataOf(metadata, s).anatomical_site))];
  }
  return RankSites(counts);
}

FairnessReport BuildFairnessReport(std::span<const PredictionSet> sets,
                                   const MetadataIndex& metadata,
                                   const std::vector<std::string>& class_names,
                                   const std::vector<Grouping>& groupings) {
  std::vector<std::string> missing;
  for (const PredictionSet& s : sets) {
    if (!s.truth) {
      throw DataError("set '" + s.sample_id + "' has no truth label");
    }
    if (*s.truth < 0 || static_cast<size_t>(*s.truth) >= class_names.size()) {
      throw DataError("set '" + s.sample_id + "' has truth outside the class list");
    }
    if (!metadata.contains(s.sample_id)) missing.push_back(s.sample_id);
  }
  if (!missing.empty()) {
    std::string list;
    for (size_t i = 0; i < missing.size() && i < 20; ++i) {
      list += (i ? ", " : "") + missing[i];
    }
    if (missing.size() > 20) list += ", ...";
    throw DataError(std::to_string(missing.size()) +
                    " prediction set id(s) missing from metadata: " + list);
  }

  std::vector<Grouping> all_groupings = {Grouping{Axis::kAll}};
  for (const Grouping& g : groupings) {
    const std::string name = GroupingName(g);
    const bool seen = std::any_of(
        all_groupings.begin(), all_groupings.end(),
        [&](const Grouping& other) { return GroupingName(other) == name; });
    if (!seen) all_groupings.push_back(g);
  }

  const int n_classes = static_cast<int>(class_names.size());
  FairnessReport report;
  report.class_names = class_names;
  report.total_sets = sets.size();
  for (const Grouping& grouping : all_groupings) {
    const std::string grouping_name = GroupingName(grouping);
    report.groupings.push_back(grouping_name);

    std::map<std::string, std::vector<const PredictionSet*>> members;
    for (const PredictionSet& s : sets) {
      members[GroupValue(grouping, metadata.at(s.sample_id))].push_back(&s);
    }
    for (const auto& [value, group] : members) {
      SubgroupSummary summary;
      summary.grouping = grouping_name;
      summary.value = value;
      summary.n = group.size();
      size_t size_total = 0;
      for (const PredictionSet* s : group) {
        if (s->contains_truth) ++summary.n_covered;
        if (s->forced_top1) ++summary.n_forced;
        size_total += s->size();
        ++summary.set_size_histogram[s->size()];
      }
      const auto n = static_cast<double>(summary.n);
      summary.coverage = static_cast<double>(summary.n_covered) / n;
      summary.mean_set_size = static_cast<double>(size_total) / n;
      summary.forced_fraction = static_cast<double>(summary.n_forced) / n;
      report.subgroups.push_back(std::move(summary));

      for (int c = 0; c < n_classes; ++c) {
        A2Cell cell{grouping_name, value, c, 0, 0, std::nullopt};
        ConfidenceSeries series{grouping_name, value, c, {}, {}};
        for (const PredictionSet* s : group) {
          if (*s->truth != c) continue;
          ++cell.n;
          if (InTopTwo(*s)) ++cell.n_top_two;
          if (s->contains_truth) {
            series.truth_confidence.push_back(
                {s->sample_id, *s->truth_confidence});
            if (InTopTwo(*s)) {
              series.top_two_confidence.push_back(
                  {s->sample_id, *s->truth_confidence});
            }
          }
        }
        if (cell.n > 0) {
          cell.a2 = static_cast<double>(cell.n_top_two) /
                    static_cast<double>(cell.n);
        }
        series.truth_confidence = SortedById(std::move(series.truth_confidence));
        series.top_two_confidence =
            SortedById(std::move(series.top_two_confidence));
        report.a2.push_back(std::move(cell));
        report.confidence.push_back(std::move(series));
      }
    }
  }
  for (int c = 0; c < n_classes; ++c) {
    report.site_rankings.push_back({c, SiteRanking(sets, metadata, c)});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

namespace {

nlohmann::json PointsToJson(const std::vector<ConfidencePoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points) out.push_back({p.sample_id, p.confidence});
  return out;
}

std::vector<ConfidencePoint> PointsFromJson(const nlohmann::json& j) {
  std::vector<ConfidencePoint> points;
  for (const auto& p : j) {
    points.push_back({p.at(0).get<std::string>(), p.at(1).get<double>()});
  }
  return points;
}

}  // namespace

void to_json(nlohmann::json& j, const FairnessReport& report) {
  nlohmann::json subgroups = nlohmann::json::array();
  for (const SubgroupSummary& s : report.subgroups) {
    nlohmann::json histogram = nlohmann::json::array();
    for (const auto& [size, count] : s.set_size_histogram) {
      histogram.push_back({size, count});
    }
    subgroups.push_back({{"grouping", s.grouping},
                         {"value", s.value},
                         {"n", s.n},
                         {"n_covered", s.n_covered},
                         {"n_forced", s.n_forced},
                         {"coverage", s.coverage},
                         {"mean_set_size", s.mean_set_size},
                         {"forced_fraction", s.forced_fraction},
                         {"set_size_histogram", histogram}});
  }
  nlohmann::json a2 = nlohmann::json::array();
  for (const A2Cell& c : report.a2) {
    a2.push_back({{"grouping", c.grouping},
                  {"value", c.value},
                  {"class", c.class_index},
                  {"n", c.n},
                  {"n_top_two", c.n_top_two},
                  {"a2", c.a2 ? nlohmann::json(*c.a2) : nlohmann::json(nullptr)}});
  }
  nlohmann::json confidence = nlohmann::json::array();
  for (const ConfidenceSeries& s : report.confidence) {
    confidence.push_back({{"grouping", s.grouping},
                          {"value", s.value},
                          {"class", s.class_index},
                          {"truth_confidence", PointsToJson(s.truth_confidence)},
                          {"top_two_confidence",
                           PointsToJson(s.top_two_confidence)}});
  }
  nlohmann::json sites = nlohmann::json::array();
  for (const SiteRankingTable& t : report.site_rankings) {
    nlohmann::json rows = nlohmann::json::array();
    for (const SiteShare& r : t.rows) {
      rows.push_back({{"site", r.site},
                      {"count", r.count},
                      {"percentage", r.percentage}});
    }
    sites.push_back({{"class", t.class_index}, {"rows", rows}});
  }
  j = nlohmann::json{{"class_names", report.class_names},
                     {"groupings", report.groupings},
                     {"total_sets", report.total_sets},
                     {"subgroups", subgroups},
                     {"a2", a2},
                     {"confidence", confidence},
                     {"site_rankings", sites}};
}

void from_json(const nlohmann::json& j, FairnessReport& report) {
  FairnessReport out;
  try {
    out.class_names = j.at("class_names").get<std::vector<std::string>>();
    out.groupings = j.at("groupings").get<std::vector<std::string>>();
    out.total_sets = j.at("total_sets").get<size_t>();
    for (const auto& s : j.at("subgroups")) {
      SubgroupSummary summary;
      summary.grouping = s.at("grouping").get<std::string>();
      summary.value = s.at("value").get<std::string>();
      summary.n = s.at("n").get<size_t>();
      summary.n_covered = s.at("n_covered").get<size_t>();
      summary.n_forced = s.at("n_forced").get<size_t>();
      summary.coverage = s.at("coverage").get<double>();
      summary.mean_set_size = s.at("mean_set_size").get<double>();
      summary.forced_fraction = s.at("forced_fraction").get<double>();
      for (const auto& h : s.at("set_size_histogram")) {
        summary.set_size_histogram[h.at(0).get<size_t>()] = h.at(1).get<size_t>();
      }
      out.subgroups.push_back(std::move(summary));
    }
    for (const auto& c : j.at("a2")) {
      A2Cell cell;
      cell.grouping = c.at("grouping").get<std::string>();
      cell.value = c.at("value").get<std::string>();
      cell.class_index = c.at("class").get<int>();
      cell.n = c.at("n").get<size_t>();
      cell.n_top_two = c.at("n_top_two").get<size_t>();
      if (!c.at("a2").is_null()) cell.a2 = c.at("a2").get<double>();
      out.a2.push_back(std::move(cell));
    }
    for (const auto& s : j.at("confidence")) {
      ConfidenceSeries series;
      series.grouping = s.at("grouping").get<std::string>();
      series.value = s.at("value").get<std::string>();
      series.class_index = s.at("class").get<int>();
      series.truth_confidence = PointsFromJson(s.at("truth_confidence"));
      series.top_two_confidence = PointsFromJson(s.at("top_two_confidence"));
      out.confidence.push_back(std::move(series));
    }
    for (const auto& t : j.at("site_rankings")) {
      SiteRankingTable table;
      table.class_index = t.at("class").get<int>();
      for (const auto& r : t.at("rows")) {
        table.rows.push_back({r.at("site").get<std::string>(),
                              r.at("count").get<size_t>(),
                              r.at("percentage").get<double>()});
      }
      out.site_rankings.push_back(std::move(table));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("fairness report: ") + e.what());
  }
  report = std::move(out);
}

std::vector<std::string> WriteFairnessReport(const FairnessReport& report,
                                             const std::filesystem::path& dir) {
  using internal::FormatFixed;
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    written.push_back(name);
    return internal::OpenForWrite(dir / name);
  };
  auto class_token = [&](int c) {
    return internal::SanitizeFileToken(report.class_names.at(c));
  };

  {
    std::ofstream out = open("report.json");
    out << nlohmann::json(report).dump(2) << '\n';
  }
  for (const std::string& grouping : report.groupings) {
    const std::string token = internal::SanitizeFileToken(grouping);
    std::ofstream coverage = open("coverage_by_" + token + ".csv");
    coverage << "group,n,coverage,mean_set_size,forced_fraction\n";
    std::ofstream sizes = open("set_size_by_" + token + ".csv");
    sizes << "group,set_size,count\n";
    for (const SubgroupSummary& s : report.subgroups) {
      if (s.grouping != grouping) continue;
      coverage << s.value << ',' << s.n << ',' << FormatFixed(s.coverage, 6)
               << ',' << FormatFixed(s.mean_set_size, 6) << ','
               << FormatFixed(s.forced_fraction, 6) << '\n';
      for (const auto& [size, count] : s.set_size_histogram) {
        sizes << s.value << ',' << size << ',' << count << '\n';
      }
    }
    std::ofstream a2 = open("a2_by_" + token + "_class.csv");
    a2 << "group,class,n,a2\n";
    for (const A2Cell& c : report.a2) {
      if (c.grouping != grouping) continue;
      a2 << c.value << ',' << report.class_names.at(c.class_index) << ','
         << c.n << ',' << (c.a2 ? FormatFixed(*c.a2, 6) : std::string()) << '\n';
    }
  }
  for (int c = 0; c < static_cast<int>(report.class_names.size()); ++c) {
    std::ofstream truth = open("truth_confidence_" + class_token(c) + ".csv");
    std::ofstream top_two = open("toptwo_confidence_" + class_token(c) + ".csv");
    truth << "grouping,group,sample_id,confidence\n";
    top_two << "grouping,group,sample_id,confidence\n";
    for (const ConfidenceSeries& s : report.confidence) {
      if (s.class_index != c) continue;
      for (const auto& p : s.truth_confidence) {
        truth << s.grouping << ',' << s.value << ',' << p.sample_id << ','
              << FormatFixed(p.confidence, 6) << '\n';
      }
      for (const auto& p : s.top_two_confidence) {
        top_two << s.grouping << ',' << s.value << ',' << p.sample_id << ','
                << FormatFixed(p.confidence, 6) << '\n';
      }
    }
    std::ofstream sites = open("site_ranking_" + class_token(c) + ".csv");
    sites << "rank,site,count,percentage\n";
    for (const SiteRankingTable& t : report.site_rankings) {
      if (t.class_index != c) continue;
      for (size_t r = 0; r < t.rows.size(); ++r) {
        sites << r + 1 << ',' << t.rows[r].site << ',' << t.rows[r].count
              << ',' << FormatFixed(t.rows[r].percentage, 6) << '\n';
      }
    }
  }
  return written;
}

FairnessReport ReadFairnessReport(const std::filesystem::path& report_json) {
  std::ifstream in = internal::OpenForRead(report_json);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(report_json.string() + ": " + e.what());
  }
  return j.get<FairnessReport>();
}

}  // namespace fairconf
