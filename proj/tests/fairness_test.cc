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

#include <fstream>
#include <limits>
#include <sstream>

#include "fairconf/errors.h"
#include "fairness_oracle.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fairconf {
namespace {

// A set whose entries list `labels` in order with the given confidences.
PredictionSet MakeSet(const std::string& id, int truth, std::vector<int> labels,
                      std::vector<double> confidences) {
  PredictionSet s;
  s.sample_id = id;
  s.truth = truth;
  for (size_t i = 0; i < labels.size(); ++i) {
    s.entries.push_back({labels[i], confidences[i]});
    if (labels[i] == truth) {
      s.contains_truth = true;
      s.truth_rank = i + 1;
      s.truth_confidence = confidences[i];
    }
  }
  return s;
}

DemographicMetadata Meta(Sex sex, AnatomicalSite site, double age = 40) {
  DemographicMetadata m;
  m.sex = sex;
  m.anatomical_site = site;
  m.age_years = age;
  return m;
}

TEST(A2, DirectCount) {
  const std::vector<PredictionSet> sets = {
      MakeSet("a", 0, {0, 1, 2}, {0.5, 0.3, 0.2}),
      MakeSet("b", 0, {1, 2, 0}, {0.5, 0.3, 0.2}),
      MakeSet("c", 0, {2, 0, 1}, {0.5, 0.3, 0.2}),
      MakeSet("d", 1, {1}, {0.9}),
  };
  MetadataIndex meta;
  for (const auto& s : sets) meta[s.sample_id] = Meta(Sex::kMale, AnatomicalSite::kHeadNeck);
  const A2Result r = A2Accuracy(sets, meta, {}, 0);
  EXPECT_EQ(r.n, 3u);
  EXPECT_EQ(r.a2, 2.0 / 3);
  EXPECT_EQ(A2Accuracy(sets, meta, {}, 1).a2, 1.0);
  // Subgroup without class-0 samples: absent, not zero.
  const A2Result empty =
      A2Accuracy(sets, meta, SubgroupFilter{{{Axis::kSex, "female"}}}, 0);
  EXPECT_EQ(empty.n, 0u);
  EXPECT_FALSE(empty.a2.has_value());
}

TEST(TruthConfidence, IdOrderedFixture) {
  const std::vector<PredictionSet> sets = {
      MakeSet("s2", 0, {0}, {0.9}),
      MakeSet("s1", 0, {1, 0}, {0.4, 0.6}),
      MakeSet("s3", 0, {1}, {0.7}),  // truth absent
  };
  MetadataIndex meta;
  for (const auto& s : sets) meta[s.sample_id] = {};
  EXPECT_EQ(TruthConfidenceDistribution(sets, meta, 0), (std::vector<double>{0.6, 0.9}));
  EXPECT_TRUE(TruthConfidenceDistribution(sets, meta, 1).empty());
}

TEST(TopTwoConfidence, RankFixture) {
  const std::vector<PredictionSet> sets = {
      MakeSet("a", 0, {0, 1, 2}, {0.8, 0.1, 0.1}),
      MakeSet("b", 0, {1, 0, 2}, {0.5, 0.3, 0.2}),
      MakeSet("c", 0, {1, 2, 0}, {0.5, 0.3, 0.2}),
  };
  MetadataIndex meta;
  for (const auto& s : sets) meta[s.sample_id] = {};
  EXPECT_EQ(TopTwoTruthConfidence(sets, meta, 0), (std::vector<double>{0.8, 0.3}));
}

TEST(TopTwoConfidence, SingleClassEqualsTruthConfidence) {
  const std::vector<PredictionSet> sets = {MakeSet("b", 0, {0}, {1.0}),
                                           MakeSet("a", 0, {0}, {1.0})};
  MetadataIndex meta;
  for (const auto& s : sets) meta[s.sample_id] = {};
  EXPECT_EQ(TopTwoTruthConfidence(sets, meta, 0),
            TruthConfidenceDistribution(sets, meta, 0));
  EXPECT_EQ(TruthConfidenceDistribution(sets, meta, 0), (std::vector<double>{1.0, 1.0}));
}

TEST(SiteRanking, FixtureCount) {
  std::vector<PredictionSet> sets;
  MetadataIndex meta;
  for (int i = 0; i < 4; ++i) {
    const std::string id = "t" + std::to_string(i);
    sets.push_back(MakeSet(id, 2, {2}, {0.9}));
    meta[id] = Meta(Sex::kFemale, i < 3 ? AnatomicalSite::kAnteriorTorso
                                         : AnatomicalSite::kHeadNeck);
  }
  // Truth ranked third: excluded.
  sets.push_back(MakeSet("z", 2, {0, 1, 2}, {0.4, 0.3, 0.3}));
  meta["z"] = Meta(Sex::kFemale, AnatomicalSite::kPalmsSoles);
  const auto rows = SiteRanking(sets, meta, 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (SiteShare{"anterior torso", 3, 75.0}));
  EXPECT_EQ(rows[1], (SiteShare{"head/neck", 1, 25.0}));
}

TEST(Report, MissingMetadataListsIds) {
  const std::vector<PredictionSet> sets = {MakeSet("a", 0, {0}, {0.9}),
                                           MakeSet("ghost", 0, {0}, {0.9})};
  MetadataIndex meta;
  meta["a"] = {};
  try {
    BuildFairnessReport(sets, meta, {"X"}, {});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(Report, AllOnlyCollapsesToGlobalMetrics) {
  const auto f = testing::RandomFairnessFixture(3);
  const FairnessReport r = BuildFairnessReport(f.sets, f.metadata, f.class_names, {});
  EXPECT_EQ(r.groupings, std::vector<std::string>{"all"});
  ASSERT_EQ(r.subgroups.size(), 1u);
  EXPECT_EQ(r.subgroups[0].n, f.sets.size());
  EXPECT_EQ(r.subgroups[0].coverage, EmpiricalCoverage(f.sets));
}

TEST(Report, CrossedGroupingNamesAndValues) {
  const Grouping g = ParseGrouping("sex_x_age_band");
  EXPECT_EQ(g, (Grouping{Axis::kSex, Axis::kAgeBand}));
  EXPECT_EQ(GroupingName(g), "sex_x_age_band");
  EXPECT_EQ(GroupValue(g, Meta(Sex::kFemale, AnatomicalSite::kUnknown, 61)),
            "female|over60");
  const SubgroupFilter filter = FilterFor(g, "female|over60");
  EXPECT_TRUE(filter.Matches(Meta(Sex::kFemale, AnatomicalSite::kUnknown, 70)));
  EXPECT_FALSE(filter.Matches(Meta(Sex::kMale, AnatomicalSite::kUnknown, 70)));
  EXPECT_THROW(ParseGrouping("sex_x_height"), ConfigError);
}

TEST(Report, DisjointCohortsWithIdenticalSetsAgree) {
  std::vector<PredictionSet> sets;
  MetadataIndex meta;
  for (const std::string cohort : {"A", "B"}) {
    for (int i = 0; i < 5; ++i) {
      const std::string id = cohort + std::to_string(i);
      sets.push_back(MakeSet(id, i % 2, {i % 2, 1 - i % 2}, {0.6, 0.4}));
      DemographicMetadata m;
      m.cohort = cohort;
      meta[id] = m;
    }
  }
  const FairnessReport r =
      BuildFairnessReport(sets, meta, {"p", "q"}, {{Axis::kCohort}});
  const auto find = [&](const std::string& v) {
    for (const auto& s : r.subgroups) {
      if (s.grouping == "cohort" && s.value == v) return s;
    }
    return SubgroupSummary{};
  };
  SubgroupSummary a = find("A"), b = find("B");
  EXPECT_EQ(a.n, 5u);
  b.value = a.value;
  EXPECT_EQ(a, b);
}

TEST(Report, MatchesBruteForceOracle) {
  for (uint64_t seed = 0; seed < 300; ++seed) {
    const auto f = testing::RandomFairnessFixture(seed);
    const FairnessReport r =
        BuildFairnessReport(f.sets, f.metadata, f.class_names, f.groupings);
    EXPECT_EQ(r, testing::OracleReport(f)) << "fixture " << seed;
  }
}

TEST(Report, PartitionConsistencyAndA2Dominance) {
  for (uint64_t seed = 100; seed < 200; ++seed) {
    auto f = testing::RandomFairnessFixture(seed);
    f.groupings = {{Axis::kSex}, {Axis::kAgeBand}, {Axis::kAnatomicalSite},
                   {Axis::kCohort}, {Axis::kSex, Axis::kCohort}};
    const FairnessReport r =
        BuildFairnessReport(f.sets, f.metadata, f.class_names, f.groupings);
    const double global = EmpiricalCoverage(f.sets);
    for (const std::string& g : r.groupings) {
      size_t n = 0;
      double weighted = 0.0;
      for (const auto& s : r.subgroups) {
        if (s.grouping != g) continue;
        n += s.n;
        weighted += s.coverage * static_cast<double>(s.n);
      }
      EXPECT_EQ(n, f.sets.size());
      EXPECT_NEAR(weighted / static_cast<double>(n), global, 1e-9);
    }
    for (const auto& cell : r.a2) {
      if (!cell.a2) {
        EXPECT_EQ(cell.n, 0u);
        continue;
      }
      EXPECT_GE(*cell.a2, 0.0);
      EXPECT_LE(*cell.a2, 1.0);
      size_t top1 = 0;
      for (const auto& s : f.sets) {
        if (*s.truth == cell.class_index && s.truth_rank == 1u &&
            GroupValue(ParseGrouping(cell.grouping), f.metadata.at(s.sample_id)) ==
                cell.value) {
          ++top1;
        }
      }
      EXPECT_GE(*cell.a2, static_cast<double>(top1) / cell.n);
    }
  }
}

TEST(Report, CoverageMonotoneInAlpha) {
  Rng rng(9);
  std::vector<std::vector<double>> rows;
  std::vector<int> truths;
  MetadataIndex meta;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> row(4);
    double total = 0.0;
    for (double& x : row) total += (x = rng.Uniform());
    for (double& x : row) x /= total;
    rows.push_back(row);
    truths.push_back(static_cast<int>(rng.UniformIndex(4)));
    meta["s" + std::to_string(i)] =
        Meta(kAllSexes[rng.UniformIndex(3)], AnatomicalSite::kUnknown);
  }
  std::vector<double> scores(300);
  for (double& s : scores) s = rng.Uniform();
  std::map<std::string, double> previous;
  for (int j = 10; j >= 1; --j) {
    const CalibrationResult cal = Calibrate(scores, j * 0.05);
    std::vector<PredictionSet> sets;
    for (int i = 0; i < 200; ++i) {
      sets.push_back(PredictSet(rows[i], cal, "s" + std::to_string(i), truths[i]));
    }
    const auto r =
        BuildFairnessReport(sets, meta, {"a", "b", "c", "d"}, {{Axis::kSex}});
    for (const auto& s : r.subgroups) {
      const std::string key = s.grouping + "/" + s.value;
      if (previous.contains(key)) EXPECT_GE(s.coverage, previous[key]);
      previous[key] = s.coverage;
    }
  }
}

TEST(ReportIo, JsonRoundTripAndTables) {
  auto f = testing::RandomFairnessFixture(42);
  f.groupings = {{Axis::kSex}, {Axis::kSex, Axis::kAgeBand}};
  const FairnessReport r =
      BuildFairnessReport(f.sets, f.metadata, f.class_names, f.groupings);
  testing::TempDir dir("report");
  const auto files = WriteFairnessReport(r, dir.path());
  EXPECT_EQ(files.front(), "report.json");
  for (const auto& name : files) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / name)) << name;
  }
  EXPECT_EQ(ReadFairnessReport(dir.path() / "report.json"), r);

  std::ifstream in(dir.path() / "coverage_by_sex.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "group,n,coverage,mean_set_size,forced_fraction");
  size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  size_t expected = 0;
  for (const auto& s : r.subgroups) expected += s.grouping == "sex";
  EXPECT_EQ(rows, expected);
}

}  // namespace
}  // namespace fairconf
