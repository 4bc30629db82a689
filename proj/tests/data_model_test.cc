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

#include "fairconf/data_model.h"

#include <fstream>
#include <numeric>
#include <set>

#include "fairconf/errors.h"
#include "fairconf/random.h"
#include "fairconf/synth.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fairconf {
namespace {

using ::fairconf::testing::TempDir;

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

Dataset OneClassDataset(size_t n) {
  std::vector<Sample> samples;
  for (size_t i = 0; i < n; ++i) {
    samples.push_back({"id" + std::to_string(i), {static_cast<double>(i)}, 0, {}});
  }
  return Dataset(std::move(samples), {"A"}, 1);
}

TEST(AgeBand, CutPoints) {
  EXPECT_EQ(AgeBandOf(std::nullopt), AgeBand::kUnknown);
  EXPECT_EQ(AgeBandOf(0.0), AgeBand::kUnder30);
  EXPECT_EQ(AgeBandOf(29.99), AgeBand::kUnder30);
  EXPECT_EQ(AgeBandOf(30.0), AgeBand::kFrom30To60);
  EXPECT_EQ(AgeBandOf(60.0), AgeBand::kFrom30To60);
  EXPECT_EQ(AgeBandOf(60.01), AgeBand::kOver60);
}

TEST(Vocabulary, ParsesCanonicalAndUnknownTokens) {
  EXPECT_EQ(ParseSex("Female"), Sex::kFemale);
  EXPECT_EQ(ParseSex(""), Sex::kUnknown);
  EXPECT_EQ(ParseSite("head/neck"), AnatomicalSite::kHeadNeck);
  EXPECT_EQ(ParseSite("NaN"), AnatomicalSite::kUnknown);
  EXPECT_EQ(ParseAgeBand("30to60"), AgeBand::kFrom30To60);
  EXPECT_THROW(ParseSex("x"), DataError);
  EXPECT_THROW(ParseSite("elbow"), DataError);
  for (const AnatomicalSite site : kAllSites) {
    EXPECT_EQ(ParseSite(ToString(site)), site);
  }
}

TEST(Dataset, RejectsInvalidSamples) {
  EXPECT_THROW(Dataset({{"a", {1.0, 2.0}, 0, {}}}, {"A"}, 3), DataError);
  EXPECT_THROW(Dataset({{"a", {1.0}, 1, {}}}, {"A"}, 1), DataError);
  EXPECT_THROW(Dataset({{"a", {1.0}, 0, {}}, {"a", {2.0}, 0, {}}}, {"A"}, 1),
               DataError);
  EXPECT_THROW(Dataset({{"a", {NAN}, 0, {}}}, {"A"}, 1), DataError);
  EXPECT_THROW(Dataset({}, {"A", "A"}, 1), DataError);
}

class LoadDatasetTest : public ::testing::Test {
 protected:
  LoadDatasetTest() : dir_("load") {
    WriteText(path("emb.jsonl"),
              "{\"id\": \"a\", \"embedding\": [1, 2, 3, 4]}\n"
              "{\"id\": \"b\", \"embedding\": [0.5, 0, 0, 0]}\n"
              "\n"
              "{\"id\": \"c\", \"embedding\": [-1, -2, -3, -4.25]}\n");
    WriteText(path("labels.csv"), "id,label\nc,NV\na,MEL\nb,NV\n");
  }
  std::filesystem::path path(const std::string& name) const {
    return dir_.path() / name;
  }
  TempDir dir_;
};

TEST_F(LoadDatasetTest, NoMetadataGivesUnknowns) {
  const Dataset d = LoadDataset(path("emb.jsonl"), path("labels.csv"), std::nullopt);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.embedding_dim(), 4u);
  EXPECT_EQ(d.class_names(), (std::vector<std::string>{"MEL", "NV"}));
  // Labels-file order.
  EXPECT_EQ(d.sample(0).id, "c");
  EXPECT_EQ(d.sample(0).label, 1);
  EXPECT_EQ(d.sample(0).embedding[3], -4.25);
  for (const Sample& s : d.samples()) {
    EXPECT_EQ(s.metadata, DemographicMetadata{});
    EXPECT_EQ(s.metadata.age_band(), AgeBand::kUnknown);
  }
}

TEST_F(LoadDatasetTest, DeclaredClassOrderIsRespected) {
  const Dataset d = LoadDataset(path("emb.jsonl"), path("labels.csv"),
                                std::nullopt, {"NV", "MEL", "BCC"});
  EXPECT_EQ(d.num_classes(), 3u);
  EXPECT_EQ(d.sample(1).label, 1);  // a is MEL
  EXPECT_THROW(LoadDataset(path("emb.jsonl"), path("labels.csv"), std::nullopt,
                           {"NV", "BCC"}),
               DataError);
}

TEST_F(LoadDatasetTest, MetadataCellsAndBlanks) {
  WriteText(path("meta.csv"),
            "id,sex,age,anatomical_site,cohort\n"
            "a,female,45,anterior torso,ISIC2019\n"
            "b,,,,\n");
  const Dataset d = LoadDataset(path("emb.jsonl"), path("labels.csv"),
                                path("meta.csv"));
  const DemographicMetadata& a = d.sample(1).metadata;
  EXPECT_EQ(a.sex, Sex::kFemale);
  EXPECT_EQ(a.age_years, 45.0);
  EXPECT_EQ(a.age_band(), AgeBand::kFrom30To60);
  EXPECT_EQ(a.anatomical_site, AnatomicalSite::kAnteriorTorso);
  EXPECT_EQ(a.cohort, "ISIC2019");
  EXPECT_EQ(d.sample(2).metadata, DemographicMetadata{});
  EXPECT_EQ(d.sample(0).metadata, DemographicMetadata{});  // c has no row
}

TEST_F(LoadDatasetTest, MissingEmbedding) {
  WriteText(path("labels2.csv"), "id,label\na,MEL\nz,NV\n");
  try {
    LoadDataset(path("emb.jsonl"), path("labels2.csv"), std::nullopt);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missing embedding for id"),
              std::string::npos);
  }
}

TEST_F(LoadDatasetTest, Errors) {
  WriteText(path("bad_dim.jsonl"),
            "{\"id\": \"a\", \"embedding\": [1, 2]}\n"
            "{\"id\": \"b\", \"embedding\": [1, 2, 3]}\n");
  EXPECT_THROW(LoadDataset(path("bad_dim.jsonl"), path("labels.csv"), std::nullopt),
               DataError);
  WriteText(path("dup.jsonl"),
            "{\"id\": \"a\", \"embedding\": [1]}\n"
            "{\"id\": \"a\", \"embedding\": [2]}\n");
  EXPECT_THROW(LoadDataset(path("dup.jsonl"), path("labels.csv"), std::nullopt),
               DataError);
  WriteText(path("dup_labels.csv"), "id,label\na,MEL\na,NV\n");
  EXPECT_THROW(LoadDataset(path("emb.jsonl"), path("dup_labels.csv"), std::nullopt),
               DataError);
  WriteText(path("bad_header.csv"), "name,label\na,MEL\n");
  EXPECT_THROW(LoadDataset(path("emb.jsonl"), path("bad_header.csv"), std::nullopt),
               DataError);
  WriteText(path("bad_meta.csv"),
            "id,sex,age,anatomical_site,cohort\na,female,-3,,\n");
  EXPECT_THROW(LoadDataset(path("emb.jsonl"), path("labels.csv"), path("bad_meta.csv")),
               DataError);
  EXPECT_THROW(LoadDataset(path("nope.jsonl"), path("labels.csv"), std::nullopt),
               DataError);
}

TEST(WriteDataset, RoundTripIsExact) {
  SynthConfig config;
  config.n_classes = 3;
  config.embedding_dim = 7;
  config.class_counts = {20, 5, 9};
  config.sex_fractions = {0.4, 0.4, 0.2};
  config.age_band_fractions = {0.2, 0.3, 0.3, 0.2};
  config.site_fractions = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.3};
  config.seed = 99;
  const Dataset original = GenerateSynthetic(config);

  TempDir dir("roundtrip");
  WriteDataset(original, dir.path() / "e.jsonl", dir.path() / "l.csv",
               dir.path() / "m.csv");
  const Dataset reread = LoadDataset(dir.path() / "e.jsonl", dir.path() / "l.csv",
                                     dir.path() / "m.csv", original.class_names());
  ASSERT_EQ(reread.size(), original.size());
  for (size_t i = 0; i < original.size(); ++i) {
    EXPECT_EQ(reread.sample(i), original.sample(i)) << "sample " << i;
  }
  EXPECT_EQ(reread, original);
}

TEST(SplitDataset, AllTrain) {
  const Dataset d = OneClassDataset(17);
  const DatasetSplit s = SplitDataset(d, {1.0, 0.0, 0.0, 0.0}, 3);
  std::vector<size_t> all(17);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(s.train, all);
  EXPECT_TRUE(s.validation.empty());
  EXPECT_TRUE(s.test.empty());
  EXPECT_TRUE(s.calibration.empty());
}

TEST(SplitDataset, PartSizesFollowFractions) {
  const Dataset d = OneClassDataset(100);
  const DatasetSplit s = SplitDataset(d, {0.5, 0.25, 0.15, 0.1}, 7);
  EXPECT_EQ(s.train.size(), 50u);
  EXPECT_EQ(s.validation.size(), 25u);
  EXPECT_EQ(s.test.size(), 15u);
  EXPECT_EQ(s.calibration.size(), 10u);
}

TEST(SplitDataset, DeterministicPerSeed) {
  const Dataset d = OneClassDataset(100);
  EXPECT_EQ(SplitDataset(d, {0.5, 0.25, 0.15, 0.1}, 7),
            SplitDataset(d, {0.5, 0.25, 0.15, 0.1}, 7));
  EXPECT_NE(SplitDataset(d, {0.5, 0.25, 0.15, 0.1}, 7),
            SplitDataset(d, {0.5, 0.25, 0.15, 0.1}, 8));
}

TEST(SplitDataset, TooFewSamplesNamesTheClass) {
  std::vector<Sample> samples = {{"a", {0.0}, 0, {}}, {"b", {0.0}, 0, {}},
                                 {"c", {0.0}, 0, {}}, {"d", {0.0}, 1, {}}};
  const Dataset d(std::move(samples), {"big", "tiny"}, 1);
  try {
    SplitDataset(d, {0.5, 0.5, 0.0, 0.0}, 1);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("tiny"), std::string::npos);
  }
  EXPECT_THROW(SplitDataset(d, {0.7, 0.5, 0.0, 0.0}, 1), ConfigError);
  EXPECT_THROW(SplitDataset(d, {-0.1, 0.5, 0.0, 0.0}, 1), ConfigError);
}

// Property: stratification bound, disjointness, determinism on random inputs.
TEST(SplitDataset, StratificationProperty) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n_classes = 1 + rng.UniformIndex(5);
    std::vector<Sample> samples;
    std::vector<size_t> per_class(n_classes);
    for (size_t c = 0; c < n_classes; ++c) {
      per_class[c] = 4 + rng.UniformIndex(60);
      for (size_t k = 0; k < per_class[c]; ++k) {
        samples.push_back({std::to_string(samples.size()), {0.0},
                           static_cast<int>(c), {}});
      }
    }
    rng.Shuffle(std::span<Sample>(samples));
    std::vector<std::string> names;
    for (size_t c = 0; c < n_classes; ++c) names.push_back("c" + std::to_string(c));
    const Dataset d(std::move(samples), names, 1);

    SplitFractions f;
    double remaining = 1.0;
    for (double& x : f) {
      x = rng.Uniform() * remaining;
      remaining -= x;
    }
    const DatasetSplit s = SplitDataset(d, f, trial);
    const std::array<const std::vector<size_t>*, 4> parts = {
        &s.train, &s.validation, &s.test, &s.calibration};
    std::set<size_t> seen;
    for (size_t p = 0; p < 4; ++p) {
      const std::vector<size_t> counts = ClassCounts(d, *parts[p]);
      for (size_t c = 0; c < n_classes; ++c) {
        EXPECT_LE(std::abs(static_cast<double>(counts[c]) -
                           f[p] * static_cast<double>(per_class[c])),
                  1.0);
      }
      for (const size_t i : *parts[p]) {
        EXPECT_LT(i, d.size());
        EXPECT_TRUE(seen.insert(i).second) << "index in two parts";
      }
    }
    EXPECT_EQ(SplitDataset(d, f, trial), s);
  }
}

TEST(ClassCounts, Basics) {
  std::vector<Sample> samples = {{"a", {0.0}, 0, {}}, {"b", {0.0}, 0, {}},
                                 {"c", {0.0}, 1, {}}};
  const Dataset d(std::move(samples), {"x", "y"}, 1);
  EXPECT_EQ(ClassCounts(d, {}), (std::vector<size_t>{0, 0}));
  const std::vector<size_t> all = {0, 1, 2};
  EXPECT_EQ(ClassCounts(d, all), (std::vector<size_t>{2, 1}));
  const std::vector<size_t> bad = {3};
  EXPECT_THROW(ClassCounts(d, bad), DataError);
}

// A label file at the scale of a large dermoscopy archive.
TEST(ClassCounts, LargeImbalancedLabelFile) {
  TempDir dir("isic");
  std::ofstream emb(dir.path() / "e.jsonl");
  std::ofstream lab(dir.path() / "l.csv");
  lab << "id,label\n";
  for (int i = 0; i < 11557 + 239; ++i) {
    emb << "{\"id\":\"ISIC_" << i << "\",\"embedding\":[0]}\n";
    lab << "ISIC_" << i << ',' << (i < 11557 ? "NV" : "DF") << '\n';
  }
  emb.close();
  lab.close();
  const Dataset d = LoadDataset(dir.path() / "e.jsonl", dir.path() / "l.csv",
                                std::nullopt, {"NV", "DF"});
  std::vector<size_t> all(d.size());
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(ClassCounts(d, all), (std::vector<size_t>{11557, 239}));
}

}  // namespace
}  // namespace fairconf
