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

#ifndef FAIRCONF_DATA_MODEL_H_
#define FAIRCONF_DATA_MODEL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairconf {

enum class Sex { kMale, kFemale, kUnknown };

enum class AgeBand { kUnder30, kFrom30To60, kOver60, kUnknown };

enum class AnatomicalSite {
  kAnteriorTorso,
  kPosteriorTorso,
  kHeadNeck,
  kLowerExtremity,
  kUpperExtremity,
  kPalmsSoles,
  kOralGenital,
  kUnknown,
};

inline constexpr std::array<Sex, 3> kAllSexes = {Sex::kMale, Sex::kFemale,
                                                 Sex::kUnknown};
inline constexpr std::array<AgeBand, 4> kAllAgeBands = {
    AgeBand::kUnder30, AgeBand::kFrom30To60, AgeBand::kOver60,
    AgeBand::kUnknown};
inline constexpr std::array<AnatomicalSite, 8> kAllSites = {
    AnatomicalSite::kAnteriorTorso,  AnatomicalSite::kPosteriorTorso,
    AnatomicalSite::kHeadNeck,       AnatomicalSite::kLowerExtremity,
    AnatomicalSite::kUpperExtremity, AnatomicalSite::kPalmsSoles,
    AnatomicalSite::kOralGenital,    AnatomicalSite::kUnknown};

// Canonical vocabulary strings, as they appear in metadata files.
// "male", "female", "unknown"
std::string_view ToString(Sex sex);
// "under30", "30to60", "over60", "unknown"
std::string_view ToString(AgeBand band);
// "anterior torso", "posterior torso", "head/neck", "lower extremity",
// "upper extremity", "palms/soles", "oral/genital", "unknown"
std::string_view ToString(AnatomicalSite site);

// Parsers accept the canonical strings case-insensitively. Empty cells,
// "unknown" and "nan" map to the unknown value. Anything else throws
// DataError.
Sex ParseSex(std::string_view text);
AgeBand ParseAgeBand(std::string_view text);
AnatomicalSite ParseSite(std::string_view text);

// Under 30 -> kUnder30; 30 <= age <= 60 -> kFrom30To60; over 60 -> kOver60.
AgeBand AgeBandOf(std::optional<double> age_years);

struct DemographicMetadata {
  Sex sex = Sex::kUnknown;
  std::optional<double> age_years;
  AnatomicalSite anatomical_site = AnatomicalSite::kUnknown;
  std::string cohort = "unknown";

  AgeBand age_band() const { return AgeBandOf(age_years); }

  friend bool operator==(const DemographicMetadata&,
                         const DemographicMetadata&) = default;
};

struct Sample {
  std::string id;
  std::vector<double> embedding;
  int label = 0;
  DemographicMetadata metadata;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// An immutable, validated collection of samples. Construction checks that
// ids are unique, labels index into class_names, class names are unique,
// and every embedding is finite with the declared dimension.
class Dataset {
 public:
  Dataset(std::vector<Sample> samples, std::vector<std::string> class_names,
          size_t embedding_dim);

  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& sample(size_t i) const { return samples_.at(i); }
  size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  size_t num_classes() const { return class_names_.size(); }
  size_t embedding_dim() const { return embedding_dim_; }

  // Labels of all samples in order.
  std::vector<int> labels() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<Sample> samples_;
  std::vector<std::string> class_names_;
  size_t embedding_dim_;
};

// Index lists into a Dataset. Each list is sorted ascending.
struct DatasetSplit {
  std::vector<size_t> train;
  std::vector<size_t> validation;
  std::vector<size_t> test;
  std::vector<size_t> calibration;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Fractions for (train, validation, test, calibration).
using SplitFractions = std::array<double, 4>;

// Reads the three input files:
//   embeddings: JSON lines, {"id": <string>, "embedding": [<real>...]}
//   labels:     CSV with header "id,label"; label is a class name
//   metadata:   CSV with header "id,sex,age,anatomical_site,cohort"
// Samples appear in labels-file order. When class_names is empty the class
// list is the sorted set of distinct label names; otherwise every label must
// be one of class_names and indices follow that order.
Dataset LoadDataset(const std::filesystem::path& embeddings_path,
                    const std::filesystem::path& labels_path,
                    const std::optional<std::filesystem::path>& metadata_path,
                    const std::vector<std::string>& class_names = {});

// Writes the three files read by LoadDataset. Embedding values are written
// with round-trip precision.
void WriteDataset(const Dataset& dataset,
                  const std::filesystem::path& embeddings_path,
                  const std::filesystem::path& labels_path,
                  const std::filesystem::path& metadata_path);

// Stratified random split. For every class c and part p the part receives
// floor(F_p * n_c) - floor(F_{p-1} * n_c) samples of c, where F_p is the
// cumulative fraction, so |count_p(c) - f_p * n_c| < 1. Throws ConfigError
// on invalid fractions and DataError when a class has fewer samples than
// there are parts with a nonzero fraction.
DatasetSplit SplitDataset(const Dataset& dataset,
                          const SplitFractions& fractions, uint64_t seed);

// Per-class counts over the given sample indices.
std::vector<size_t> ClassCounts(const Dataset& dataset,
                                std::span<const size_t> indices);

}  // namespace fairconf

#endif  // FAIRCONF_DATA_MODEL_H_
