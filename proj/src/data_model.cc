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

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "fairconf/errors.h"
#include "fairconf/random.h"
#include "json.hpp"
#include "text_io.h"

namespace fairconf {

using internal::ToLower;
using internal::Trim;

std::string_view ToString(Sex sex) {
  switch (sex) {
    case Sex::kMale:
      return "male";
    case Sex::kFemale:
      return "female";
    case Sex::kUnknown:
      break;
  }
  return "unknown";
}

std::string_view ToString(AgeBand band) {
  switch (band) {
    case AgeBand::kUnder30:
      return "under30";
    case AgeBand::kFrom30To60:
      return "30to60";
    case AgeBand::kOver60:
      return "over60";
    case AgeBand::kUnknown:
      break;
  }
  return "unknown";
}

std::string_view ToString(AnatomicalSite site) {
  switch (site) {
    case AnatomicalSite::kAnteriorTorso:
      return "anterior torso";
    case AnatomicalSite::kPosteriorTorso:
      return "posterior torso";
    case AnatomicalSite::kHeadNeck:
      return "head/neck";
    case AnatomicalSite::kLowerExtremity:
      return "lower extremity";
    case AnatomicalSite::kUpperExtremity:
      return "upper extremity";
    case AnatomicalSite::kPalmsSoles:
      return "palms/soles";
    case AnatomicalSite::kOralGenital:
      return "oral/genital";
    case AnatomicalSite::kUnknown:
      break;
  }
  return "unknown";
}

namespace {

bool IsUnknownToken(const std::string& lowered) {
  return lowered.empty() || lowered == "unknown" || lowered == "nan";
}

template <typename Enum, size_t N>
Enum ParseVocabulary(std::string_view text, const std::array<Enum, N>& values,
                     Enum unknown, std::string_view axis) {
  const std::string lowered = ToLower(Trim(text));
  if (IsUnknownToken(lowered)) return unknown;
  for (const Enum value : values) {
    if (ToString(value) == lowered) return value;
  }
  throw DataError("unrecognized " + std::string(axis) + " value '" +
                  std::string(text) + "'");
}

}  // namespace

Sex ParseSex(std::string_view text) {
  return ParseVocabulary(text, kAllSexes, Sex::kUnknown, "sex");
}

AgeBand ParseAgeBand(std::string_view text) {
  return ParseVocabulary(text, kAllAgeBands, AgeBand::kUnknown, "age band");
}

AnatomicalSite ParseSite(std::string_view text) {
  return ParseVocabulary(text, kAllSites, AnatomicalSite::kUnknown,
                         "anatomical site");
}

AgeBand AgeBandOf(std::optional<double> age_years) {
  if (!age_years) return AgeBand::kUnknown;
  if (*age_years < 30.0) return AgeBand::kUnder30;
  if (*age_years <= 60.0) return AgeBand::kFrom30To60;
  return AgeBand::kOver60;
}

Dataset::Dataset(std::vector<Sample> samples,
                 std::vector<std::string> class_names, size_t embedding_dim)
    : samples_(std::move(samples)),
      class_names_(std::move(class_names)),
      embedding_dim_(embedding_dim) {
  if (embedding_dim_ == 0) throw DataError("embedding dimension must be > 0");
  if (class_names_.empty()) throw DataError("dataset declares no classes");
  std::unordered_set<std::string> names;
  for (const auto& name : class_names_) {
    if (!names.insert(name).second) {
      throw DataError("duplicate class name '" + name + "'");
    }
  }
  std::unordered_set<std::string> ids;
  for (const Sample& s : samples_) {
    if (!ids.insert(s.id).second) throw DataError("duplicate id '" + s.id + "'");
    if (s.label < 0 || static_cast<size_t>(s.label) >= class_names_.size()) {
      throw DataError("sample '" + s.id + "' has invalid label index " +
                      std::to_string(s.label));
    }
    if (s.embedding.size() != embedding_dim_) {
      throw DataError("sample '" + s.id + "' has embedding dimension " +
                      std::to_string(s.embedding.size()) + ", expected " +
                      std::to_string(embedding_dim_));
    }
    for (const double v : s.embedding) {
      if (!std::isfinite(v)) {
        throw DataError("sample '" + s.id + "' has a non-finite embedding");
      }
    }
    if (s.metadata.age_years && !(*s.metadata.age_years >= 0.0)) {
      throw DataError("sample '" + s.id + "' has a negative age");
    }
  }
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples_.size());
  for (const Sample& s : samples_) out.push_back(s.label);
  return out;
}

Dataset LoadDataset(const std::filesystem::path& embeddings_path,
                    const std::filesystem::path& labels_path,
                    const std::optional<std::filesystem::path>& metadata_path,
                    const std::vector<std::string>& class_names) {
  // Embeddings.
  std::unordered_map<std::string, std::vector<double>> embeddings;
  std::optional<size_t> dim;
  {
    std::ifstream in = internal::OpenForRead(embeddings_path);
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      if (Trim(line).empty()) continue;
      const std::string where =
          embeddings_path.string() + ":" + std::to_string(line_number);
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": " + e.what());
      }
      if (!record.is_object() || !record.contains("id") ||
          !record["id"].is_string() || !record.contains("embedding") ||
          !record["embedding"].is_array()) {
        throw DataError(where + ": expected {\"id\": string, \"embedding\": [...]}");
      }
      std::vector<double> values;
      values.reserve(record["embedding"].size());
      for (const auto& v : record["embedding"]) {
        if (!v.is_number()) throw DataError(where + ": non-numeric embedding");
        values.push_back(v.get<double>());
      }
      if (!dim) {
        dim = values.size();
      } else if (values.size() != *dim) {
        throw DataError(where + ": dimension mismatch (" +
                        std::to_string(values.size()) + " vs " +
                        std::to_string(*dim) + ")");
      }
      std::string id = record["id"].get<std::string>();
      if (!embeddings.emplace(id, std::move(values)).second) {
        throw DataError(where + ": duplicate id '" + id + "'");
      }
    }
  }
  if (!dim) throw DataError(embeddings_path.string() + ": no embeddings");

  // Labels.
  const internal::CsvTable labels =
      internal::ReadCsv(labels_path, {"id", "label"});
  std::vector<std::string> names = class_names;
  if (names.empty()) {
    std::set<std::string> distinct;
    for (const auto& row : labels.rows) distinct.insert(row[1]);
    names.assign(distinct.begin(), distinct.end());
  }
  std::unordered_map<std::string, int> name_to_index;
  for (size_t i = 0; i < names.size(); ++i) {
    name_to_index.emplace(names[i], static_cast<int>(i));
  }

  // Metadata.
  std::unordered_map<std::string, DemographicMetadata> metadata;
  if (metadata_path) {
    const internal::CsvTable table = internal::ReadCsv(
        *metadata_path, {"id", "sex", "age", "anatomical_site", "cohort"});
    for (size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const std::string where =
          metadata_path->string() + ":" + std::to_string(table.line_numbers[r]);
      DemographicMetadata m;
      try {
        m.sex = ParseSex(row[1]);
        if (!row[2].empty() && ToLower(row[2]) != "nan") {
          const double age = internal::ParseDouble(row[2], "age");
          if (!(age >= 0.0)) throw DataError("negative age");
          m.age_years = age;
        }
        m.anatomical_site = ParseSite(row[3]);
      } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
      }
      m.cohort = row[4].empty() ? "unknown" : row[4];
      if (!metadata.emplace(row[0], std::move(m)).second) {
        throw DataError(where + ": duplicate id '" + row[0] + "'");
      }
    }
  }

  std::vector<Sample> samples;
  samples.reserve(labels.rows.size());
  std::unordered_set<std::string> seen;
  for (size_t r = 0; r < labels.rows.size(); ++r) {
    const auto& row = labels.rows[r];
    const std::string where =
        labels_path.string() + ":" + std::to_string(labels.line_numbers[r]);
    const std::string& id = row[0];
    if (!seen.insert(id).second) {
      throw DataError(where + ": duplicate id '" + id + "'");
    }
    const auto label_it = name_to_index.find(row[1]);
    if (label_it == name_to_index.end()) {
      throw DataError(where + ": label '" + row[1] +
                      "' is not in the declared class list");
    }
    auto emb_it = embeddings.find(id);
    if (emb_it == embeddings.end()) {
      throw DataError(where + ": missing embedding for id '" + id + "'");
    }
    Sample s;
    s.id = id;
    s.embedding = std::move(emb_it->second);
    s.label = label_it->second;
    if (const auto meta_it = metadata.find(id); meta_it != metadata.end()) {
      s.metadata = meta_it->second;
    }
    samples.push_back(std::move(s));
  }
  return Dataset(std::move(samples), std::move(names), *dim);
}

void WriteDataset(const Dataset& dataset,
                  const std::filesystem::path& embeddings_path,
                  const std::filesystem::path& labels_path,
                  const std::filesystem::path& metadata_path) {
  std::ofstream emb = internal::OpenForWrite(embeddings_path);
  std::ofstream lab = internal::OpenForWrite(labels_path);
  std::ofstream meta = internal::OpenForWrite(metadata_path);
  lab << "id,label\n";
  meta << "id,sex,age,anatomical_site,cohort\n";
  for (const Sample& s : dataset.samples()) {
    // Built by hand so that every value uses the shortest round-trip form.
    emb << "{\"id\":" << nlohmann::json(s.id).dump() << ",\"embedding\":[";
    for (size_t i = 0; i < s.embedding.size(); ++i) {
      if (i) emb << ',';
      emb << internal::FormatRoundTrip(s.embedding[i]);
    }
    emb << "]}\n";
    lab << s.id << ',' << dataset.class_names()[s.label] << '\n';
    meta << s.id << ',' << ToString(s.metadata.sex) << ','
         << (s.metadata.age_years
                 ? internal::FormatRoundTrip(*s.metadata.age_years)
                 : std::string())
         << ',' << ToString(s.metadata.anatomical_site) << ','
         << s.metadata.cohort << '\n';
  }
  if (!emb || !lab || !meta) {
    throw DataError("failed writing dataset files");
  }
}

DatasetSplit SplitDataset(const Dataset& dataset,
                          const SplitFractions& fractions, uint64_t seed) {
  if (dataset.empty()) throw DataError("cannot split an empty dataset");
  double total = 0.0;
  size_t nonzero_parts = 0;
  for (const double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) {
      throw ConfigError("split fractions must be finite and non-negative");
    }
    total += f;
    if (f > 0.0) ++nonzero_parts;
  }
  if (total > 1.0 + 1e-9) throw ConfigError("split fractions sum above 1");

  std::vector<std::vector<size_t>> by_class(dataset.num_classes());
  for (size_t i = 0; i < dataset.size(); ++i) {
    by_class[dataset.sample(i).label].push_back(i);
  }

  Rng rng(seed);
  std::array<std::vector<size_t>*, 4> parts;
  DatasetSplit split;
  parts = {&split.train, &split.validation, &split.test, &split.calibration};
  for (size_t c = 0; c < by_class.size(); ++c) {
    std::vector<size_t>& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < nonzero_parts) {
      throw DataError("class '" + dataset.class_names()[c] + "' has " +
                      std::to_string(members.size()) +
                      " samples, fewer than the " +
                      std::to_string(nonzero_parts) + " nonzero split parts");
    }
    rng.Shuffle(std::span<size_t>(members));
    const double n = static_cast<double>(members.size());
    double cumulative = 0.0;
    size_t begin = 0;
    for (size_t p = 0; p < 4; ++p) {
      cumulative += fractions[p];
      // The small slack absorbs decimal fractions that are not exact in
      // binary, e.g. 0.5 + 0.25 + 0.15 landing just below 0.9.
      size_t end = static_cast<size_t>(std::floor(cumulative * n + 1e-9));
      end = std::min(std::max(end, begin), members.size());
      parts[p]->insert(parts[p]->end(), members.begin() + begin,
                       members.begin() + end);
      begin = end;
    }
  }
  for (auto* part : parts) std::sort(part->begin(), part->end());
  return split;
}

std::vector<size_t> ClassCounts(const Dataset& dataset,
                                std::span<const size_t> indices) {
  std::vector<size_t> counts(dataset.num_classes(), 0);
  for (const size_t i : indices) {
    if (i >= dataset.size()) {
      throw DataError("sample index " + std::to_string(i) + " out of range");
    }
    ++counts[dataset.sample(i).label];
  }
  return counts;
}

}  // namespace fairconf
