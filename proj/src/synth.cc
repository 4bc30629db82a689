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

#include "fairconf/synth.h"

#include <cmath>
#include <cstdio>

#include "fairconf/errors.h"
#include "fairconf/random.h"

namespace fairconf {
namespace {

template <size_t N>
void ValidateFractions(const std::array<double, N>& fractions,
                       const char* axis) {
  double total = 0.0;
  for (const double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) {
      throw ConfigError(std::string("synth: ") + axis +
                        " fractions must be non-negative");
    }
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError(std::string("synth: ") + axis +
                      " fractions must sum to 1");
  }
}

bool InShiftedSubgroup(const ShiftedSubgroup& subgroup,
                       const DemographicMetadata& m) {
  if (subgroup.axis == "sex") return ToString(m.sex) == subgroup.value;
  if (subgroup.axis == "age_band") {
    return ToString(m.age_band()) == subgroup.value;
  }
  if (subgroup.axis == "anatomical_site") {
    return ToString(m.anatomical_site) == subgroup.value;
  }
  return false;
}

std::optional<double> SampleAge(AgeBand band, Rng& rng) {
  switch (band) {
    case AgeBand::kUnder30:
      return 5.0 + static_cast<double>(rng.UniformIndex(25));
    case AgeBand::kFrom30To60:
      return 30.0 + static_cast<double>(rng.UniformIndex(31));
    case AgeBand::kOver60:
      return 61.0 + static_cast<double>(rng.UniformIndex(30));
    case AgeBand::kUnknown:
      break;
  }
  return std::nullopt;
}

}  // namespace

void SynthConfig::Validate() const {
  if (n_classes == 0) throw ConfigError("synth: n_classes must be positive");
  if (embedding_dim == 0) {
    throw ConfigError("synth: embedding_dim must be positive");
  }
  if (embedding_dim < n_classes) {
    throw ConfigError("synth: embedding_dim (" + std::to_string(embedding_dim) +
                      ") must be at least n_classes (" +
                      std::to_string(n_classes) +
                      ") to place class means on orthogonal axes");
  }
  if (class_counts.size() != n_classes) {
    throw ConfigError("synth: class_counts must have n_classes entries");
  }
  for (const size_t c : class_counts) {
    if (c == 0) throw ConfigError("synth: class counts must be positive");
  }
  if (!(class_separation > 0.0) || !std::isfinite(class_separation)) {
    throw ConfigError("synth: class_separation must be positive");
  }
  if (!(subgroup_shift >= 0.0) || !std::isfinite(subgroup_shift)) {
    throw ConfigError("synth: subgroup_shift must be non-negative");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("synth: noise_sigma must be non-negative");
  }
  ValidateFractions(sex_fractions, "sex");
  ValidateFractions(age_band_fractions, "age band");
  ValidateFractions(site_fractions, "site");
  if (shifted_subgroup.axis != "sex" && shifted_subgroup.axis != "age_band" &&
      shifted_subgroup.axis != "anatomical_site") {
    throw ConfigError("synth: shifted_subgroup.axis must be sex, age_band or "
                      "anatomical_site");
  }
  if (!class_names.empty() && class_names.size() != n_classes) {
    throw ConfigError("synth: class_names must have n_classes entries");
  }
}

std::vector<double> SyntheticClassMean(const SynthConfig& config, size_t c) {
  std::vector<double> mean(config.embedding_dim, 0.0);
  mean.at(c) = config.class_separation / std::sqrt(2.0);
  return mean;
}

Dataset GenerateSynthetic(const SynthConfig& config) {
  config.Validate();
  std::vector<std::string> names = config.class_names;
  if (names.empty()) {
    for (size_t c = 0; c < config.n_classes; ++c) {
      names.push_back("C" + std::to_string(c));
    }
  }
  const double shift_component =
      config.subgroup_shift / std::sqrt(static_cast<double>(config.embedding_dim));

  Rng rng(config.seed);
  std::vector<Sample> samples;
  size_t next_id = 0;
  for (size_t c = 0; c < config.n_classes; ++c) {
    const std::vector<double> mean = SyntheticClassMean(config, c);
    for (size_t k = 0; k < config.class_counts[c]; ++k) {
      Sample s;
      char id[32];
      std::snprintf(id, sizeof(id), "s%06zu", next_id++);
      s.id = id;
      s.label = static_cast<int>(c);
      s.metadata.sex = kAllSexes[rng.Categorical(config.sex_fractions)];
      s.metadata.age_years =
          SampleAge(kAllAgeBands[rng.Categorical(config.age_band_fractions)], rng);
      s.metadata.anatomical_site =
          kAllSites[rng.Categorical(config.site_fractions)];
      s.metadata.cohort = config.cohort;
      const bool shifted = InShiftedSubgroup(config.shifted_subgroup, s.metadata);
      s.embedding.resize(config.embedding_dim);
      for (size_t d = 0; d < config.embedding_dim; ++d) {
        s.embedding[d] = mean[d] + config.noise_sigma * rng.Normal() +
                         (shifted ? shift_component : 0.0);
      }
      samples.push_back(std::move(s));
    }
  }
  return Dataset(std::move(samples), std::move(names), config.embedding_dim);
}

void to_json(nlohmann::json& j, const SynthConfig& config) {
  j = nlohmann::json{
      {"n_classes", config.n_classes},
      {"embedding_dim", config.embedding_dim},
      {"class_counts", config.class_counts},
      {"class_separation", config.class_separation},
      {"subgroup_shift", config.subgroup_shift},
      {"noise_sigma", config.noise_sigma},
      {"subgroup_fractions",
       {{"sex", config.sex_fractions},
        {"age_band", config.age_band_fractions},
        {"anatomical_site", config.site_fractions}}},
      {"shifted_subgroup",
       {{"axis", config.shifted_subgroup.axis},
        {"value", config.shifted_subgroup.value}}},
      {"cohort", config.cohort},
      {"class_names", config.class_names},
      {"seed", config.seed},
  };
}

void from_json(const nlohmann::json& j, SynthConfig& config) {
  SynthConfig out;
  try {
    out.n_classes = j.at("n_classes").get<size_t>();
    out.embedding_dim = j.at("embedding_dim").get<size_t>();
    out.class_counts = j.at("class_counts").get<std::vector<size_t>>();
    out.class_separation = j.at("class_separation").get<double>();
    out.subgroup_shift = j.value("subgroup_shift", out.subgroup_shift);
    out.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("subgroup_fractions")) {
      const auto& f = j.at("subgroup_fractions");
      if (f.contains("sex")) out.sex_fractions = f.at("sex");
      if (f.contains("age_band")) out.age_band_fractions = f.at("age_band");
      if (f.contains("anatomical_site")) {
        out.site_fractions = f.at("anatomical_site");
      }
    }
    if (j.contains("shifted_subgroup")) {
      out.shifted_subgroup.axis = j.at("shifted_subgroup").at("axis");
      out.shifted_subgroup.value = j.at("shifted_subgroup").at("value");
    }
    out.cohort = j.value("cohort", out.cohort);
    out.class_names =
        j.value("class_names", std::vector<std::string>{});
    out.seed = j.value("seed", uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  config = std::move(out);
}

}  // namespace fairconf
