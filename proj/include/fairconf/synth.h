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

#ifndef FAIRCONF_SYNTH_H_
#define FAIRCONF_SYNTH_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fairconf/data_model.h"
#include "json.hpp"

namespace fairconf {

// Which metadata axis and value receive the covariate-shift offset.
struct ShiftedSubgroup {
  std::string axis = "age_band";  // "sex", "age_band" or "anatomical_site"
  std::string value = "over60";
};

// Parameters of the synthetic Gaussian-mixture embedding generator.
//
// Class c has mean (class_separation / sqrt(2)) * e_c, so every pair of class
// means is exactly class_separation apart. Each sample is its class mean plus
// isotropic N(0, noise_sigma^2) noise; samples in the shifted subgroup also
// get subgroup_shift * (1, ..., 1) / sqrt(embedding_dim) added.
struct SynthConfig {
  size_t n_classes = 3;
  size_t embedding_dim = 16;
  std::vector<size_t> class_counts = {100, 100, 100};
  double class_separation = 4.0;
  double subgroup_shift = 0.0;
  double noise_sigma = 1.0;
  std::array<double, 3> sex_fractions = {0.5, 0.5, 0.0};  // male, female, unknown
  std::array<double, 4> age_band_fractions = {0.2, 0.5, 0.3, 0.0};
  std::array<double, 8> site_fractions = {0.25, 0.2, 0.15, 0.15,
                                          0.15, 0.05, 0.05, 0.0};
  ShiftedSubgroup shifted_subgroup;
  std::string cohort = "synthetic";
  std::vector<std::string> class_names;  // defaults to C0, C1, ...
  uint64_t seed = 0;

  // Throws ConfigError describing the first violated constraint.
  void Validate() const;
};

// Deterministic for a fixed config. Samples are emitted class by class with
// ids "s000000", "s000001", ... Ages are whole years drawn uniformly inside
// the sampled band: [5, 29], [30, 60] or [61, 90].
Dataset GenerateSynthetic(const SynthConfig& config);

// The mean vector used for class c.
std::vector<double> SyntheticClassMean(const SynthConfig& config, size_t c);

void to_json(nlohmann::json& j, const SynthConfig& config);
void from_json(const nlohmann::json& j, SynthConfig& config);

}  // namespace fairconf

#endif  // FAIRCONF_SYNTH_H_
