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

#ifndef FAIRCONF_PIPELINE_H_
#define FAIRCONF_PIPELINE_H_

// Pipeline stages behind the command-line tool: synth, train, audit, report.
//
// All randomness descends from PipelineConfig::seed:
//   split seed      = DeriveSeed(seed, "split")
//   synth seed      = DeriveSeed(seed, "synth")   (unless synth.seed is set)
//   training        = seed, which Train() splits into "init", "sampler" and
//                     "dropout" streams.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairconf/conformal.h"
#include "fairconf/data_model.h"
#include "fairconf/fairness.h"
#include "fairconf/mlp.h"
#include "fairconf/synth.h"
#include "json.hpp"

namespace fairconf {

struct DataPaths {
  std::filesystem::path embeddings;
  std::filesystem::path labels;
  std::optional<std::filesystem::path> metadata;
  std::vector<std::string> class_names;  // empty: sorted distinct labels
};

struct PipelineConfig {
  // Exactly one of data / synth is set.
  std::optional<DataPaths> data;
  std::optional<SynthConfig> synth;
  SplitFractions split_fractions = {0.6, 0.15, 0.1, 0.15};
  uint64_t seed = 0;
  // input_dim / n_classes of 0 are filled in from the dataset.
  MlpArchitecture architecture{0, 6, 0.3, Activation::kRelu, 0};
  TrainConfig train;  // train.sampler empty means "unsampled"
  double alpha = 0.1;
  std::vector<Grouping> report_axes;
  std::filesystem::path output_dir = "out";

  void Validate() const;
};

// Relative data paths resolve against base_dir (normally the directory of
// the config file). Throws ConfigError.
PipelineConfig ParsePipelineConfig(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir = {});
PipelineConfig LoadPipelineConfig(const std::filesystem::path& path);
nlohmann::json PipelineConfigToJson(const PipelineConfig& config);

// The synth config with its seed resolved.
SynthConfig ResolvedSynthConfig(const PipelineConfig& config);

// Loads the files or generates the synthetic dataset.
Dataset LoadPipelineDataset(const PipelineConfig& config);

DatasetSplit PipelineSplit(const PipelineConfig& config, const Dataset& dataset);

// Architecture with input_dim / n_classes resolved against the dataset.
MlpArchitecture ResolvedArchitecture(const PipelineConfig& config,
                                     const Dataset& dataset);

// Writes embeddings.jsonl, labels.csv, metadata.csv and synth_manifest.json.
void RunSynth(const PipelineConfig& config, const std::filesystem::path& out);

// Writes model.ckpt, history.json and split.json.
TrainResult RunTrain(const PipelineConfig& config,
                     const std::filesystem::path& out);

struct AuditSummary {
  CalibrationResult calibration;
  double coverage = 0.0;
  size_t n_test = 0;
};

// Calibrates on the calibration split, writes prediction_sets.jsonl,
// calibration.json and the fairness report under out/report/.
AuditSummary RunAudit(const PipelineConfig& config,
                      const std::filesystem::path& checkpoint,
                      const std::filesystem::path& out);

// Re-derives the fairness report from an existing prediction set file.
FairnessReport RunReport(const PipelineConfig& config,
                         const std::filesystem::path& sets_path,
                         const std::filesystem::path& out);

void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);

}  // namespace fairconf

#endif  // FAIRCONF_PIPELINE_H_
