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

#include "fairconf/pipeline.h"

#include <cmath>
#include <fstream>

#include "fairconf/errors.h"
#include "fairconf/random.h"
#include "text_io.h"

namespace fairconf {
namespace {

namespace fs = std::filesystem;

fs::path Resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void WriteJson(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out = internal::OpenForWrite(path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

nlohmann::json ReadJson(const fs::path& path) {
  std::ifstream in = internal::OpenForRead(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& config) {
  j = nlohmann::json{{"epochs", config.epochs},
                     {"batch_size", config.batch_size},
                     {"learning_rate", config.learning_rate},
                     {"bn_momentum", config.bn_momentum}};
}

void from_json(const nlohmann::json& j, TrainConfig& config) {
  TrainConfig out;
  try {
    out.epochs = j.value("epochs", out.epochs);
    out.batch_size = j.value("batch_size", out.batch_size);
    out.learning_rate = j.value("learning_rate", out.learning_rate);
    out.bn_momentum = j.value("bn_momentum", out.bn_momentum);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  config = out;
}

void PipelineConfig::Validate() const {
  if (data.has_value() == synth.has_value()) {
    throw ConfigError("config needs exactly one of \"data\" and \"synth\"");
  }
  if (synth) synth->Validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
  double total = 0.0;
  for (const double f : split_fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (total > 1.0 + 1e-9) throw ConfigError("split fractions sum above 1");
  if (architecture.n_blocks == 0) throw ConfigError("n_blocks must be positive");
  if (!(architecture.dropout_rate >= 0.0 && architecture.dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must be in [0, 1)");
  }
  train.Validate();
}

PipelineConfig ParsePipelineConfig(const nlohmann::json& j,
                                   const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig config;
  try {
    if (j.contains("data")) {
      const auto& d = j.at("data");
      DataPaths paths;
      paths.embeddings = Resolve(base_dir, d.at("embeddings").get<std::string>());
      paths.labels = Resolve(base_dir, d.at("labels").get<std::string>());
      if (d.contains("metadata") && !d.at("metadata").is_null()) {
        paths.metadata = Resolve(base_dir, d.at("metadata").get<std::string>());
      }
      paths.class_names =
          d.value("class_names", std::vector<std::string>{});
      config.data = std::move(paths);
    }
    if (j.contains("synth")) {
      SynthConfig synth = j.at("synth").get<SynthConfig>();
      if (!j.at("synth").contains("seed")) {
        synth.seed = DeriveSeed(j.value("seed", uint64_t{0}), "synth");
      }
      config.synth = std::move(synth);
    }
    if (j.contains("split")) {
      config.split_fractions = j.at("split").at("fractions").get<SplitFractions>();
    }
    config.seed = j.value("seed", uint64_t{0});
    if (j.contains("architecture")) {
      const auto& a = j.at("architecture");
      MlpArchitecture arch = a.get<MlpArchitecture>();
      if (!a.contains("input_dim")) arch.input_dim = 0;
      if (!a.contains("n_classes")) arch.n_classes = 0;
      config.architecture = arch;
    }
    if (j.contains("train")) config.train = j.at("train").get<TrainConfig>();
    config.train.seed = config.seed;
    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      if (s.is_string()) {
        if (s.get<std::string>() != "unsampled") {
          throw ConfigError("sampler must be an object or \"unsampled\"");
        }
      } else {
        config.train.sampler = s.get<SamplerConfig>();
      }
    }
    config.alpha = j.value("alpha", config.alpha);
    if (j.contains("report_axes")) {
      for (const auto& name : j.at("report_axes")) {
        config.report_axes.push_back(ParseGrouping(name.get<std::string>()));
      }
    }
    if (j.contains("output_dir")) {
      config.output_dir = Resolve(base_dir, j.at("output_dir").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  config.Validate();
  return config;
}

PipelineConfig LoadPipelineConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return ParsePipelineConfig(j, path.parent_path());
}

nlohmann::json PipelineConfigToJson(const PipelineConfig& config) {
  nlohmann::json j;
  if (config.data) {
    j["data"] = {{"embeddings", config.data->embeddings.string()},
                 {"labels", config.data->labels.string()},
                 {"class_names", config.data->class_names}};
    if (config.data->metadata) {
      j["data"]["metadata"] = config.data->metadata->string();
    }
  }
  if (config.synth) j["synth"] = *config.synth;
  j["split"] = {{"fractions", config.split_fractions}};
  j["seed"] = config.seed;
  j["architecture"] = config.architecture;
  j["train"] = config.train;
  j["sampler"] = config.train.sampler ? nlohmann::json(*config.train.sampler)
                                      : nlohmann::json("unsampled");
  j["alpha"] = config.alpha;
  nlohmann::json axes = nlohmann::json::array();
  for (const Grouping& g : config.report_axes) axes.push_back(GroupingName(g));
  j["report_axes"] = axes;
  j["output_dir"] = config.output_dir.string();
  return j;
}

SynthConfig ResolvedSynthConfig(const PipelineConfig& config) {
  if (!config.synth) throw ConfigError("config has no \"synth\" section");
  return *config.synth;
}

Dataset LoadPipelineDataset(const PipelineConfig& config) {
  if (config.synth) return GenerateSynthetic(*config.synth);
  if (!config.data) throw ConfigError("config has neither data nor synth");
  return LoadDataset(config.data->embeddings, config.data->labels,
                     config.data->metadata, config.data->class_names);
}

DatasetSplit PipelineSplit(const PipelineConfig& config, const Dataset& dataset) {
  return SplitDataset(dataset, config.split_fractions,
                      DeriveSeed(config.seed, "split"));
}

MlpArchitecture ResolvedArchitecture(const PipelineConfig& config,
                                     const Dataset& dataset) {
  MlpArchitecture arch = config.architecture;
  if (arch.input_dim == 0) arch.input_dim = dataset.embedding_dim();
  if (arch.n_classes == 0) arch.n_classes = dataset.num_classes();
  if (arch.input_dim != dataset.embedding_dim()) {
    throw ConfigError("architecture input_dim does not match the data");
  }
  if (arch.n_classes != dataset.num_classes()) {
    throw ConfigError("architecture n_classes does not match the data");
  }
  arch.Validate();
  return arch;
}

void RunSynth(const PipelineConfig& config, const fs::path& out) {
  const SynthConfig synth = ResolvedSynthConfig(config);
  const Dataset dataset = GenerateSynthetic(synth);
  WriteDataset(dataset, out / "embeddings.jsonl", out / "labels.csv",
               out / "metadata.csv");
  // Re-read to validate what was written.
  const Dataset reread = LoadDataset(out / "embeddings.jsonl", out / "labels.csv",
                                     out / "metadata.csv", dataset.class_names());
  if (!(reread == dataset)) {
    throw DataError("synthetic dataset did not survive a write/read round trip");
  }
  nlohmann::json manifest = {
      {"synth_config", synth},
      {"resolved_seed", synth.seed},
      {"class_names", dataset.class_names()},
      {"n_samples", dataset.size()},
      {"files", {"embeddings.jsonl", "labels.csv", "metadata.csv"}}};
  WriteJson(manifest, out / "synth_manifest.json");
}

TrainResult RunTrain(const PipelineConfig& config, const fs::path& out) {
  const Dataset dataset = LoadPipelineDataset(config);
  const DatasetSplit split = PipelineSplit(config, dataset);
  const MlpArchitecture arch = ResolvedArchitecture(config, dataset);
  TrainResult result = Train(dataset, split, arch, config.train);

  SaveCheckpoint(result.params, out / "model.ckpt");
  if (!(LoadCheckpoint(out / "model.ckpt") == result.params)) {
    throw DataError("checkpoint did not round-trip");
  }
  WriteJson(nlohmann::json(result.history), out / "history.json");
  if (!(ReadJson(out / "history.json").get<TrainHistory>() == result.history)) {
    throw DataError("history did not round-trip");
  }

  auto ids = [&](const std::vector<size_t>& indices) {
    std::vector<std::string> out_ids;
    out_ids.reserve(indices.size());
    for (const size_t i : indices) out_ids.push_back(dataset.sample(i).id);
    return out_ids;
  };
  WriteJson({{"train", ids(split.train)},
             {"validation", ids(split.validation)},
             {"test", ids(split.test)},
             {"calibration", ids(split.calibration)}},
            out / "split.json");
  return result;
}

AuditSummary RunAudit(const PipelineConfig& config, const fs::path& checkpoint,
                      const fs::path& out) {
  const Dataset dataset = LoadPipelineDataset(config);
  const DatasetSplit split = PipelineSplit(config, dataset);
  const MlpParams params = LoadCheckpoint(checkpoint);
  if (!(params.arch == ResolvedArchitecture(config, dataset))) {
    throw ConfigError("checkpoint architecture does not match the config");
  }
  if (split.calibration.empty()) throw DataError("missing split: calibration");
  if (split.test.empty()) throw DataError("missing split: test");

  const Eigen::MatrixXd cal_probs =
      PredictProba(params, EmbeddingMatrix(dataset, split.calibration));
  std::vector<int> cal_truths;
  for (const size_t i : split.calibration) cal_truths.push_back(dataset.sample(i).label);
  const CalibrationResult calibration =
      Calibrate(NonconformityScores(cal_probs, cal_truths), config.alpha);

  const Eigen::MatrixXd test_probs =
      PredictProba(params, EmbeddingMatrix(dataset, split.test));
  std::vector<PredictionSet> sets;
  sets.reserve(split.test.size());
  for (size_t r = 0; r < split.test.size(); ++r) {
    const Sample& s = dataset.sample(split.test[r]);
    const Eigen::VectorXd row = test_probs.row(static_cast<Eigen::Index>(r));
    sets.push_back(PredictSet(std::span<const double>(row.data(), row.size()),
                              calibration, s.id, s.label));
  }
  WritePredictionSets(sets, out / "prediction_sets.jsonl");
  // Downstream reports use the sets exactly as persisted (6-decimal
  // confidences) so that `audit` and `report` agree byte for byte.
  const std::vector<PredictionSet> persisted =
      ReadPredictionSets(out / "prediction_sets.jsonl");
  if (persisted.size() != sets.size()) {
    throw DataError("prediction set file did not round-trip");
  }
  for (size_t i = 0; i < sets.size(); ++i) {
    if (persisted[i].sample_id != sets[i].sample_id ||
        persisted[i].contains_truth != sets[i].contains_truth ||
        persisted[i].size() != sets[i].size()) {
      throw DataError("prediction set file did not round-trip");
    }
  }

  AuditSummary summary;
  summary.calibration = calibration;
  summary.coverage = EmpiricalCoverage(persisted);
  summary.n_test = persisted.size();
  nlohmann::json cal_json = calibration;
  cal_json["empirical_coverage"] = summary.coverage;
  cal_json["n_test"] = summary.n_test;
  WriteJson(cal_json, out / "calibration.json");

  const FairnessReport report = BuildFairnessReport(
      persisted, IndexMetadata(dataset), dataset.class_names(),
      config.report_axes);
  WriteFairnessReport(report, out / "report");
  if (!(ReadFairnessReport(out / "report" / "report.json") == report)) {
    throw DataError("fairness report did not round-trip");
  }
  return summary;
}

FairnessReport RunReport(const PipelineConfig& config, const fs::path& sets_path,
                         const fs::path& out) {
  const Dataset dataset = LoadPipelineDataset(config);
  const std::vector<PredictionSet> sets = ReadPredictionSets(sets_path);
  FairnessReport report = BuildFairnessReport(
      sets, IndexMetadata(dataset), dataset.class_names(), config.report_axes);
  WriteFairnessReport(report, out);
  if (!(ReadFairnessReport(out / "report.json") == report)) {
    throw DataError("fairness report did not round-trip");
  }
  return report;
}

}  // namespace fairconf
