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

// Command-line front end:
//   fairconf synth  --config cfg.json [--seed N] [--out DIR]
//   fairconf train  --config cfg.json [--seed N] [--out DIR]
//   fairconf audit  --config cfg.json [--checkpoint F] [--seed N] [--alpha A] [--out DIR]
//   fairconf report --config cfg.json --sets F [--out DIR]
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fairconf/errors.h"
#include "fairconf/pipeline.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using fairconf::PipelineConfig;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<double> alpha;
  std::string out;
};

PipelineConfig LoadConfig(const CommonOptions& options) {
  std::ifstream in(options.config_path);
  if (!in) {
    throw fairconf::ConfigError("cannot open config " + options.config_path);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw fairconf::ConfigError(options.config_path + ": " + e.what());
  }
  if (options.seed) j["seed"] = *options.seed;
  if (options.alpha) j["alpha"] = *options.alpha;
  return fairconf::ParsePipelineConfig(
      j, fs::path(options.config_path).parent_path());
}

fs::path OutputDir(const CommonOptions& options, const PipelineConfig& config) {
  return options.out.empty() ? config.output_dir : fs::path(options.out);
}

void AddCommon(CLI::App* app, CommonOptions& options, bool with_seed,
               bool with_alpha) {
  app->add_option("--config", options.config_path, "Pipeline config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--out", options.out,
                  "Output directory (default: config output_dir)");
  if (with_seed) app->add_option("--seed", options.seed, "Override the top-level seed");
  if (with_alpha) app->add_option("--alpha", options.alpha, "Override alpha");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal fairness auditing pipeline"};
  app.require_subcommand(1);

  CommonOptions synth_opts, train_opts, audit_opts, report_opts;
  std::string checkpoint, sets_path;

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  AddCommon(synth, synth_opts, true, false);
  CLI::App* train = app.add_subcommand("train", "Train the classification head");
  AddCommon(train, train_opts, true, false);
  CLI::App* audit = app.add_subcommand(
      "audit", "Calibrate, emit prediction sets and the fairness report");
  AddCommon(audit, audit_opts, true, true);
  audit->add_option("--checkpoint", checkpoint,
                    "Model checkpoint (default: <out>/model.ckpt)");
  CLI::App* report = app.add_subcommand(
      "report", "Rebuild the fairness report from a prediction set file");
  AddCommon(report, report_opts, false, false);
  report->add_option("--sets", sets_path, "prediction_sets.jsonl")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) {
      const PipelineConfig config = LoadConfig(synth_opts);
      const fs::path out = OutputDir(synth_opts, config);
      fairconf::RunSynth(config, out);
      std::cout << "wrote synthetic dataset to " << out.string()
                << " (seed " << fairconf::ResolvedSynthConfig(config).seed
                << ")\n";
    } else if (*train) {
      const PipelineConfig config = LoadConfig(train_opts);
      const fs::path out = OutputDir(train_opts, config);
      const fairconf::TrainResult result = fairconf::RunTrain(config, out);
      std::cout << "trained " << result.history.train_loss.size()
                << " epochs, final loss " << result.history.train_loss.back()
                << "; checkpoint " << (out / "model.ckpt").string() << '\n';
    } else if (*audit) {
      const PipelineConfig config = LoadConfig(audit_opts);
      const fs::path out = OutputDir(audit_opts, config);
      const fs::path ckpt = checkpoint.empty() ? out / "model.ckpt" : fs::path(checkpoint);
      const fairconf::AuditSummary summary = fairconf::RunAudit(config, ckpt, out);
      std::printf(
          "alpha %.4f, n_calibration %zu, q_hat %s\n"
          "empirical coverage %.6f over %zu test samples\n"
          "theoretical band [%.6f, %.6f]\n",
          summary.calibration.alpha, summary.calibration.n_calibration,
          summary.calibration.overflow()
              ? "inf"
              : std::to_string(summary.calibration.q_hat).c_str(),
          summary.coverage, summary.n_test,
          summary.calibration.coverage_lower(),
          summary.calibration.coverage_upper());
    } else if (*report) {
      const PipelineConfig config = LoadConfig(report_opts);
      const fs::path out = OutputDir(report_opts, config) / "report";
      const fairconf::FairnessReport r =
          fairconf::RunReport(config, sets_path, out);
      std::cout << "wrote report for " << r.total_sets << " sets to "
                << out.string() << '\n';
    }
  } catch (const fairconf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fairconf::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fairconf::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
