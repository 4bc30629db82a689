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

#ifndef FAIRCONF_MLP_H_
#define FAIRCONF_MLP_H_

// Feed-forward classification head over precomputed embeddings.
//
// Block b (0-based) maps width input_dim >> b to input_dim >> (b + 1) and
// applies, in order: fully connected layer, 1D batch normalization,
// activation, dropout. A final fully connected layer maps the last block's
// width to n_classes logits.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairconf/data_model.h"
#include "fairconf/sampler.h"
#include "json.hpp"

namespace fairconf {

inline constexpr double kBatchNormEpsilon = 1e-5;

enum class Activation { kRelu, kGelu };

std::string_view ToString(Activation activation);
Activation ParseActivation(std::string_view text);

struct MlpArchitecture {
  size_t input_dim = 2048;
  size_t n_blocks = 6;
  double dropout_rate = 0.3;
  Activation activation = Activation::kRelu;
  size_t n_classes = 8;

  // Layer widths: input_dim, input_dim/2, ..., input_dim/2^n_blocks,
  // n_classes. Throws ConfigError naming the first block (1-based) whose
  // output width would be zero.
  std::vector<size_t> Widths() const;

  void Validate() const;

  friend bool operator==(const MlpArchitecture&,
                         const MlpArchitecture&) = default;
};

struct BlockParams {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Eigen::VectorXd bn_scale;
  Eigen::VectorXd bn_shift;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

struct MlpParams {
  MlpArchitecture arch;
  std::vector<BlockParams> blocks;
  Eigen::MatrixXd output_weight;  // n_classes x last width
  Eigen::VectorXd output_bias;

  // Exact (bitwise for finite values) equality of every array.
  bool operator==(const MlpParams& other) const;
};

// Trainable-parameter gradients; running statistics have none.
struct BlockGradients {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Eigen::VectorXd bn_scale;
  Eigen::VectorXd bn_shift;
};

struct MlpGradients {
  std::vector<BlockGradients> blocks;
  Eigen::MatrixXd output_weight;
  Eigen::VectorXd output_bias;
};

enum class ForwardMode { kTrain, kEval };

// Intermediate activations retained for the backward pass.
struct BlockCache {
  Eigen::MatrixXd input;       // batch x in
  Eigen::MatrixXd normalized;  // x_hat, batch x out
  Eigen::VectorXd inv_std;     // per unit, 1 / sqrt(var + eps)
  Eigen::VectorXd batch_mean;
  Eigen::VectorXd batch_var;   // biased
  Eigen::MatrixXd pre_activation;
  Eigen::MatrixXd dropout_scale;  // 0 or 1/(1-p) per entry; empty if no dropout
};

struct ForwardCache {
  ForwardMode mode = ForwardMode::kEval;
  std::vector<BlockCache> blocks;
  Eigen::MatrixXd head_input;  // input of the final layer
};

struct ForwardResult {
  Eigen::MatrixXd logits;  // batch x n_classes
  ForwardCache cache;
};

struct TrainConfig {
  int epochs = 40;
  size_t batch_size = 64;
  double learning_rate = 0.05;
  uint64_t seed = 0;
  double bn_momentum = 0.1;
  // Absent means the unsampled baseline (uniform shuffling).
  std::optional<SamplerConfig> sampler;

  void Validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<std::vector<double>> validation_f1;  // fold-mean, per epoch
  std::vector<std::vector<double>> sampler_weights;  // weights used per epoch

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  MlpParams params;
  TrainHistory history;
};

struct StepResult {
  MlpParams params;
  double loss = 0.0;
};

struct GradientResult {
  MlpGradients gradients;
  double loss = 0.0;
};

// Fan-in scaled uniform initialization, U(-sqrt(6/fan_in), sqrt(6/fan_in))
// for block weights and U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for the head and
// all biases. Batch norm starts at scale 1, shift 0, running mean 0,
// running variance 1.
MlpParams InitMlp(const MlpArchitecture& arch, uint64_t seed);

// Train mode normalizes with batch statistics and applies inverted dropout
// with masks drawn from rng_seed; it needs at least two rows. Eval mode uses
// running statistics and no dropout.
ForwardResult Forward(const MlpParams& params, const Eigen::MatrixXd& batch,
                      ForwardMode mode, uint64_t rng_seed);

// Row-wise softmax with max subtraction.
Eigen::MatrixXd SoftmaxProbs(const Eigen::MatrixXd& logits);

// Mean cross-entropy of a train-mode forward pass.
double BatchLoss(const MlpParams& params, const Eigen::MatrixXd& batch,
                 std::span<const int> labels, uint64_t rng_seed);

// Analytic gradients of BatchLoss with respect to every trainable parameter.
GradientResult ComputeGradients(const MlpParams& params,
                                const Eigen::MatrixXd& batch,
                                std::span<const int> labels, uint64_t rng_seed);

// One plain gradient-descent step on mean cross-entropy, plus a running
// statistics update: running = (1 - m) * running + m * batch, with the
// unbiased batch variance. Throws NumericError naming the layer when a
// gradient is not finite.
StepResult BackwardStep(const MlpParams& params, const Eigen::MatrixXd& batch,
                        std::span<const int> labels, const TrainConfig& config,
                        uint64_t rng_seed);

// Flat view over trainable parameters, in the order: per block weight
// (column-major), bias, bn_scale, bn_shift; then head weight, head bias.
size_t NumTrainableParameters(const MlpArchitecture& arch);
double& TrainableParameter(MlpParams& params, size_t flat_index);
double GradientAt(const MlpGradients& gradients, size_t flat_index);

// Per-class F1 = 2PR / (P + R), 0 when the denominator is 0.
std::vector<double> ClasswiseF1(std::span<const int> predictions,
                                std::span<const int> truths, size_t n_classes);

// Splits the evaluation slice into `folds` stratified round-robin folds (the
// i-th sample of each class goes to fold i mod folds) and averages the
// classwise F1 over folds. The fold count is capped at the slice size.
std::vector<double> FoldMeanClasswiseF1(std::span<const int> predictions,
                                        std::span<const int> truths,
                                        size_t n_classes, int folds);

// Rows are the embeddings of the given samples.
Eigen::MatrixXd EmbeddingMatrix(const Dataset& dataset,
                                std::span<const size_t> indices);

Eigen::MatrixXd PredictProba(const MlpParams& params,
                             const Eigen::MatrixXd& samples);

// Row-wise argmax, ties to the lower class index.
std::vector<int> ArgmaxRows(const Eigen::MatrixXd& matrix);

// Trains for config.epochs epochs on split.train, evaluating classwise F1
// on split.validation after every epoch. Random streams are derived from
// config.seed: "init" for parameters, "sampler" for epoch orderings and
// draws, "dropout" for masks.
TrainResult Train(const Dataset& dataset, const DatasetSplit& split,
                  const MlpArchitecture& arch, const TrainConfig& config);

// Versioned little-endian binary checkpoint; round-trips bit-exactly.
std::string SerializeCheckpoint(const MlpParams& params);
MlpParams DeserializeCheckpoint(const std::string& bytes);
void SaveCheckpoint(const MlpParams& params, const std::filesystem::path& path);
MlpParams LoadCheckpoint(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const MlpArchitecture& arch);
void from_json(const nlohmann::json& j, MlpArchitecture& arch);
void to_json(nlohmann::json& j, const TrainHistory& history);
void from_json(const nlohmann::json& j, TrainHistory& history);

}  // namespace fairconf

#endif  // FAIRCONF_MLP_H_
