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

#include "fairconf/mlp.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "fairconf/errors.h"
#include "fairconf/random.h"
#include "text_io.h"

namespace fairconf {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double ActivationValue(Activation activation, double y) {
  if (activation == Activation::kRelu) return y > 0.0 ? y : 0.0;
  return 0.5 * y * (1.0 + std::erf(y / std::numbers::sqrt2));
}

double ActivationDerivative(Activation activation, double y) {
  if (activation == Activation::kRelu) return y > 0.0 ? 1.0 : 0.0;
  const double cdf = 0.5 * (1.0 + std::erf(y / std::numbers::sqrt2));
  const double pdf =
      std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + y * pdf;
}

// Mean cross-entropy from logits, via a stable log-sum-exp.
double CrossEntropy(const MatrixXd& logits, std::span<const int> labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double max = logits.row(i).maxCoeff();
    const double lse =
        max + std::log((logits.row(i).array() - max).exp().sum());
    total += lse - logits(i, labels[i]);
  }
  return total / static_cast<double>(logits.rows());
}

void CheckLabels(std::span<const int> labels, Eigen::Index rows,
                 size_t n_classes) {
  if (labels.size() != static_cast<size_t>(rows)) {
    throw DataError("label count does not match batch rows");
  }
  for (const int label : labels) {
    if (label < 0 || static_cast<size_t>(label) >= n_classes) {
      throw DataError("label " + std::to_string(label) + " out of range");
    }
  }
}

void RequireFinite(const MatrixXd& m, const std::string& layer) {
  if (!m.allFinite()) throw NumericError("non-finite gradient in " + layer);
}

MatrixXd UniformMatrix(Eigen::Index rows, Eigen::Index cols, double bound,
                       Rng& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      m(r, c) = (2.0 * rng.Uniform() - 1.0) * bound;
    }
  }
  return m;
}

bool SameArray(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

}  // namespace

std::string_view ToString(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "gelu";
}

Activation ParseActivation(std::string_view text) {
  if (text == "relu") return Activation::kRelu;
  if (text == "gelu") return Activation::kGelu;
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

std::vector<size_t> MlpArchitecture::Widths() const {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (n_classes == 0) throw ConfigError("n_classes must be positive");
  std::vector<size_t> widths = {input_dim};
  for (size_t b = 0; b < n_blocks; ++b) {
    const size_t out = widths.back() / 2;
    if (out < 1) {
      throw ConfigError("width underflow at block " + std::to_string(b + 1) +
                        ": input width " + std::to_string(widths.back()) +
                        " cannot be halved");
    }
    widths.push_back(out);
  }
  widths.push_back(n_classes);
  return widths;
}

void MlpArchitecture::Validate() const {
  if (n_blocks == 0) throw ConfigError("n_blocks must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must be in [0, 1)");
  }
  Widths();
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (!(arch == other.arch) || blocks.size() != other.blocks.size()) {
    return false;
  }
  for (size_t b = 0; b < blocks.size(); ++b) {
    const BlockParams& x = blocks[b];
    const BlockParams& y = other.blocks[b];
    if (!SameArray(x.weight, y.weight) || !SameArray(x.bias, y.bias) ||
        !SameArray(x.bn_scale, y.bn_scale) ||
        !SameArray(x.bn_shift, y.bn_shift) ||
        !SameArray(x.running_mean, y.running_mean) ||
        !SameArray(x.running_var, y.running_var)) {
      return false;
    }
  }
  return SameArray(output_weight, other.output_weight) &&
         SameArray(output_bias, other.output_bias);
}

void TrainConfig::Validate() const {
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be non-negative");
  }
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) {
    throw ConfigError("bn_momentum must be in (0, 1)");
  }
  if (sampler) sampler->Validate();
}

MlpParams InitMlp(const MlpArchitecture& arch, uint64_t seed) {
  arch.Validate();
  const std::vector<size_t> widths = arch.Widths();
  Rng rng(seed);
  MlpParams params;
  params.arch = arch;
  for (size_t b = 0; b < arch.n_blocks; ++b) {
    const auto in = static_cast<Eigen::Index>(widths[b]);
    const auto out = static_cast<Eigen::Index>(widths[b + 1]);
    BlockParams block;
    block.weight = UniformMatrix(out, in, std::sqrt(6.0 / in), rng);
    block.bias = UniformMatrix(out, 1, 1.0 / std::sqrt(in), rng);
    block.bn_scale = VectorXd::Ones(out);
    block.bn_shift = VectorXd::Zero(out);
    block.running_mean = VectorXd::Zero(out);
    block.running_var = VectorXd::Ones(out);
    params.blocks.push_back(std::move(block));
  }
  const auto last = static_cast<Eigen::Index>(widths[arch.n_blocks]);
  const auto classes = static_cast<Eigen::Index>(arch.n_classes);
  params.output_weight =
      UniformMatrix(classes, last, 1.0 / std::sqrt(last), rng);
  params.output_bias = UniformMatrix(classes, 1, 1.0 / std::sqrt(last), rng);
  return params;
}

ForwardResult Forward(const MlpParams& params, const MatrixXd& batch,
                      ForwardMode mode, uint64_t rng_seed) {
  if (batch.cols() != static_cast<Eigen::Index>(params.arch.input_dim)) {
    throw DataError("batch width " + std::to_string(batch.cols()) +
                    " does not match input_dim " +
                    std::to_string(params.arch.input_dim));
  }
  if (mode == ForwardMode::kTrain && batch.rows() < 2) {
    throw DataError("train-mode forward needs at least 2 rows");
  }
  if (!batch.allFinite()) throw NumericError("non-finite input batch");

  const double p = params.arch.dropout_rate;
  const bool use_dropout = mode == ForwardMode::kTrain && p > 0.0;
  Rng rng(rng_seed);

  ForwardResult result;
  result.cache.mode = mode;
  MatrixXd x = batch;
  for (const BlockParams& block : params.blocks) {
    BlockCache cache;
    MatrixXd z = (x * block.weight.transpose()).rowwise() +
                 block.bias.transpose();
    if (mode == ForwardMode::kTrain) {
      cache.batch_mean = z.colwise().mean().transpose();
      cache.batch_var = (z.rowwise() - cache.batch_mean.transpose())
                            .array()
                            .square()
                            .colwise()
                            .mean()
                            .transpose();
    } else {
      cache.batch_mean = block.running_mean;
      cache.batch_var = block.running_var;
    }
    cache.inv_std =
        (cache.batch_var.array() + kBatchNormEpsilon).rsqrt().matrix();
    cache.normalized = ((z.rowwise() - cache.batch_mean.transpose())
                            .array()
                            .rowwise() *
                        cache.inv_std.transpose().array())
                           .matrix();
    cache.pre_activation =
        ((cache.normalized.array().rowwise() *
          block.bn_scale.transpose().array())
             .rowwise() +
         block.bn_shift.transpose().array())
            .matrix();
    MatrixXd h = cache.pre_activation.unaryExpr([&](double y) {
      return ActivationValue(params.arch.activation, y);
    });
    if (use_dropout) {
      const double keep_scale = 1.0 / (1.0 - p);
      cache.dropout_scale.resize(h.rows(), h.cols());
      // Row-major draw order: sample by sample, unit by unit.
      for (Eigen::Index r = 0; r < h.rows(); ++r) {
        for (Eigen::Index c = 0; c < h.cols(); ++c) {
          cache.dropout_scale(r, c) = rng.Uniform() < p ? 0.0 : keep_scale;
        }
      }
      h.array() *= cache.dropout_scale.array();
    }
    cache.input = std::move(x);
    x = std::move(h);
    result.cache.blocks.push_back(std::move(cache));
  }
  result.logits = (x * params.output_weight.transpose()).rowwise() +
                  params.output_bias.transpose();
  result.cache.head_input = std::move(x);
  if (!result.logits.allFinite()) throw NumericError("non-finite logits");
  return result;
}

MatrixXd SoftmaxProbs(const MatrixXd& logits) {
  MatrixXd probs(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double max = logits.row(i).maxCoeff();
    probs.row(i) = (logits.row(i).array() - max).exp().matrix();
    probs.row(i) /= probs.row(i).sum();
  }
  return probs;
}

double BatchLoss(const MlpParams& params, const MatrixXd& batch,
                 std::span<const int> labels, uint64_t rng_seed) {
  CheckLabels(labels, batch.rows(), params.arch.n_classes);
  return CrossEntropy(Forward(params, batch, ForwardMode::kTrain, rng_seed).logits,
                      labels);
}

namespace {

GradientResult Backward(const MlpParams& params, const ForwardResult& forward,
                        std::span<const int> labels) {
  const MatrixXd& logits = forward.logits;
  const auto n = static_cast<double>(logits.rows());
  GradientResult result;
  result.loss = CrossEntropy(logits, labels);

  MatrixXd d_logits = SoftmaxProbs(logits);
  for (Eigen::Index i = 0; i < d_logits.rows(); ++i) d_logits(i, labels[i]) -= 1.0;
  d_logits /= n;

  MlpGradients& g = result.gradients;
  g.output_weight = d_logits.transpose() * forward.cache.head_input;
  g.output_bias = d_logits.colwise().sum().transpose();
  MatrixXd d_h = d_logits * params.output_weight;

  g.blocks.resize(params.blocks.size());
  for (size_t b = params.blocks.size(); b-- > 0;) {
    const BlockParams& block = params.blocks[b];
    const BlockCache& cache = forward.cache.blocks[b];
    BlockGradients& gb = g.blocks[b];

    if (cache.dropout_scale.size() > 0) d_h.array() *= cache.dropout_scale.array();
    const MatrixXd d_y =
        (d_h.array() * cache.pre_activation.unaryExpr([&](double y) {
          return ActivationDerivative(params.arch.activation, y);
        }).array())
            .matrix();
    gb.bn_scale =
        (d_y.array() * cache.normalized.array()).colwise().sum().transpose();
    gb.bn_shift = d_y.colwise().sum().transpose();

    // Batch-norm backward with batch statistics:
    // dz = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)).
    const MatrixXd d_xhat =
        (d_y.array().rowwise() * block.bn_scale.transpose().array()).matrix();
    const Eigen::RowVectorXd mean_d_xhat = d_xhat.colwise().mean();
    const Eigen::RowVectorXd mean_d_xhat_xhat =
        (d_xhat.array() * cache.normalized.array()).colwise().mean();
    const MatrixXd d_z =
        ((d_xhat.rowwise() - mean_d_xhat).array() -
         cache.normalized.array().rowwise() * mean_d_xhat_xhat.array())
            .rowwise() *
        cache.inv_std.transpose().array();

    gb.weight = d_z.transpose() * cache.input;
    gb.bias = d_z.colwise().sum().transpose();
    if (b > 0) d_h = d_z * block.weight;
  }
  return result;
}

}  // namespace

GradientResult ComputeGradients(const MlpParams& params, const MatrixXd& batch,
                                std::span<const int> labels,
                                uint64_t rng_seed) {
  CheckLabels(labels, batch.rows(), params.arch.n_classes);
  const ForwardResult forward =
      Forward(params, batch, ForwardMode::kTrain, rng_seed);
  return Backward(params, forward, labels);
}

StepResult BackwardStep(const MlpParams& params, const MatrixXd& batch,
                        std::span<const int> labels, const TrainConfig& config,
                        uint64_t rng_seed) {
  CheckLabels(labels, batch.rows(), params.arch.n_classes);
  const ForwardResult forward =
      Forward(params, batch, ForwardMode::kTrain, rng_seed);
  const GradientResult grad = Backward(params, forward, labels);
  if (!std::isfinite(grad.loss)) throw NumericError("non-finite loss");

  const MlpGradients& g = grad.gradients;
  for (size_t b = 0; b < g.blocks.size(); ++b) {
    const std::string layer = "block " + std::to_string(b + 1);
    RequireFinite(g.blocks[b].weight, layer + " weight");
    RequireFinite(g.blocks[b].bias, layer + " bias");
    RequireFinite(g.blocks[b].bn_scale, layer + " batch-norm scale");
    RequireFinite(g.blocks[b].bn_shift, layer + " batch-norm shift");
  }
  RequireFinite(g.output_weight, "output layer weight");
  RequireFinite(g.output_bias, "output layer bias");

  StepResult step{params, grad.loss};
  const double lr = config.learning_rate;
  const double m = config.bn_momentum;
  const double rows = static_cast<double>(batch.rows());
  for (size_t b = 0; b < step.params.blocks.size(); ++b) {
    BlockParams& block = step.params.blocks[b];
    const BlockCache& cache = forward.cache.blocks[b];
    block.weight -= lr * g.blocks[b].weight;
    block.bias -= lr * g.blocks[b].bias;
    block.bn_scale -= lr * g.blocks[b].bn_scale;
    block.bn_shift -= lr * g.blocks[b].bn_shift;
    block.running_mean = (1.0 - m) * block.running_mean + m * cache.batch_mean;
    block.running_var = (1.0 - m) * block.running_var +
                        m * cache.batch_var * (rows / (rows - 1.0));
  }
  step.params.output_weight -= lr * g.output_weight;
  step.params.output_bias -= lr * g.output_bias;
  return step;
}

size_t NumTrainableParameters(const MlpArchitecture& arch) {
  const std::vector<size_t> widths = arch.Widths();
  size_t total = 0;
  for (size_t b = 0; b < arch.n_blocks; ++b) {
    total += widths[b + 1] * widths[b] + 3 * widths[b + 1];
  }
  total += arch.n_classes * widths[arch.n_blocks] + arch.n_classes;
  return total;
}

namespace {

// Resolves a flat index in the order shared by TrainableParameter and
// GradientAt.
template <typename Blocks, typename Mat, typename Vec>
double* LocateFlat(Blocks& blocks, Mat& head_weight, Vec& head_bias,
                   size_t index) {
  auto take = [&](auto& array) -> double* {
    const auto size = static_cast<size_t>(array.size());
    if (index < size) return array.data() + index;
    index -= size;
    return nullptr;
  };
  for (auto& block : blocks) {
    if (double* p = take(block.weight)) return p;
    if (double* p = take(block.bias)) return p;
    if (double* p = take(block.bn_scale)) return p;
    if (double* p = take(block.bn_shift)) return p;
  }
  if (double* p = take(head_weight)) return p;
  if (double* p = take(head_bias)) return p;
  throw std::out_of_range("flat parameter index out of range");
}

}  // namespace

double& TrainableParameter(MlpParams& params, size_t flat_index) {
  return *LocateFlat(params.blocks, params.output_weight, params.output_bias,
                     flat_index);
}

double GradientAt(const MlpGradients& gradients, size_t flat_index) {
  auto& g = const_cast<MlpGradients&>(gradients);
  return *LocateFlat(g.blocks, g.output_weight, g.output_bias, flat_index);
}

std::vector<double> ClasswiseF1(std::span<const int> predictions,
                                std::span<const int> truths,
                                size_t n_classes) {
  if (predictions.size() != truths.size()) {
    throw DataError("prediction and truth vectors differ in length");
  }
  std::vector<size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  for (size_t i = 0; i < truths.size(); ++i) {
    const auto pred = static_cast<size_t>(predictions[i]);
    const auto truth = static_cast<size_t>(truths[i]);
    if (pred >= n_classes || truth >= n_classes) {
      throw DataError("label out of range in F1 computation");
    }
    if (pred == truth) {
      ++tp[truth];
    } else {
      ++fp[pred];
      ++fn[truth];
    }
  }
  std::vector<double> f1(n_classes, 0.0);
  for (size_t c = 0; c < n_classes; ++c) {
    const double precision =
        tp[c] + fp[c] == 0 ? 0.0 : static_cast<double>(tp[c]) / (tp[c] + fp[c]);
    const double recall =
        tp[c] + fn[c] == 0 ? 0.0 : static_cast<double>(tp[c]) / (tp[c] + fn[c]);
    if (precision + recall > 0.0) {
      f1[c] = 2.0 * precision * recall / (precision + recall);
    }
  }
  return f1;
}

std::vector<double> FoldMeanClasswiseF1(std::span<const int> predictions,
                                        std::span<const int> truths,
                                        size_t n_classes, int folds) {
  if (predictions.size() != truths.size()) {
    throw DataError("prediction and truth vectors differ in length");
  }
  if (truths.empty()) throw DataError("cannot compute F1 on an empty slice");
  if (folds < 1) throw ConfigError("fold count must be positive");
  const size_t k = std::min(static_cast<size_t>(folds), truths.size());

  std::vector<std::vector<int>> fold_pred(k), fold_truth(k);
  std::vector<size_t> seen_per_class(n_classes, 0);
  for (size_t i = 0; i < truths.size(); ++i) {
    const auto c = static_cast<size_t>(truths[i]);
    if (c >= n_classes) throw DataError("label out of range in F1 computation");
    const size_t fold = seen_per_class[c]++ % k;
    fold_pred[fold].push_back(predictions[i]);
    fold_truth[fold].push_back(truths[i]);
  }
  std::vector<double> mean(n_classes, 0.0);
  for (size_t f = 0; f < k; ++f) {
    const std::vector<double> f1 =
        ClasswiseF1(fold_pred[f], fold_truth[f], n_classes);
    for (size_t c = 0; c < n_classes; ++c) mean[c] += f1[c];
  }
  for (double& v : mean) v /= static_cast<double>(k);
  return mean;
}

MatrixXd EmbeddingMatrix(const Dataset& dataset,
                         std::span<const size_t> indices) {
  MatrixXd m(static_cast<Eigen::Index>(indices.size()),
             static_cast<Eigen::Index>(dataset.embedding_dim()));
  for (size_t r = 0; r < indices.size(); ++r) {
    const std::vector<double>& e = dataset.sample(indices[r]).embedding;
    for (size_t c = 0; c < e.size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = e[c];
    }
  }
  return m;
}

MatrixXd PredictProba(const MlpParams& params, const MatrixXd& samples) {
  if (samples.rows() == 0) {
    return MatrixXd(0, static_cast<Eigen::Index>(params.arch.n_classes));
  }
  return SoftmaxProbs(Forward(params, samples, ForwardMode::kEval, 0).logits);
}

std::vector<int> ArgmaxRows(const MatrixXd& matrix) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(matrix.rows()));
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < matrix.cols(); ++c) {
      if (matrix(i, c) > matrix(i, best)) best = c;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

TrainResult Train(const Dataset& dataset, const DatasetSplit& split,
                  const MlpArchitecture& arch, const TrainConfig& config) {
  config.Validate();
  if (arch.input_dim != dataset.embedding_dim()) {
    throw ConfigError("architecture input_dim " + std::to_string(arch.input_dim) +
                      " does not match embedding dimension " +
                      std::to_string(dataset.embedding_dim()));
  }
  if (arch.n_classes != dataset.num_classes()) {
    throw ConfigError("architecture n_classes does not match the dataset");
  }
  if (split.train.size() < 2) throw DataError("training split needs >= 2 samples");
  if (config.sampler && split.validation.empty()) {
    throw DataError("the F1 sampler needs a nonempty validation split");
  }

  const uint64_t order_seed = DeriveSeed(config.seed, "sampler");
  const uint64_t dropout_seed = DeriveSeed(config.seed, "dropout");

  TrainResult result{InitMlp(arch, DeriveSeed(config.seed, "init")), {}};
  const MatrixXd train_x = EmbeddingMatrix(dataset, split.train);
  const MatrixXd val_x = EmbeddingMatrix(dataset, split.validation);
  std::vector<int> train_labels, val_labels;
  for (const size_t i : split.train) train_labels.push_back(dataset.sample(i).label);
  for (const size_t i : split.validation) val_labels.push_back(dataset.sample(i).label);

  std::optional<SamplerState> state;
  if (config.sampler) {
    const std::vector<size_t> counts = ClassCounts(dataset, split.train);
    state = InitSamplerState(counts, *config.sampler);
  }

  const size_t n_train = split.train.size();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // Positions into split.train for this epoch.
    std::vector<size_t> order;
    const uint64_t epoch_seed = DeriveSeed(order_seed, static_cast<uint64_t>(epoch));
    if (state) {
      order = DrawEpochIndices(*state, train_labels, n_train, epoch_seed);
      result.history.sampler_weights.push_back(state->class_weights);
    } else {
      order.resize(n_train);
      for (size_t i = 0; i < n_train; ++i) order[i] = i;
      Rng rng(epoch_seed);
      rng.Shuffle(std::span<size_t>(order));
      result.history.sampler_weights.emplace_back();
    }

    double loss_sum = 0.0;
    size_t loss_rows = 0;
    size_t batch_index = 0;
    for (size_t start = 0; start < n_train; start += config.batch_size) {
      const size_t end = std::min(n_train, start + config.batch_size);
      if (end - start < 2) break;  // batch norm needs two rows
      MatrixXd batch(static_cast<Eigen::Index>(end - start), train_x.cols());
      std::vector<int> labels;
      labels.reserve(end - start);
      for (size_t k = start; k < end; ++k) {
        batch.row(static_cast<Eigen::Index>(k - start)) =
            train_x.row(static_cast<Eigen::Index>(order[k]));
        labels.push_back(train_labels[order[k]]);
      }
      StepResult step = BackwardStep(
          result.params, batch, labels, config,
          DeriveSeed(dropout_seed, static_cast<uint64_t>(epoch), batch_index++));
      result.params = std::move(step.params);
      loss_sum += step.loss * static_cast<double>(end - start);
      loss_rows += end - start;
    }
    result.history.train_loss.push_back(loss_sum / static_cast<double>(loss_rows));

    if (split.validation.empty()) {
      result.history.validation_f1.emplace_back();
      continue;
    }
    const std::vector<int> predicted = ArgmaxRows(PredictProba(result.params, val_x));
    const int folds = config.sampler ? config.sampler->cv_folds : 1;
    std::vector<double> f1 =
        FoldMeanClasswiseF1(predicted, val_labels, arch.n_classes, folds);
    if (state) state = UpdateSampler(*state, f1, *config.sampler, epoch);
    result.history.validation_f1.push_back(std::move(f1));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint format (all integers u64 little-endian, reals IEEE-754 binary64):
//   magic "FCMLPCKP", version, input_dim, n_blocks, n_classes, activation,
//   dropout_rate, then each array as (rows, cols, values column-major):
//   per block weight, bias, bn_scale, bn_shift, running_mean, running_var;
//   head weight, head bias.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'C', 'M', 'L', 'P', 'C', 'K', 'P'};
constexpr uint64_t kCheckpointVersion = 1;

class ByteWriter {
 public:
  void U64(uint64_t v) { Raw(&v, sizeof(v)); }
  void F64(double v) { Raw(&v, sizeof(v)); }
  void Array(const MatrixXd& m) {
    U64(static_cast<uint64_t>(m.rows()));
    U64(static_cast<uint64_t>(m.cols()));
    Raw(m.data(), sizeof(double) * static_cast<size_t>(m.size()));
  }
  void Array(const VectorXd& v) { Array(MatrixXd(v)); }
  void Raw(const void* p, size_t n) {
    out_.append(static_cast<const char*>(p), n);
  }
  std::string Take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}
  uint64_t U64() {
    uint64_t v;
    Raw(&v, sizeof(v));
    return v;
  }
  double F64() {
    double v;
    Raw(&v, sizeof(v));
    return v;
  }
  MatrixXd Array(Eigen::Index rows, Eigen::Index cols) {
    const auto r = static_cast<Eigen::Index>(U64());
    const auto c = static_cast<Eigen::Index>(U64());
    if (r != rows || c != cols) throw DataError("checkpoint: array shape mismatch");
    MatrixXd m(r, c);
    Raw(m.data(), sizeof(double) * static_cast<size_t>(m.size()));
    return m;
  }
  VectorXd Vector(Eigen::Index rows) { return Array(rows, 1).col(0); }
  void Raw(void* p, size_t n) {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated file");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string SerializeCheckpoint(const MlpParams& params) {
  ByteWriter w;
  w.Raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.U64(kCheckpointVersion);
  w.U64(params.arch.input_dim);
  w.U64(params.arch.n_blocks);
  w.U64(params.arch.n_classes);
  w.U64(params.arch.activation == Activation::kRelu ? 0 : 1);
  w.F64(params.arch.dropout_rate);
  for (const BlockParams& b : params.blocks) {
    w.Array(b.weight);
    w.Array(b.bias);
    w.Array(b.bn_scale);
    w.Array(b.bn_shift);
    w.Array(b.running_mean);
    w.Array(b.running_var);
  }
  w.Array(params.output_weight);
  w.Array(params.output_bias);
  return w.Take();
}

MlpParams DeserializeCheckpoint(const std::string& bytes) {
  ByteReader r(bytes);
  char magic[8];
  r.Raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  if (const uint64_t version = r.U64(); version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  MlpParams params;
  params.arch.input_dim = r.U64();
  params.arch.n_blocks = r.U64();
  params.arch.n_classes = r.U64();
  const uint64_t activation = r.U64();
  if (activation > 1) throw DataError("checkpoint: unknown activation");
  params.arch.activation = activation == 0 ? Activation::kRelu : Activation::kGelu;
  params.arch.dropout_rate = r.F64();
  std::vector<size_t> widths;
  try {
    params.arch.Validate();
    widths = params.arch.Widths();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  for (size_t b = 0; b < params.arch.n_blocks; ++b) {
    const auto in = static_cast<Eigen::Index>(widths[b]);
    const auto out = static_cast<Eigen::Index>(widths[b + 1]);
    BlockParams block;
    block.weight = r.Array(out, in);
    block.bias = r.Vector(out);
    block.bn_scale = r.Vector(out);
    block.bn_shift = r.Vector(out);
    block.running_mean = r.Vector(out);
    block.running_var = r.Vector(out);
    params.blocks.push_back(std::move(block));
  }
  const auto last = static_cast<Eigen::Index>(widths[params.arch.n_blocks]);
  const auto classes = static_cast<Eigen::Index>(params.arch.n_classes);
  params.output_weight = r.Array(classes, last);
  params.output_bias = r.Vector(classes);
  if (!r.AtEnd()) throw DataError("checkpoint: trailing bytes");
  return params;
}

void SaveCheckpoint(const MlpParams& params, const std::filesystem::path& path) {
  const std::string bytes = SerializeCheckpoint(params);
  std::ofstream out = internal::OpenForWrite(path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

MlpParams LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in = internal::OpenForRead(path);
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return DeserializeCheckpoint(bytes);
}

void to_json(nlohmann::json& j, const MlpArchitecture& arch) {
  j = nlohmann::json{{"input_dim", arch.input_dim},
                     {"n_blocks", arch.n_blocks},
                     {"dropout_rate", arch.dropout_rate},
                     {"activation", std::string(ToString(arch.activation))},
                     {"n_classes", arch.n_classes}};
}

void from_json(const nlohmann::json& j, MlpArchitecture& arch) {
  MlpArchitecture out;
  try {
    out.input_dim = j.value("input_dim", out.input_dim);
    out.n_blocks = j.value("n_blocks", out.n_blocks);
    out.dropout_rate = j.value("dropout_rate", out.dropout_rate);
    out.activation =
        ParseActivation(j.value("activation", std::string("relu")));
    out.n_classes = j.value("n_classes", out.n_classes);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("architecture: ") + e.what());
  }
  arch = out;
}

void to_json(nlohmann::json& j, const TrainHistory& history) {
  j = nlohmann::json{{"train_loss", history.train_loss},
                     {"validation_f1", history.validation_f1},
                     {"sampler_weights", history.sampler_weights}};
}

void from_json(const nlohmann::json& j, TrainHistory& history) {
  try {
    history.train_loss = j.at("train_loss").get<std::vector<double>>();
    history.validation_f1 =
        j.at("validation_f1").get<std::vector<std::vector<double>>>();
    history.sampler_weights =
        j.at("sampler_weights").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("train history: ") + e.what());
  }
}

}  // namespace fairconf
