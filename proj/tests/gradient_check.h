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

#ifndef FAIRCONF_TESTS_GRADIENT_CHECK_H_
#define FAIRCONF_TESTS_GRADIENT_CHECK_H_

#include <algorithm>
#include <cmath>
#include <vector>

#include "fairconf/mlp.h"
#include "fairconf/random.h"

namespace fairconf::testing {

struct GradientCheckOutcome {
  double max_relative_error = 0.0;
  size_t checked = 0;
  size_t skipped_at_kink = 0;
};

// |a - n| / max(|a|, |n|, 1e-7)
inline double RelativeError(double analytic, double numeric) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), 1e-7});
  return std::abs(analytic - numeric) / scale;
}

// Random parameters (including non-trivial batch-norm affine terms), a random
// batch, and central differences on `n_coordinates` random trainable
// parameters. When `skip_kinks` is set, a coordinate is skipped if any
// pre-activation changes sign between the two perturbed forward passes.
inline GradientCheckOutcome CheckGradients(const MlpArchitecture& arch,
                                           uint64_t seed, size_t batch_rows,
                                           size_t n_coordinates, double step,
                                           bool skip_kinks) {
  Rng rng(DeriveSeed(seed, "gradient_check"));
  MlpParams params = InitMlp(arch, DeriveSeed(seed, "init"));
  for (BlockParams& b : params.blocks) {
    for (Eigen::Index i = 0; i < b.bn_scale.size(); ++i) {
      b.bn_scale[i] = 0.5 + rng.Uniform();
      b.bn_shift[i] = rng.Uniform() - 0.5;
    }
  }
  Eigen::MatrixXd batch(static_cast<Eigen::Index>(batch_rows),
                        static_cast<Eigen::Index>(arch.input_dim));
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    for (Eigen::Index c = 0; c < batch.cols(); ++c) batch(r, c) = rng.Normal();
  }
  std::vector<int> labels(batch_rows);
  for (int& y : labels) y = static_cast<int>(rng.UniformIndex(arch.n_classes));
  const uint64_t dropout_seed = DeriveSeed(seed, "dropout");

  const GradientResult analytic =
      ComputeGradients(params, batch, labels, dropout_seed);
  const size_t n_params = NumTrainableParameters(arch);
  GradientCheckOutcome outcome;
  for (size_t k = 0; k < n_coordinates; ++k) {
    const size_t idx = rng.UniformIndex(n_params);
    double& theta = TrainableParameter(params, idx);
    const double original = theta;
    theta = original + step;
    const double loss_plus = BatchLoss(params, batch, labels, dropout_seed);
    const ForwardResult fwd_plus =
        Forward(params, batch, ForwardMode::kTrain, dropout_seed);
    theta = original - step;
    const double loss_minus = BatchLoss(params, batch, labels, dropout_seed);
    const ForwardResult fwd_minus =
        Forward(params, batch, ForwardMode::kTrain, dropout_seed);
    theta = original;
    if (skip_kinks) {
      bool crossed = false;
      for (size_t b = 0; b < fwd_plus.cache.blocks.size() && !crossed; ++b) {
        const Eigen::MatrixXd& p = fwd_plus.cache.blocks[b].pre_activation;
        const Eigen::MatrixXd& m = fwd_minus.cache.blocks[b].pre_activation;
        crossed = ((p.array() > 0) != (m.array() > 0)).any();
      }
      if (crossed) {
        ++outcome.skipped_at_kink;
        continue;
      }
    }
    const double numeric = (loss_plus - loss_minus) / (2 * step);
    outcome.max_relative_error =
        std::max(outcome.max_relative_error,
                 RelativeError(GradientAt(analytic.gradients, idx), numeric));
    ++outcome.checked;
  }
  return outcome;
}

}  // namespace fairconf::testing

#endif  // FAIRCONF_TESTS_GRADIENT_CHECK_H_
