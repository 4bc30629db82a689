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

#ifndef FAIRCONF_RANDOM_H_
#define FAIRCONF_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace fairconf {

// Derives an independent child seed from a parent seed and a stream name.
// child = splitmix64(parent ^ fnv1a64(name)). Every pipeline stage draws
// from its own named stream ("split", "init", "dropout", "sampler",
// "synth", ...) so that changing one stage never reshuffles another.
uint64_t DeriveSeed(uint64_t parent, std::string_view stream);

// Derives a child seed from a parent and two integer coordinates, e.g.
// (epoch, batch).
uint64_t DeriveSeed(uint64_t parent, uint64_t a, uint64_t b = 0);

// Pseudo-random source with platform-stable output. The engine is
// std::mt19937_64 (fully specified by the standard); the distributions are
// implemented here because the standard library ones are not portable.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform();

  // Uniform integer in [0, n). n must be positive.
  size_t UniformIndex(size_t n);

  // Standard normal variate (Box-Muller).
  double Normal();

  // Index drawn from a discrete distribution given by non-negative weights
  // that need not be normalized.
  size_t Categorical(std::span<const double> weights);

  template <typename T>
  void Shuffle(std::span<T> values) {
    for (size_t i = values.size(); i > 1; --i) {
      const size_t j = UniformIndex(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace fairconf

#endif  // FAIRCONF_RANDOM_H_
