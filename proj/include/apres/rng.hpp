// Copyright 2026 The apres Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace apres {

// Seeded generator whose derived draws are bit-identical across standard
// library implementations. std::mt19937_64 output is fully specified, but the
// std distributions are not, so the draws below are computed by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., n-1}; n must be > 0. Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller (one draw per call, the sine half is dropped).
  double normal();

  double gamma(double shape);    // Marsaglia-Tsang; shape > 0, unit scale
  std::int64_t poisson(double mean);
  // NB2 draw with mean mu and Var = mu + alpha mu^2 (Poisson-gamma mixture).
  std::int64_t negative_binomial(double mu, double alpha);

  // Engine state as text, via the standard stream operators.
  std::string save_state() const;
  void restore_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

// Stateless 64-bit mixer used to derive sub-seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace apres
