// Copyright 2026 The eabo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "eabo/numerics/sobol.hpp"

#include <array>
#include <string>

#include "eabo/errors.hpp"
#include "eabo/numerics/rng.hpp"

namespace eabo::numerics {
namespace {

constexpr int kBits = 32;

struct Primitive {
  int degree;
  unsigned coefficients;
  std::array<unsigned, 8> initial;
};

// Dimensions 2..21 of the new-joe-kuo-6.21201 table.
constexpr std::array<Primitive, kMaxSobolDimension - 1> kTable{{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
}};

std::array<std::uint32_t, kBits> direction_numbers(int dimension_index) {
  std::array<std::uint32_t, kBits> v{};
  if (dimension_index == 0) {
    for (int k = 0; k < kBits; ++k) v[k] = 1u << (kBits - 1 - k);
    return v;
  }
  const Primitive& p = kTable[dimension_index - 1];
  const int s = p.degree;
  for (int k = 0; k < s && k < kBits; ++k) v[k] = p.initial[k] << (kBits - 1 - k);
  for (int k = s; k < kBits; ++k) {
    std::uint32_t value = v[k - s] ^ (v[k - s] >> s);
    for (int l = 1; l < s; ++l) {
      if ((p.coefficients >> (s - 1 - l)) & 1u) value ^= v[k - l];
    }
    v[k] = value;
  }
  return v;
}

int lowest_zero_bit(std::uint64_t i) {
  int c = 0;
  while (i & 1u) {
    i >>= 1;
    ++c;
  }
  return c;
}

}  // namespace

Eigen::MatrixXd sobol_points(int count, int dim, std::uint64_t seed, bool scrambled) {
  if (dim < 1 || dim > kMaxSobolDimension) {
    throw UnsupportedDimension("sobol_points: dimension " + std::to_string(dim) + " outside [1, 21]");
  }
  if (count < 1) throw UnsupportedDimension("sobol_points: count must be positive");

  std::vector<std::array<std::uint32_t, kBits>> directions(dim);
  std::vector<std::uint32_t> shift(dim, 0u);
  for (int j = 0; j < dim; ++j) {
    directions[j] = direction_numbers(j);
    if (scrambled) shift[j] = static_cast<std::uint32_t>(derive_seed(seed, "sobol-shift", j) >> 32);
  }

  constexpr double kScale = 1.0 / 4294967296.0;
  Eigen::MatrixXd points(count, dim);
  std::vector<std::uint32_t> state(dim, 0u);
  for (int i = 0; i < count; ++i) {
    if (i > 0) {
      const int c = lowest_zero_bit(static_cast<std::uint64_t>(i - 1));
      for (int j = 0; j < dim; ++j) state[j] ^= directions[j][c];
    }
    for (int j = 0; j < dim; ++j) points(i, j) = static_cast<double>(state[j] ^ shift[j]) * kScale;
  }
  return points;
}

}  // namespace eabo::numerics
