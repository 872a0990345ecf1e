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

// Regenerates data/benchmark_constants.json.
#include <fstream>
#include <iostream>

#include "eabo/benchmarks.hpp"
#include "eabo/numerics/sobol.hpp"

using namespace eabo;

namespace {

std::vector<Eigen::VectorXd> grid_best(const Benchmark& b, const Utility& u, int per_axis) {
  Eigen::VectorXd best_x;
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd x(2);
  for (int i = 0; i < per_axis; ++i) {
    for (int k = 0; k < per_axis; ++k) {
      x << i / double(per_axis - 1), k / double(per_axis - 1);
      const double v = u.value(b.evaluate_truth(x));
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
  }
  return {best_x};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_benchmark_constants OUT.json\n";
    return 2;
  }
  std::vector<Benchmark> out;
  for (BenchmarkId id : {BenchmarkId::Branin, BenchmarkId::Hartmann6, BenchmarkId::BraninCurrin, BenchmarkId::Vlmop2}) {
    const Benchmark bare(id, derive_standardization(id));
    std::vector<Utility> utilities{Utility::default_linear(bare.outputs())};
    if (bare.outputs() > 1) utilities.push_back(Utility::default_chebyshev(bare.outputs()));
    std::vector<Optimum> optima;
    for (const Utility& u : utilities) {
      std::vector<Eigen::VectorXd> starts;
      if (bare.dim() == 2) {
        starts = grid_best(bare, u, 1001);
      } else {
        Eigen::VectorXd known(6);
        known << 0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573;
        starts.push_back(known);
      }
      optima.push_back(search_optimum(bare, u, starts, 1 << 16, 16));
      std::cerr << bare.name() << ": optimum " << optima.back().value << "\n";
    }
    out.emplace_back(id, bare.standardization(), std::move(optima));
  }
  std::ofstream file(argv[1]);
  file << benchmark_constants_to_json(out);
  return file ? 0 : 1;
}
