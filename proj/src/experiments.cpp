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

#include "eabo/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include <spdlog/spdlog.h>

#include "eabo/errors.hpp"
#include "eabo/state_json.hpp"

namespace eabo {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

// Sample mean and (n - 1) standard deviation; zero spread for one value.
Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

std::vector<TrajectoryStep> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return trajectory_from_csv(in);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<fs::path> sorted_csvs(const fs::path& dir, bool recursive) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  auto consider = [&](const fs::directory_entry& e) {
    if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().filename() != "aggregate.csv" &&
        e.path().filename().string().rfind("curve_", 0) != 0) {
      out.push_back(e.path());
    }
  };
  if (recursive) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) consider(e);
  } else {
    for (const auto& e : fs::directory_iterator(dir)) consider(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<RunConfig> SweepSpec::expand() const {
  const std::vector<std::uint64_t> s = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
  const std::vector<Policy> p = policies.empty() ? std::vector<Policy>{base.policy} : policies;
  const std::vector<double> r =
      cost_ratios.empty() ? std::vector<double>{base.costs.c_eval / base.costs.c_comp} : cost_ratios;
  const std::vector<double> n = noise_levels.empty() ? std::vector<double>{base.noise.sigma_eval} : noise_levels;
  std::vector<RunConfig> out;
  for (Policy policy : p) {
    for (double ratio : r) {
      for (double noise : n) {
        for (std::uint64_t seed : s) {
          RunConfig c = base;
          c.policy = policy;
          c.seed = seed;
          if (!cost_ratios.empty()) c.costs.c_comp = c.costs.c_eval / ratio;
          if (!noise_levels.empty()) {
            c.noise.sigma_eval = noise;
            c.noise.sigma_comp = noise;
          }
          out.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

SweepSpec sweep_spec_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("", "sweep spec must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    static const std::vector<std::string> allowed{"schema_version", "base",         "seeds", "policies",
                                                  "cost_ratios",    "noise_levels", "cap"};
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) throw ValidationError(key, "unknown key");
  }
  if (doc.contains("schema_version") && doc["schema_version"] != kRunConfigSchemaVersion) {
    throw ValidationError("schema_version", "unsupported version");
  }
  if (!doc.contains("base")) throw ValidationError("base", "is required");
  SweepSpec spec;
  try {
    spec.base = run_config_from_json(doc["base"], true);
  } catch (const ValidationError& e) {
    const std::string message = e.field().empty() ? e.what() : std::string(e.what()).substr(e.field().size() + 2);
    throw ValidationError(e.field().empty() ? "base" : "base." + e.field(), message);
  }
  if (doc.contains("seeds")) {
    const json& s = doc["seeds"];
    if (s.is_array()) {
      for (const auto& v : s) {
        if (!is_nonnegative_integer(v)) throw ValidationError("seeds", "must hold nonnegative integers");
        spec.seeds.push_back(v.get<std::uint64_t>());
      }
    } else if (s.is_object() && s.contains("count")) {
      const std::uint64_t start = s.value("start", std::uint64_t{0});
      const json& count = s["count"];
      if (!is_nonnegative_integer(count)) throw ValidationError("seeds.count", "must be a nonnegative integer");
      for (std::uint64_t i = 0; i < count.get<std::uint64_t>() && i <= 1000000; ++i) spec.seeds.push_back(start + i);
    } else {
      throw ValidationError("seeds", "expected an array or {\"start\", \"count\"}");
    }
  }
  if (doc.contains("policies")) {
    if (!doc["policies"].is_array()) throw ValidationError("policies", "must be an array");
    for (const auto& v : doc["policies"]) {
      if (!v.is_string()) throw ValidationError("policies", "must hold policy names");
      try {
        spec.policies.push_back(parse_policy(v.get<std::string>()));
      } catch (const ValidationError& e) {
        throw ValidationError("policies", std::string(e.what()).substr(e.field().size() + 2));
      }
    }
  }
  auto positive_list = [&](const char* key, std::vector<double>& out) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_array()) throw ValidationError(key, "must be an array");
    for (const auto& v : doc[key]) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) throw ValidationError(key, "must hold positive numbers");
      out.push_back(v.get<double>());
    }
  };
  positive_list("cost_ratios", spec.cost_ratios);
  positive_list("noise_levels", spec.noise_levels);
  if (doc.contains("cap")) {
    if (!doc["cap"].is_number_integer() || doc["cap"].get<int>() < 1) {
      throw ValidationError("cap", "must be a positive integer");
    }
    spec.cap = doc["cap"].get<int>();
  }
  const std::size_t size = std::max<std::size_t>(spec.seeds.size(), 1) * std::max<std::size_t>(spec.policies.size(), 1) *
                           std::max<std::size_t>(spec.cost_ratios.size(), 1) *
                           std::max<std::size_t>(spec.noise_levels.size(), 1);
  if (size > static_cast<std::size_t>(spec.cap)) {
    throw ValidationError("cap", "the sweep has " + std::to_string(size) + " runs, above the cap of " +
                                     std::to_string(spec.cap));
  }
  for (RunConfig& c : spec.expand()) c.validate(true);
  return spec;
}

std::string sweep_run_stem(const RunConfig& c) {
  return c.benchmark + "_" + std::string(policy_name(c.policy)) + "_r" + format_number(c.costs.c_eval / c.costs.c_comp) +
         "_n" + format_number(c.noise.sigma_eval) + "_s" + std::to_string(c.seed);
}

SweepOutcome run_sweep(const SweepSpec& spec, const fs::path& out, int parallel, bool force) {
  if (parallel < 1) throw ValidationError("--parallel", "must be at least 1");
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!force) {
      throw ValidationError("--out", out.string() + " already exists and is not empty; pass --force to overwrite");
    }
    fs::remove_all(out / "runs");
    fs::remove(out / "aggregate.csv");
    fs::remove(out / "failures.txt");
  }
  const fs::path runs_dir = out / "runs";
  fs::create_directories(runs_dir);
  const std::vector<RunConfig> configs = spec.expand();

  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::vector<std::string> failures;
  auto worker = [&]() {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      const RunConfig& c = configs[i];
      const std::string stem = sweep_run_stem(c);
      try {
        const RunResult r = run(c);
        write_run_files((runs_dir / stem).string(), c, r);
        if (!r.complete) {
          std::lock_guard lock(mutex);
          failures.push_back(stem + ": " + r.error);
        }
        spdlog::info("sweep: finished {} ({} of {})", stem, i + 1, configs.size());
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        failures.push_back(stem + ": " + e.what());
        spdlog::error("sweep: run {} failed: {}", stem, e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min<int>(parallel, static_cast<int>(std::max<std::size_t>(configs.size(), 1)));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::sort(failures.begin(), failures.end());
  std::string text;
  for (const auto& f : failures) text += f + "\n";
  write_text(out / "failures.txt", text);
  write_text(out / "aggregate.csv", aggregate_to_csv(aggregate_runs(runs_dir)));
  return {static_cast<int>(configs.size()), static_cast<int>(failures.size())};
}

std::vector<AggregateRow> aggregate_runs(const fs::path& runs_dir) {
  struct Cell {
    std::vector<double> utility, comp, early, late;
  };
  std::map<std::tuple<std::string, double, double>, Cell> cells;
  for (const fs::path& csv : sorted_csvs(runs_dir, false)) {
    fs::path sidecar = csv;
    sidecar.replace_extension(".json");
    if (!fs::exists(sidecar)) continue;
    const json meta = read_json(sidecar);
    const json& cfg = meta.at("config");
    if (!meta.at("summary").at("complete").get<bool>()) continue;
    const std::string policy = cfg.at("policy").get<std::string>();
    const double ratio = cfg.at("costs").at("c_eval").get<double>() / cfg.at("costs").at("c_comp").get<double>();
    const double noise = cfg.at("noise").at("sigma_eval").get<double>();
    const std::vector<TrajectoryStep> steps = read_csv(csv);
    Cell& cell = cells[{policy, ratio, noise}];
    if (steps.empty()) {
      const json& u = meta.at("summary").at("final_norm_utility");
      if (!u.is_null()) cell.utility.push_back(u.get<double>());
      cell.comp.push_back(0.0);
      cell.early.push_back(0.0);
      cell.late.push_back(0.0);
      continue;
    }
    if (steps.back().norm_utility) cell.utility.push_back(*steps.back().norm_utility);
    const AllocationSummary a = summarize_allocation(steps);
    cell.comp.push_back(a.comparison_fraction);
    cell.early.push_back(a.early_fraction);
    cell.late.push_back(a.late_fraction);
  }
  std::vector<AggregateRow> rows;
  for (const auto& [key, cell] : cells) {
    AggregateRow r;
    std::tie(r.policy, r.cost_ratio, r.noise) = key;
    r.count = static_cast<int>(cell.comp.size());
    const Moments u = moments(cell.utility), c = moments(cell.comp), e = moments(cell.early), l = moments(cell.late);
    r.utility_mean = u.mean;
    r.utility_std = u.std;
    r.comp_fraction_mean = c.mean;
    r.comp_fraction_std = c.std;
    r.early_mean = e.mean;
    r.early_std = e.std;
    r.late_mean = l.mean;
    r.late_std = l.std;
    rows.push_back(r);
  }
  return rows;
}

std::string aggregate_to_csv(const std::vector<AggregateRow>& rows) {
  std::string out =
      "policy,cost_ratio,noise,count,norm_utility_mean,norm_utility_std,comp_fraction_mean,comp_fraction_std,"
      "comp_early_mean,comp_early_std,comp_late_mean,comp_late_std\n";
  for (const AggregateRow& r : rows) {
    out += r.policy + "," + format_number(r.cost_ratio) + "," + format_number(r.noise) + "," + std::to_string(r.count) +
           "," + format_number(r.utility_mean) + "," + format_number(r.utility_std) + "," +
           format_number(r.comp_fraction_mean) + "," + format_number(r.comp_fraction_std) + "," +
           format_number(r.early_mean) + "," + format_number(r.early_std) + "," + format_number(r.late_mean) + "," +
           format_number(r.late_std) + "\n";
  }
  return out;
}

std::vector<std::optional<double>> best_so_far(const std::vector<TrajectoryStep>& steps, int grid_end) {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(grid_end) + 1);
  std::optional<double> best;
  std::size_t k = 0;
  for (int b = 0; b <= grid_end; ++b) {
    while (k < steps.size() && steps[k].cum_spend <= b) {
      if (steps[k].norm_utility) best = best ? std::max(*best, *steps[k].norm_utility) : *steps[k].norm_utility;
      ++k;
    }
    out[b] = best;
  }
  return out;
}

std::vector<CurvePoint> mean_curve(const std::vector<std::vector<TrajectoryStep>>& runs) {
  std::vector<const std::vector<TrajectoryStep>*> usable;
  double end = 0.0;
  for (const auto& r : runs) {
    if (r.empty()) continue;
    usable.push_back(&r);
    end = std::max(end, r.back().cum_spend);
  }
  if (usable.empty()) throw EmptyResults("mean_curve: no trajectory has any steps");
  const int grid_end = static_cast<int>(std::floor(end));
  std::vector<std::vector<std::optional<double>>> curves;
  for (const auto* r : usable) curves.push_back(best_so_far(*r, grid_end));
  std::vector<CurvePoint> out;
  for (int b = 0; b <= grid_end; ++b) {
    std::vector<double> values;
    bool all = true;
    for (const auto& c : curves) {
      if (!c[b]) {
        all = false;
        break;
      }
      values.push_back(*c[b]);
    }
    if (!all) continue;
    const Moments m = moments(values);
    const double half = 1.96 * m.std / std::sqrt(static_cast<double>(values.size()));
    out.push_back({static_cast<double>(b), m.mean, m.mean - half, m.mean + half, static_cast<int>(values.size())});
  }
  return out;
}

std::vector<fs::path> write_report(const fs::path& results_dir, const fs::path& out) {
  std::map<std::string, std::vector<std::vector<TrajectoryStep>>> by_policy;
  for (const fs::path& csv : sorted_csvs(results_dir, true)) {
    fs::path sidecar = csv;
    sidecar.replace_extension(".json");
    std::string policy = "unknown";
    if (fs::exists(sidecar)) policy = read_json(sidecar).at("config").at("policy").get<std::string>();
    by_policy[policy].push_back(read_csv(csv));
  }
  if (by_policy.empty()) throw EmptyResults("report: no trajectory CSVs under " + results_dir.string());
  fs::create_directories(out);
  std::vector<fs::path> written;
  for (const auto& [policy, runs] : by_policy) {
    std::string text = "budget,mean,lo,hi,count\n";
    for (const CurvePoint& p : mean_curve(runs)) {
      text += format_number(p.budget) + "," + format_number(p.mean) + "," + format_number(p.lo) + "," +
              format_number(p.hi) + "," + std::to_string(p.count) + "\n";
    }
    const fs::path file = out / ("curve_" + policy + ".csv");
    write_text(file, text);
    written.push_back(file);
  }
  return written;
}

}  // namespace eabo
