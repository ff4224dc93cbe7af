/*
 * Copyright (c) The gridq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "gridq/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gridq/errors.hpp"
#include "gridq/metrics.hpp"
#include "gridq/rng.hpp"

namespace gridq {

namespace {

std::uint64_t cell_seed(std::uint64_t base, const GridCell& cell) {
  return splitmix64(base ^ splitmix64(cell.N * 0x1F3D5B79ULL + cell.M * 0x2545F491ULL + cell.K));
}

BenchRecord run_cell(const CloudSource& source, const GridCell& cell, const Combo& combo,
                     const SweepOptions& options) {
  const std::uint64_t seed = cell_seed(options.seed, cell);
  const PointCloud cloud = source.make(cell.N, seed);

  SamplingConfig config;
  if (options.voxel_size) {
    config.voxel_size = *options.voxel_size;
  } else {
    const double e = suggest_voxel_edge(cloud, options.points_per_voxel);
    config.voxel_size = {e, e, e};
  }
  config.M = cell.M;
  config.K = cell.K;
  config.neighborhood_radius = options.neighborhood_radius;
  GroupingOptions gopts;
  gopts.sampler = combo.sampler;
  gopts.querier = combo.querier;
  gopts.ball_preset = options.ball_preset;
  gopts.keep_sampled_center = !is_voxel_sampler(combo.sampler);

  const Rng root(seed);
  for (std::size_t w = 0; w < options.warmups; ++w) {
    Rng rng = root.split(1000 + w);
    (void)cagq(cloud, config, gopts, rng);
  }

  std::vector<std::uint64_t> latencies;
  double coverage_sum = 0.0;
  bool built_index = false;
  bool full_scan = false;
  for (std::size_t r = 0; r < options.reps; ++r) {
    Rng rng = root.split(r);
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = cagq(cloud, config, gopts, rng);
    const auto t1 = std::chrono::steady_clock::now();
    latencies.push_back(static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
    coverage_sum += occupied_space_coverage(cloud, out, config.voxel_size);
    built_index = out.built_index;
    full_scan = out.scanned_full_cloud;
  }
  std::nth_element(latencies.begin(), latencies.begin() + static_cast<std::ptrdiff_t>(latencies.size() / 2),
                   latencies.end());

  BenchRecord rec;
  rec.sampler = std::string(to_string(combo.sampler));
  rec.querier = std::string(to_string(combo.querier));
  rec.N = cell.N;
  rec.M = cell.M;
  rec.K = cell.K;
  rec.coverage_pct = coverage_sum / static_cast<double>(options.reps);
  rec.latency_ns = latencies[latencies.size() / 2];
  rec.reps = options.reps;
  rec.seed = seed;
  rec.includes_index_build = built_index;
  rec.includes_full_scan = full_scan;
  rec.contention_tainted = options.parallel;
  return rec;
}

}  // namespace

std::string Combo::name() const {
  return std::string(to_string(sampler)) + "+" + std::string(to_string(querier));
}

std::optional<Combo> parse_combo(std::string_view text) {
  const auto plus = text.find('+');
  if (plus == std::string_view::npos) return std::nullopt;
  const auto s = parse_sampler(text.substr(0, plus));
  const auto q = parse_querier(text.substr(plus + 1));
  if (!s || !q) return std::nullopt;
  return Combo{*s, *q};
}

std::vector<GridCell> table2_grid() {
  // {N, M, K} in the reference row order (rows are listed as N, K, M).
  return {{1024, 8, 8},     {1024, 128, 8},    {1024, 32, 128},    {1024, 128, 128},
          {8192, 64, 8},    {8192, 1024, 8},   {8192, 256, 128},   {8192, 1024, 128},
          {81920, 1024, 32}, {81920, 10240, 32}, {81920, 1024, 128}, {81920, 10240, 128}};
}

std::vector<Combo> table2_combos() {
  return {{Sampler::rps, Querier::ball}, {Sampler::fps, Querier::ball}, {Sampler::rvs, Querier::cube},
          {Sampler::cas, Querier::cube}, {Sampler::rps, Querier::knn},  {Sampler::fps, Querier::knn},
          {Sampler::rvs, Querier::grid_knn}, {Sampler::cas, Querier::grid_knn}};
}

PointCloud CloudSource::make(std::size_t N, std::uint64_t seed) const {
  if (!pool) return synth_cloud(generator.kind, N, generator.params, seed);
  if (pool->size() < N) {
    throw std::invalid_argument("source cloud has " + std::to_string(pool->size()) + " points, need " +
                                std::to_string(N));
  }
  if (pool->size() == N) return *pool;
  std::vector<std::size_t> order(pool->size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < N; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform(order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(N);
  std::sort(order.begin(), order.end());
  PointCloud out;
  out.points.reserve(N);
  for (auto i : order) out.points.push_back(pool->points[i]);
  return out;
}

std::vector<BenchRecord> run_sweep(const CloudSource& source, std::span<const GridCell> grid,
                                   std::span<const Combo> combos, const SweepOptions& options,
                                   std::vector<std::string>* warnings) {
  if (options.reps < 3) throw std::invalid_argument("run_sweep: reps must be >= 3");
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };

  std::vector<GridCell> cells;
  for (const auto& cell : grid) {
    if (cell.N == 0 || cell.M == 0 || cell.K == 0) {
      warn("skipping unsatisfiable cell N=" + std::to_string(cell.N) + " M=" + std::to_string(cell.M) +
           " K=" + std::to_string(cell.K));
      continue;
    }
    if (source.pool && source.pool->size() < cell.N) {
      warn("skipping cell N=" + std::to_string(cell.N) + ": source has only " +
           std::to_string(source.pool->size()) + " points");
      continue;
    }
    cells.push_back(cell);
  }

  std::vector<BenchRecord> records(cells.size() * combos.size());
  auto run_index = [&](std::size_t k) {
    records[k] = run_cell(source, cells[k / combos.size()], combos[k % combos.size()], options);
  };
  if (!options.parallel) {
    for (std::size_t k = 0; k < records.size(); ++k) run_index(k);
  } else {
    const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t k = t; k < records.size(); k += threads) run_index(k);
      });
    }
  }
  return records;
}

void write_csv(std::ostream& out, std::span<const BenchRecord> records) {
  out << kCsvHeader << '\n';
  char cov[32];
  for (const auto& r : records) {
    std::snprintf(cov, sizeof(cov), "%.4f", r.coverage_pct);
    out << r.sampler << ',' << r.querier << ',' << r.N << ',' << r.M << ',' << r.K << ',' << cov << ','
        << r.latency_ns << ',' << r.reps << ',' << r.seed << '\n';
  }
}

std::vector<BenchRecord> read_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != kCsvHeader) throw DataError("missing or wrong CSV header", 1);
  std::vector<BenchRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() != 9) throw DataError("expected 9 columns", lineno);
    try {
      BenchRecord r;
      r.sampler = cols[0];
      r.querier = cols[1];
      r.N = std::stoull(cols[2]);
      r.M = std::stoull(cols[3]);
      r.K = std::stoull(cols[4]);
      r.coverage_pct = std::stod(cols[5]);
      r.latency_ns = std::stoull(cols[6]);
      r.reps = std::stoull(cols[7]);
      r.seed = std::stoull(cols[8]);
      out.push_back(std::move(r));
    } catch (const std::exception&) {
      throw DataError("non-numeric field", lineno);
    }
  }
  return out;
}

void write_table_report(std::ostream& out, std::span<const BenchRecord> records) {
  std::vector<std::string> columns;
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> rows;  // N, K, M
  std::map<std::pair<std::tuple<std::size_t, std::size_t, std::size_t>, std::string>, const BenchRecord*> cell;
  for (const auto& r : records) {
    const std::string col = r.sampler + "+" + r.querier;
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    const auto row = std::make_tuple(r.N, r.K, r.M);
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
    cell[{row, col}] = &r;
  }
  auto section = [&](const char* title, auto&& value) {
    out << title << '\n';
    out << std::setw(7) << "N" << std::setw(7) << "K" << std::setw(7) << "M";
    for (const auto& c : columns) out << std::setw(13) << c;
    out << '\n';
    for (const auto& row : rows) {
      out << std::setw(7) << std::get<0>(row) << std::setw(7) << std::get<1>(row) << std::setw(7)
          << std::get<2>(row);
      for (const auto& c : columns) {
        const auto it = cell.find({row, c});
        out << std::setw(13);
        if (it == cell.end()) out << "-"; else out << value(*it->second);
      }
      out << '\n';
    }
  };
  out << std::fixed;
  section("Occupied space coverage (%)", [](const BenchRecord& r) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << r.coverage_pct;
    return s.str();
  });
  out << '\n';
  section("Latency (ms), median", [](const BenchRecord& r) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << static_cast<double>(r.latency_ns) / 1e6;
    return s.str();
  });
}

}  // namespace gridq
