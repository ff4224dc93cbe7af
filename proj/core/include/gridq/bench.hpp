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

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridq/center_sampling.hpp"
#include "gridq/grouping.hpp"
#include "gridq/synth.hpp"

namespace gridq {

struct BenchRecord {
  std::string sampler;
  std::string querier;
  std::size_t N = 0;
  std::size_t M = 0;
  std::size_t K = 0;
  double coverage_pct = 0.0;   // mean over reps
  std::uint64_t latency_ns = 0;  // median over reps
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  // Latency attribution (not part of the CSV schema).
  bool includes_index_build = false;
  bool includes_full_scan = false;
  bool contention_tainted = false;
};

struct Combo {
  Sampler sampler = Sampler::cas;
  Querier querier = Querier::cube;
  std::string name() const;
};

// "sampler+querier", e.g. "cas+cube", "rps+ball", "rvs+gknn".
std::optional<Combo> parse_combo(std::string_view text);

struct GridCell {
  std::size_t N = 0;
  std::size_t M = 0;
  std::size_t K = 0;
};

// The twelve (N, K, M) conditions of the reference comparison, in row order.
std::vector<GridCell> table2_grid();
// RPS/FPS with ball and k-NN, RVS/CAS with cube and grid k-NN.
std::vector<Combo> table2_combos();

// Where each cell's N points come from: generated per cell, or a uniform
// subsample of a fixed pool (error when the pool is smaller than N).
struct CloudSource {
  GenSpec generator;
  std::shared_ptr<const PointCloud> pool;

  PointCloud make(std::size_t N, std::uint64_t seed) const;
};

struct SweepOptions {
  std::size_t reps = 5;
  std::size_t warmups = 2;
  std::uint64_t seed = 0;
  // Fixed voxel size, or (when unset) a cubic edge chosen per cloud so that
  // occupied voxels hold about `points_per_voxel` points on average.
  std::optional<Vec3> voxel_size;
  double points_per_voxel = 2.0;
  int neighborhood_radius = 1;
  BallRadiusPreset ball_preset = BallRadiusPreset::half_diagonal;
  // Run cells concurrently; latencies are then flagged contention_tainted.
  bool parallel = false;
};

// Runs every combo on every cell. Unsatisfiable cells (M or K zero, N == 0,
// pool too small) are skipped with a warning.
std::vector<BenchRecord> run_sweep(const CloudSource& source, std::span<const GridCell> grid,
                                   std::span<const Combo> combos, const SweepOptions& options,
                                   std::vector<std::string>* warnings = nullptr);

inline constexpr std::string_view kCsvHeader = "sampler,querier,N,M,K,coverage_pct,latency_ns,reps,seed";

void write_csv(std::ostream& out, std::span<const BenchRecord> records);
// Throws DataError on a malformed file.
std::vector<BenchRecord> read_csv(std::istream& in);

// Two-section aligned report: coverage block then latency block, one row per
// (N, K, M) and one column per combo.
void write_table_report(std::ostream& out, std::span<const BenchRecord> records);

}  // namespace gridq
