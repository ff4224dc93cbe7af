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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gridq/rng.hpp"
#include "gridq/types.hpp"
#include "gridq/voxel_index.hpp"

namespace gridq {

enum class Sampler { rps, fps, rvs, cas, naive_grid };

std::string_view to_string(Sampler s);
std::optional<Sampler> parse_sampler(std::string_view name);

// RVS, CAS and naive grid pick voxels; RPS and FPS pick points.
constexpr bool is_voxel_sampler(Sampler s) {
  return s == Sampler::rvs || s == Sampler::cas || s == Sampler::naive_grid;
}

struct CenterSelection {
  Sampler method = Sampler::rvs;
  std::vector<VoxelCoord> voxels;  // voxel samplers
  std::vector<PointIndex> points;  // point samplers
  std::size_t requested = 0;

  std::size_t effective() const noexcept {
    return is_voxel_sampler(method) ? voxels.size() : points.size();
  }
};

// Per-voxel count C_V of the selected centers whose neighborhood covers V,
// kept over the occupied voxels of one index.
class CoverageState {
 public:
  CoverageState(const VoxelPointIndex& index, int radius);

  void add(const VoxelCoord& center);
  void remove(const VoxelCoord& center);

  std::uint32_t count(const VoxelCoord& v) const;
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }
  std::size_t covered_count() const noexcept { return covered_; }

  // Coverage gain of adding `challenger`: sum over its occupied neighborhood of
  // delta(C_V) - beta * C_V / lambda.
  double gain(const VoxelCoord& challenger, double beta) const;
  // Coverage loss of removing `incumbent`: occupied neighbors with C_V == 1.
  double loss(const VoxelCoord& incumbent) const;

  static CoverageState recount(const VoxelPointIndex& index, int radius,
                               std::span<const VoxelCoord> centers);

  friend bool operator==(const CoverageState& a, const CoverageState& b) {
    return a.covered_ == b.covered_ && a.counts_ == b.counts_;
  }

 private:
  const VoxelPointIndex* index_;
  int radius_;
  double lambda_;
  std::vector<std::uint32_t> counts_;  // by occupied ordinal
  std::size_t covered_ = 0;
  mutable std::vector<std::size_t> scratch_;
};

struct CasTrace {
  struct Swap {
    VoxelCoord challenger;
    VoxelCoord incumbent;
    double h_add = 0.0;
    double h_rmv = 0.0;
    std::size_t covered_before = 0;
    std::size_t covered_after = 0;
  };
  std::size_t initial_covered = 0;
  std::size_t final_covered = 0;
  std::size_t challenges = 0;
  std::vector<Swap> swaps;
  // Incrementally maintained counts at completion, by occupied ordinal.
  std::vector<std::uint32_t> final_counts;
};

struct FpsTrace {
  // Min-distance of each selected point to the earlier selections at the time
  // it was picked; the seed point records +inf.
  std::vector<double> selection_distances;
};

// Uniform M-subset of the cloud's points (all of them when M >= N).
CenterSelection rps(const PointCloud& cloud, std::size_t M, Rng& rng);

// Exact farthest point sampling, O(N*M). The seed point comes from rng; ties
// go to the lowest index.
CenterSelection fps(const PointCloud& cloud, std::size_t M, Rng& rng, FpsTrace* trace = nullptr);
CenterSelection fps_from(const PointCloud& cloud, std::size_t M, PointIndex start,
                         FpsTrace* trace = nullptr);

// Uniform M-subset of the occupied voxels.
CenterSelection rvs(const VoxelPointIndex& index, std::size_t M, Rng& rng);

// Coverage-aware sampling: RVS initialization followed by one pass of
// challenger/incumbent swaps over the remaining occupied voxels in shuffled
// order. Neighborhoods use the index's configured radius.
CenterSelection cas(const VoxelPointIndex& index, std::size_t M, double beta, Rng& rng,
                    CasTrace* trace = nullptr);

// As cas(), starting from the given incumbents instead of an RVS draw.
CenterSelection cas_from(const VoxelPointIndex& index, std::vector<VoxelCoord> incumbents,
                         double beta, Rng& rng, CasTrace* trace = nullptr);

// RVS tagged so that node querying stays inside the center voxel.
CenterSelection naive_grid(const VoxelPointIndex& index, std::size_t M, Rng& rng);

}  // namespace gridq
