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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridq/center_sampling.hpp"
#include "gridq/neighbor_query.hpp"
#include "gridq/rng.hpp"
#include "gridq/types.hpp"

namespace gridq {

enum class Querier {
  ball,             // radius search over the whole cloud
  knn,              // exact k-NN over the whole cloud
  cube,             // uniform pick from neighborhood context points
  grid_knn,         // shell-wise k-NN over context points
  grid_knn_strict,  // exact k-NN over context points
};

std::string_view to_string(Querier q);
std::optional<Querier> parse_querier(std::string_view name);

constexpr bool is_voxel_querier(Querier q) {
  return q == Querier::cube || q == Querier::grid_knn || q == Querier::grid_knn_strict;
}

enum class BallRadiusPreset {
  // Half the voxel diagonal.
  half_diagonal,
  // Ball volume equal to one voxel.
  volume_matched,
};

double ball_radius(const SamplingConfig& config, BallRadiusPreset preset);

struct GroupingOptions {
  Sampler sampler = Sampler::cas;
  Querier querier = Querier::cube;
  BallRadiusPreset ball_preset = BallRadiusPreset::half_diagonal;
  // Overrides the preset when set.
  std::optional<double> ball_radius;
  // Point samplers only: keep the sampled point as the group center position
  // instead of the weighted barycenter of the nodes.
  bool keep_sampled_center = false;
  // Worker threads for per-center querying; output does not depend on it.
  unsigned threads = 1;
};

struct PointGroup {
  // Absent for point-centered samplers.
  std::optional<VoxelCoord> center_voxel;
  QueryResult nodes;
  Vec3 center_position{};
  double center_weight = 0.0;
};

struct GroupingOutput {
  std::vector<PointGroup> groups;
  // Group centers as the next level's input (positions + weights, no features).
  PointCloud downsampled_cloud;
  std::size_t requested = 0;
  // Centers actually selected; groups.size() + rejected == effective.
  std::size_t effective = 0;
  std::size_t rejected = 0;
  std::vector<std::string> warnings;
  // Instrumentation for latency attribution.
  bool built_index = false;
  bool scanned_full_cloud = false;
};

struct GroupCenter {
  Vec3 position{};
  double weight = 0.0;
};

// w_c = sum of node weights; position = node positions averaged with those
// weights. Repeated nodes count once per occurrence.
GroupCenter synthesize_center(const PointCloud& cloud, std::span<const PointIndex> nodes);

// Index build, center sampling, node querying and center synthesis for one
// level. Deterministic for a fixed rng seed regardless of options.threads.
GroupingOutput cagq(const PointCloud& cloud, const SamplingConfig& config,
                    const GroupingOptions& options, Rng& rng);

// Repeated downsampling: each level consumes the previous level's
// downsampled_cloud. Requires strictly decreasing M.
std::vector<GroupingOutput> chain(const PointCloud& cloud, std::span<const SamplingConfig> configs,
                                  const GroupingOptions& options, Rng& rng);

// Line format, one group per line: "cx cy cz w k idx1 ... idxk".
void write_groups(std::ostream& out, const GroupingOutput& output);
std::vector<PointGroup> read_groups(std::istream& in);

}  // namespace gridq
