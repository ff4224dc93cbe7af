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
#include <span>
#include <vector>

#include "gridq/rng.hpp"
#include "gridq/types.hpp"
#include "gridq/voxel_index.hpp"

namespace gridq {

struct QueryResult {
  std::vector<PointIndex> nodes;
  // Fewer than K candidates existed.
  bool truncated = false;
  // Repeat padding brought the node list up to K.
  bool padded = false;
};

// Marks a short result as truncated and, under the repeat policy, cycles the
// existing nodes until the list holds K entries.
void apply_short_group_policy(QueryResult& result, std::size_t K, ShortGroupPolicy policy);

// Uniform K-subset of the points within `radius` (inclusive) of center. Scans
// the whole cloud.
QueryResult ball_query(const PointCloud& cloud, const Vec3& center, double radius, std::size_t K,
                       Rng& rng, ShortGroupPolicy policy = ShortGroupPolicy::repeat);

// Uniform K-subset of the neighborhood's context points.
QueryResult cube_query(const Neighborhood& neighborhood, std::size_t K, Rng& rng,
                       ShortGroupPolicy policy = ShortGroupPolicy::repeat);

// Exact K nearest points of the whole cloud, ties to the lower index. Nodes are
// ordered by (distance, index).
QueryResult knn_bruteforce(const PointCloud& cloud, const Vec3& center, std::size_t K);

enum class KnnMode {
  // Shell-by-shell with early stop once K points are collected.
  layered,
  // Gathers every shell, then selects the exact K nearest context points.
  strict,
};

struct KnnStats {
  std::size_t shells_inspected = 0;
  std::size_t candidates_examined = 0;
};

// k-NN restricted to the context points of center_voxel's neighborhood of the
// given radius. Never pads; sets `truncated` when the context holds < K points.
QueryResult knn_layered(const VoxelPointIndex& index, const PointCloud& cloud,
                        const VoxelCoord& center_voxel, const Vec3& center, std::size_t K,
                        int radius, KnnMode mode = KnnMode::layered, KnnStats* stats = nullptr);

}  // namespace gridq
