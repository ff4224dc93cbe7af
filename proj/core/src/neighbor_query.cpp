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

#include "gridq/neighbor_query.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "gridq/errors.hpp"

namespace gridq {

namespace {

double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

using Keyed = std::pair<double, PointIndex>;

// Moves the `take` smallest (distance, index) pairs to the front, sorted.
void select_nearest(std::vector<Keyed>& keyed, std::size_t take) {
  if (take < keyed.size()) {
    std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(take), keyed.end());
    keyed.resize(take);
  }
  std::sort(keyed.begin(), keyed.end());
}

QueryResult uniform_subset(std::vector<PointIndex> candidates, std::size_t K, Rng& rng,
                           ShortGroupPolicy policy) {
  QueryResult result;
  const std::size_t n = candidates.size();
  const std::size_t take = std::min(K, n);
  for (std::size_t i = 0; i < take && i + 1 < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform(n - i));
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(take);
  result.nodes = std::move(candidates);
  apply_short_group_policy(result, K, policy);
  return result;
}

}  // namespace

void apply_short_group_policy(QueryResult& result, std::size_t K, ShortGroupPolicy policy) {
  const std::size_t have = result.nodes.size();
  if (have >= K) return;
  result.truncated = true;
  if (policy != ShortGroupPolicy::repeat || have == 0) return;
  result.nodes.reserve(K);
  for (std::size_t i = have; i < K; ++i) result.nodes.push_back(result.nodes[i % have]);
  result.padded = true;
}

QueryResult ball_query(const PointCloud& cloud, const Vec3& center, double radius, std::size_t K,
                       Rng& rng, ShortGroupPolicy policy) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_query: radius must be > 0");
  if (K < 1) throw std::invalid_argument("ball_query: K must be >= 1");
  const double r2 = radius * radius;
  std::vector<PointIndex> in_range;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (squared_distance(cloud.points[i].position, center) <= r2) {
      in_range.push_back(static_cast<PointIndex>(i));
    }
  }
  return uniform_subset(std::move(in_range), K, rng, policy);
}

QueryResult cube_query(const Neighborhood& neighborhood, std::size_t K, Rng& rng,
                       ShortGroupPolicy policy) {
  if (K < 1) throw std::invalid_argument("cube_query: K must be >= 1");
  if (neighborhood.context_point_indices.empty()) {
    throw InvariantError("cube_query: empty context");
  }
  return uniform_subset(neighborhood.context_point_indices, K, rng, policy);
}

QueryResult knn_bruteforce(const PointCloud& cloud, const Vec3& center, std::size_t K) {
  if (K < 1) throw std::invalid_argument("knn_bruteforce: K must be >= 1");
  std::vector<Keyed> keyed;
  keyed.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    keyed.emplace_back(squared_distance(cloud.points[i].position, center), static_cast<PointIndex>(i));
  }
  select_nearest(keyed, K);
  QueryResult result;
  result.nodes.reserve(keyed.size());
  for (const auto& [d, i] : keyed) result.nodes.push_back(i);
  result.truncated = result.nodes.size() < K;
  return result;
}

QueryResult knn_layered(const VoxelPointIndex& index, const PointCloud& cloud,
                        const VoxelCoord& center_voxel, const Vec3& center, std::size_t K,
                        int radius, KnnMode mode, KnnStats* stats) {
  if (K < 1) throw std::invalid_argument("knn_layered: K must be >= 1");
  if (radius < 0) throw std::invalid_argument("knn_layered: radius must be >= 0");
  if (!index.contains(center_voxel)) throw InvariantError("knn_layered: center voxel is not occupied");

  QueryResult result;
  std::vector<PointIndex> shell;
  std::vector<Keyed> keyed;
  KnnStats local;

  if (mode == KnnMode::strict) {
    for (int level = 0; level <= radius; ++level) {
      index.shell_points(center_voxel, level, shell);
      ++local.shells_inspected;
    }
    for (auto i : shell) keyed.emplace_back(squared_distance(cloud.points[i].position, center), i);
    local.candidates_examined = keyed.size();
    select_nearest(keyed, K);
    for (const auto& [d, i] : keyed) result.nodes.push_back(i);
  } else {
    std::size_t counter = 0;
    for (int level = 0; level <= radius && counter < K; ++level) {
      shell.clear();
      index.shell_points(center_voxel, level, shell);
      ++local.shells_inspected;
      local.candidates_examined += shell.size();
      const std::size_t quota = K - counter;
      if (shell.size() <= quota) {
        // Whole shell fits; no ordering needed.
        result.nodes.insert(result.nodes.end(), shell.begin(), shell.end());
        counter += shell.size();
      } else {
        keyed.clear();
        for (auto i : shell) keyed.emplace_back(squared_distance(cloud.points[i].position, center), i);
        select_nearest(keyed, quota);
        for (const auto& [d, i] : keyed) result.nodes.push_back(i);
        counter += quota;
      }
    }
  }
  result.truncated = result.nodes.size() < K;
  if (stats) *stats = local;
  return result;
}

}  // namespace gridq
