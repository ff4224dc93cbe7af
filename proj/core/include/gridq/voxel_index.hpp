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
#include <unordered_map>
#include <vector>

#include "gridq/rng.hpp"
#include "gridq/types.hpp"

namespace gridq {

// Componentwise floor(position / voxel_size). Throws std::invalid_argument on
// non-finite input or when the result does not fit a 32-bit voxel coordinate.
VoxelCoord quantize(const Vec3& position, const Vec3& voxel_size);

// Geometric midpoint of a voxel cell in world units.
Vec3 voxel_midpoint(const VoxelCoord& voxel, const Vec3& voxel_size);

struct Neighborhood {
  VoxelCoord center;
  // Occupied voxels of the (2r+1)^3 block, lexicographic in (du, dv, dw).
  std::vector<VoxelCoord> occupied_neighbors;
  // Stored points of those voxels, concatenated in the same order.
  std::vector<PointIndex> context_point_indices;
};

// Voxel-point index: a hash map from occupied voxel to at most n_v stored
// point indices, plus the per-voxel arrival count.
//
// Occupied voxels are numbered by first visit during the build ("ordinals");
// buckets hold point indices in ascending order. An index is immutable once
// built and may be read concurrently.
class VoxelPointIndex {
 public:
  // One pass over the cloud. Under RetentionPolicy::reservoir the n_v points
  // kept per voxel are a uniform sample of that voxel's arrivals, decided by
  // per-point random priorities drawn from `rng`; the result is identical for
  // any `threads` value.
  static VoxelPointIndex build(const PointCloud& cloud, const SamplingConfig& config, Rng& rng,
                               unsigned threads = 1);

  const SamplingConfig& config() const noexcept { return config_; }
  std::size_t cloud_size() const noexcept { return cloud_size_; }

  std::span<const VoxelCoord> occupied() const noexcept { return occupied_; }
  std::size_t occupied_count() const noexcept { return occupied_.size(); }

  bool contains(const VoxelCoord& v) const { return lookup_.contains(v); }
  std::optional<std::size_t> ordinal(const VoxelCoord& v) const;

  // Empty span when v is not occupied.
  std::span<const PointIndex> bucket(const VoxelCoord& v) const;
  std::span<const PointIndex> bucket_at(std::size_t ordinal) const;

  // Points that fell in v, including those dropped by the cap.
  std::size_t total(const VoxelCoord& v) const;
  std::size_t total_at(std::size_t ordinal) const { return totals_[ordinal]; }

  std::size_t stored_count() const noexcept { return stored_.size(); }

  // Throws InvariantError when center is not occupied.
  Neighborhood neighborhood(const VoxelCoord& center, int radius) const;

  // Stored points grouped by Chebyshev shell 0..radius around center.
  std::vector<std::vector<PointIndex>> neighborhood_layers(const VoxelCoord& center,
                                                           int radius) const;

  // Appends the stored points of occupied voxels at exactly Chebyshev
  // distance `shell` from center, in lexicographic offset order.
  void shell_points(const VoxelCoord& center, int shell, std::vector<PointIndex>& out) const;

  // Ordinals of occupied voxels within Chebyshev `radius` of center, in
  // lexicographic offset order. Center itself need not be occupied.
  void neighbor_ordinals(const VoxelCoord& center, int radius, std::vector<std::size_t>& out) const;

 private:
  SamplingConfig config_;
  std::size_t cloud_size_ = 0;
  std::vector<VoxelCoord> occupied_;
  // CSR layout: bucket of ordinal i is stored_[offsets_[i] .. offsets_[i+1]).
  std::vector<std::size_t> offsets_;
  std::vector<PointIndex> stored_;
  std::vector<std::size_t> totals_;
  std::unordered_map<VoxelCoord, std::size_t, VoxelCoordHash> lookup_;
};

}  // namespace gridq
