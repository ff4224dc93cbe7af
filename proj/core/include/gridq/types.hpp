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

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gridq {

using Vec3 = std::array<double, 3>;

// Index of a point inside the cloud it was drawn from.
using PointIndex = std::uint32_t;

struct Point {
  Vec3 position{};
  // Number of raw points aggregated into this one; raw input starts at 1.
  double coverage_weight = 1.0;
  std::vector<double> features;
};

struct PointCloud {
  std::vector<Point> points;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  const Point& operator[](std::size_t i) const { return points[i]; }
  Point& operator[](std::size_t i) { return points[i]; }

  // Feature width shared by every point (0 when the cloud carries none).
  // Only meaningful for a cloud that passed validate_cloud().
  std::size_t feature_dim() const noexcept {
    return points.empty() ? 0 : points.front().features.size();
  }

  double total_weight() const noexcept;

  static PointCloud from_positions(const std::vector<Vec3>& positions);
};

// Integer voxel-grid coordinate. Negative coordinates are legal.
struct VoxelCoord {
  std::int32_t u = 0;
  std::int32_t v = 0;
  std::int32_t w = 0;

  friend constexpr auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;

  constexpr VoxelCoord offset(std::int32_t du, std::int32_t dv, std::int32_t dw) const {
    return {u + du, v + dv, w + dw};
  }
};

std::int32_t chebyshev_distance(const VoxelCoord& a, const VoxelCoord& b) noexcept;

struct VoxelCoordHash {
  std::size_t operator()(const VoxelCoord& c) const noexcept {
    // Large odd multipliers mix the three lanes; finalized splitmix-style.
    std::uint64_t h = static_cast<std::uint32_t>(c.u) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint32_t>(c.v) * 0xC2B2AE3D27D4EB4FULL;
    h ^= static_cast<std::uint32_t>(c.w) * 0x165667B19E3779F9ULL;
    h ^= h >> 31;
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 29;
    return static_cast<std::size_t>(h);
  }
};

enum class ShortGroupPolicy { repeat, reject };

// Which points survive when more than n_v fall in one voxel.
enum class RetentionPolicy { reservoir, first_come };

struct SamplingConfig {
  Vec3 voxel_size{1.0, 1.0, 1.0};
  std::size_t M = 1;
  std::size_t K = 1;
  // Per-voxel storage cap; 0 means "use K".
  std::size_t n_v = 0;
  // Neighborhood is the (2r+1)^3 voxel block around a center voxel.
  int neighborhood_radius = 1;
  double beta = 0.0;
  std::uint64_t seed = 0;
  ShortGroupPolicy short_group_policy = ShortGroupPolicy::repeat;
  RetentionPolicy retention = RetentionPolicy::reservoir;

  std::size_t storage_cap() const noexcept { return n_v == 0 ? K : n_v; }

  // Number of neighbor cells of a voxel, excluding the voxel itself.
  std::size_t lambda() const noexcept {
    const std::size_t side = 2 * static_cast<std::size_t>(neighborhood_radius) + 1;
    return side * side * side - 1;
  }

  // Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
};

enum class ViolationKind { non_finite_coordinate, weight_below_one, inconsistent_feature_dims };

struct Violation {
  std::size_t index = 0;
  ViolationKind kind{};
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

std::string to_string(ViolationKind kind);

// Reports every invariant violation in the cloud; never throws.
ValidationReport validate_cloud(const PointCloud& cloud);

// Throws std::invalid_argument carrying the first violations when the cloud is
// empty or invalid. Used as the entry check of structuring operations.
void require_valid(const PointCloud& cloud);

}  // namespace gridq
