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

#include "gridq/grouping.hpp"
#include "gridq/types.hpp"

namespace gridq {

// 100 * |voxels touched by any node of any group| / |occupied voxels of the
// original cloud|. Node indices must refer to `original`.
double occupied_space_coverage(const PointCloud& original, std::span<const PointGroup> groups,
                               const Vec3& voxel_size);

inline double occupied_space_coverage(const PointCloud& original, const GroupingOutput& output,
                                      const Vec3& voxel_size) {
  return occupied_space_coverage(original, output.groups, voxel_size);
}

std::size_t count_occupied_voxels(const PointCloud& cloud, const Vec3& voxel_size);

// Cubic voxel edge for which the cloud averages about `points_per_voxel`
// points per occupied voxel (log-space bisection).
double suggest_voxel_edge(const PointCloud& cloud, double points_per_voxel);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  // 95% confidence interval on the slope.
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t samples = 0;
};

// OLS of log(latency) on log(axis). Requires >= 4 distinct positive axis values
// spanning >= 16x and positive latencies; throws std::invalid_argument
// otherwise.
ScalingFit scaling_fit(std::span<const double> axis, std::span<const double> latency);

// One-sided Welch t-test p-value for H1: mean(a) > mean(b).
double welch_p_greater(std::span<const double> a, std::span<const double> b);

}  // namespace gridq
