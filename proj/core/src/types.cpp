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

#include "gridq/types.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace gridq {

double PointCloud::total_weight() const noexcept {
  double total = 0.0;
  for (const auto& p : points) total += p.coverage_weight;
  return total;
}

PointCloud PointCloud::from_positions(const std::vector<Vec3>& positions) {
  PointCloud cloud;
  cloud.points.reserve(positions.size());
  for (const auto& pos : positions) cloud.points.push_back(Point{pos, 1.0, {}});
  return cloud;
}

std::int32_t chebyshev_distance(const VoxelCoord& a, const VoxelCoord& b) noexcept {
  const auto du = std::abs(a.u - b.u);
  const auto dv = std::abs(a.v - b.v);
  const auto dw = std::abs(a.w - b.w);
  return std::max(du, std::max(dv, dw));
}

void SamplingConfig::validate() const {
  for (double s : voxel_size) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("voxel size components must be positive and finite");
    }
  }
  if (M < 1) throw std::invalid_argument("M must be >= 1");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (neighborhood_radius < 0) throw std::invalid_argument("neighborhood radius must be >= 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::non_finite_coordinate:
      return "non-finite";
    case ViolationKind::weight_below_one:
      return "weight-below-one";
    case ViolationKind::inconsistent_feature_dims:
      return "inconsistent-feature-dims";
  }
  return "unknown";
}

ValidationReport validate_cloud(const PointCloud& cloud) {
  ValidationReport report;
  const std::size_t dim = cloud.empty() ? 0 : cloud.points.front().features.size();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    for (int axis = 0; axis < 3; ++axis) {
      if (!std::isfinite(p.position[axis])) {
        report.violations.push_back({i, ViolationKind::non_finite_coordinate,
                                     "coordinate " + std::to_string(axis) + " is not finite"});
        break;
      }
    }
    // NaN weights fail this comparison too.
    if (!(p.coverage_weight >= 1.0)) {
      report.violations.push_back({i, ViolationKind::weight_below_one, "coverage weight < 1"});
    }
    if (p.features.size() != dim) {
      report.violations.push_back(
          {i, ViolationKind::inconsistent_feature_dims,
           "feature dim " + std::to_string(p.features.size()) + " != " + std::to_string(dim)});
    }
  }
  return report;
}

void require_valid(const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("point cloud is empty");
  const auto report = validate_cloud(cloud);
  if (report.ok()) return;
  std::ostringstream msg;
  msg << report.violations.size() << " invalid point(s)";
  const auto& first = report.violations.front();
  msg << "; first at index " << first.index << " (" << to_string(first.kind) << ")";
  throw std::invalid_argument(msg.str());
}

}  // namespace gridq
