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

#include "gridq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "gridq/voxel_index.hpp"

namespace gridq {

namespace {

double mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs, double m) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace

std::size_t count_occupied_voxels(const PointCloud& cloud, const Vec3& voxel_size) {
  std::unordered_set<VoxelCoord, VoxelCoordHash> seen;
  seen.reserve(cloud.size());
  for (const auto& p : cloud.points) seen.insert(quantize(p.position, voxel_size));
  return seen.size();
}

double occupied_space_coverage(const PointCloud& original, std::span<const PointGroup> groups,
                               const Vec3& voxel_size) {
  if (original.empty()) throw std::invalid_argument("occupied_space_coverage: empty original cloud");
  std::unordered_set<VoxelCoord, VoxelCoordHash> touched;
  for (const auto& g : groups) {
    for (auto i : g.nodes.nodes) {
      if (i >= original.size()) throw std::invalid_argument("occupied_space_coverage: node index out of range");
      touched.insert(quantize(original.points[i].position, voxel_size));
    }
  }
  const auto occupied = count_occupied_voxels(original, voxel_size);
  return 100.0 * static_cast<double>(touched.size()) / static_cast<double>(occupied);
}

double suggest_voxel_edge(const PointCloud& cloud, double points_per_voxel) {
  if (cloud.empty()) throw std::invalid_argument("suggest_voxel_edge: empty cloud");
  if (!(points_per_voxel >= 1.0)) throw std::invalid_argument("suggest_voxel_edge: target must be >= 1");
  Vec3 lo = cloud.points.front().position;
  Vec3 hi = lo;
  for (const auto& p : cloud.points) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p.position[a]);
      hi[a] = std::max(hi[a], p.position[a]);
    }
  }
  const double diag = std::max(std::hypot(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]), 1e-9);
  const double n = static_cast<double>(cloud.size());
  // Density grows with the edge; bisect log(edge).
  double a = std::log(diag * 1e-6);
  double b = std::log(diag * 2.0);
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (a + b);
    const double e = std::exp(mid);
    const double ppv = n / static_cast<double>(count_occupied_voxels(cloud, {e, e, e}));
    if (ppv < points_per_voxel) a = mid; else b = mid;
  }
  return std::exp(b);
}

ScalingFit scaling_fit(std::span<const double> axis, std::span<const double> latency) {
  if (axis.size() != latency.size()) throw std::invalid_argument("scaling_fit: size mismatch");
  std::vector<double> distinct(axis.begin(), axis.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 4) throw std::invalid_argument("scaling_fit: need >= 4 distinct axis values");
  if (!(distinct.front() > 0.0)) throw std::invalid_argument("scaling_fit: axis values must be > 0");
  if (distinct.back() / distinct.front() < 16.0) throw std::invalid_argument("scaling_fit: axis span < 16x");

  const std::size_t n = axis.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(latency[i] > 0.0)) throw std::invalid_argument("scaling_fit: latencies must be > 0");
    x[i] = std::log(axis[i]);
    y[i] = std::log(latency[i]);
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  ScalingFit fit;
  fit.samples = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  const double dof = static_cast<double>(n) - 2.0;
  fit.stderr_slope = std::sqrt(sse / dof / sxx);
  const boost::math::students_t dist(dof);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  fit.ci_low = fit.slope - t * fit.stderr_slope;
  fit.ci_high = fit.slope + t * fit.stderr_slope;
  return fit;
}

double welch_p_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_p_greater: need >= 2 samples each");
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a, ma) / static_cast<double>(a.size());
  const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
  const double se2 = va + vb;
  if (se2 == 0.0) return ma > mb ? 0.0 : 1.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double dof = se2 * se2 /
                     (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(dof);
  return boost::math::cdf(boost::math::complement(dist, t));
}

}  // namespace gridq
