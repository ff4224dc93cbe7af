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

#include "gridq/voxel_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "gridq/errors.hpp"

namespace gridq {

namespace {

std::int32_t floor_to_int(double value, double size) {
  const double q = std::floor(value / size);
  if (!(q >= static_cast<double>(std::numeric_limits<std::int32_t>::min()) &&
        q <= static_cast<double>(std::numeric_limits<std::int32_t>::max()))) {
    throw std::invalid_argument("coordinate out of voxel-grid range");
  }
  return static_cast<std::int32_t>(q);
}

template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n < 2 * static_cast<std::size_t>(threads)) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = std::min(n, t * chunk);
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo == hi) break;
    workers.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
}

}  // namespace

VoxelCoord quantize(const Vec3& position, const Vec3& voxel_size) {
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(position[a])) throw std::invalid_argument("quantize: non-finite position");
    if (!(voxel_size[a] > 0.0)) throw std::invalid_argument("quantize: voxel size must be > 0");
  }
  return {floor_to_int(position[0], voxel_size[0]), floor_to_int(position[1], voxel_size[1]),
          floor_to_int(position[2], voxel_size[2])};
}

Vec3 voxel_midpoint(const VoxelCoord& voxel, const Vec3& voxel_size) {
  return {(voxel.u + 0.5) * voxel_size[0], (voxel.v + 0.5) * voxel_size[1],
          (voxel.w + 0.5) * voxel_size[2]};
}

VoxelPointIndex VoxelPointIndex::build(const PointCloud& cloud, const SamplingConfig& config,
                                       Rng& rng, unsigned threads) {
  config.validate();
  if (cloud.size() > std::numeric_limits<PointIndex>::max()) {
    throw std::invalid_argument("cloud too large for 32-bit point indices");
  }
  const std::size_t n = cloud.size();
  const std::size_t cap = config.storage_cap();
  const std::uint64_t salt = rng.next_u64();

  VoxelPointIndex index;
  index.config_ = config;
  index.cloud_size_ = n;

  std::vector<VoxelCoord> coords(n);
  parallel_chunks(n, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) coords[i] = quantize(cloud.points[i].position, config.voxel_size);
  });

  // First-visit numbering; sequential so it matches the arrival order.
  std::vector<std::uint32_t> point_ordinal(n);
  index.lookup_.reserve(n / 2 + 1);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = index.lookup_.try_emplace(coords[i], index.occupied_.size());
    if (inserted) {
      index.occupied_.push_back(coords[i]);
      index.totals_.push_back(0);
    }
    point_ordinal[i] = static_cast<std::uint32_t>(it->second);
    ++index.totals_[it->second];
  }

  // Counting sort of point indices by voxel; each run is ascending by index.
  const std::size_t voxels = index.occupied_.size();
  std::vector<std::size_t> start(voxels + 1, 0);
  for (std::size_t v = 0; v < voxels; ++v) start[v + 1] = start[v] + index.totals_[v];
  std::vector<PointIndex> sorted(n);
  {
    std::vector<std::size_t> cursor(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) sorted[cursor[point_ordinal[i]]++] = static_cast<PointIndex>(i);
  }

  index.offsets_.assign(voxels + 1, 0);
  index.stored_.reserve(std::min(n, voxels * cap));
  std::vector<std::pair<std::uint64_t, PointIndex>> keyed;
  for (std::size_t v = 0; v < voxels; ++v) {
    const auto first = sorted.begin() + static_cast<std::ptrdiff_t>(start[v]);
    const auto last = sorted.begin() + static_cast<std::ptrdiff_t>(start[v + 1]);
    const std::size_t count = start[v + 1] - start[v];
    if (count <= cap) {
      index.stored_.insert(index.stored_.end(), first, last);
    } else if (config.retention == RetentionPolicy::first_come) {
      index.stored_.insert(index.stored_.end(), first, first + static_cast<std::ptrdiff_t>(cap));
    } else {
      // Bottom-k by random priority is a uniform k-subset of the arrivals.
      keyed.clear();
      for (auto it = first; it != last; ++it) keyed.emplace_back(splitmix64(salt ^ splitmix64(*it)), *it);
      std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(cap - 1), keyed.end());
      const std::size_t base = index.stored_.size();
      for (std::size_t k = 0; k < cap; ++k) index.stored_.push_back(keyed[k].second);
      std::sort(index.stored_.begin() + static_cast<std::ptrdiff_t>(base), index.stored_.end());
    }
    index.offsets_[v + 1] = index.stored_.size();
  }
  return index;
}

std::optional<std::size_t> VoxelPointIndex::ordinal(const VoxelCoord& v) const {
  const auto it = lookup_.find(v);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::span<const PointIndex> VoxelPointIndex::bucket_at(std::size_t ord) const {
  return std::span<const PointIndex>(stored_).subspan(offsets_[ord], offsets_[ord + 1] - offsets_[ord]);
}

std::span<const PointIndex> VoxelPointIndex::bucket(const VoxelCoord& v) const {
  const auto ord = ordinal(v);
  if (!ord) return {};
  return bucket_at(*ord);
}

std::size_t VoxelPointIndex::total(const VoxelCoord& v) const {
  const auto ord = ordinal(v);
  return ord ? totals_[*ord] : 0;
}

void VoxelPointIndex::shell_points(const VoxelCoord& center, int shell,
                                   std::vector<PointIndex>& out) const {
  for (int du = -shell; du <= shell; ++du) {
    for (int dv = -shell; dv <= shell; ++dv) {
      const bool on_face = std::abs(du) == shell || std::abs(dv) == shell;
      // Interior rows only touch the shell at dw = +-shell.
      const int step = (on_face || shell == 0) ? 1 : 2 * shell;
      for (int dw = -shell; dw <= shell; dw += step) {
        const auto it = lookup_.find(center.offset(du, dv, dw));
        if (it == lookup_.end()) continue;
        const auto b = bucket_at(it->second);
        out.insert(out.end(), b.begin(), b.end());
      }
    }
  }
}

void VoxelPointIndex::neighbor_ordinals(const VoxelCoord& center, int radius,
                                        std::vector<std::size_t>& out) const {
  out.clear();
  for (int du = -radius; du <= radius; ++du) {
    for (int dv = -radius; dv <= radius; ++dv) {
      for (int dw = -radius; dw <= radius; ++dw) {
        const auto it = lookup_.find(center.offset(du, dv, dw));
        if (it != lookup_.end()) out.push_back(it->second);
      }
    }
  }
}

Neighborhood VoxelPointIndex::neighborhood(const VoxelCoord& center, int radius) const {
  if (!contains(center)) throw InvariantError("neighborhood: center voxel is not occupied");
  if (radius < 0) throw std::invalid_argument("neighborhood: radius must be >= 0");
  Neighborhood hood;
  hood.center = center;
  std::vector<std::size_t> ords;
  neighbor_ordinals(center, radius, ords);
  for (auto ord : ords) {
    hood.occupied_neighbors.push_back(occupied_[ord]);
    const auto b = bucket_at(ord);
    hood.context_point_indices.insert(hood.context_point_indices.end(), b.begin(), b.end());
  }
  return hood;
}

std::vector<std::vector<PointIndex>> VoxelPointIndex::neighborhood_layers(const VoxelCoord& center,
                                                                          int radius) const {
  if (!contains(center)) throw InvariantError("neighborhood_layers: center voxel is not occupied");
  if (radius < 0) throw std::invalid_argument("neighborhood_layers: radius must be >= 0");
  std::vector<std::vector<PointIndex>> layers(static_cast<std::size_t>(radius) + 1);
  for (int shell = 0; shell <= radius; ++shell) shell_points(center, shell, layers[static_cast<std::size_t>(shell)]);
  return layers;
}

}  // namespace gridq
