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

#include "gridq/center_sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gridq {

namespace {

// Partial Fisher-Yates: the first k entries become a uniform k-subset.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t k, Rng& rng) {
  const std::size_t n = items.size();
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform(n - i));
    std::swap(items[i], items[j]);
  }
}

double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::string_view to_string(Sampler s) {
  switch (s) {
    case Sampler::rps: return "rps";
    case Sampler::fps: return "fps";
    case Sampler::rvs: return "rvs";
    case Sampler::cas: return "cas";
    case Sampler::naive_grid: return "naive";
  }
  return "?";
}

std::optional<Sampler> parse_sampler(std::string_view name) {
  if (name == "rps") return Sampler::rps;
  if (name == "fps") return Sampler::fps;
  if (name == "rvs") return Sampler::rvs;
  if (name == "cas") return Sampler::cas;
  if (name == "naive" || name == "naive_grid" || name == "grid") return Sampler::naive_grid;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

CoverageState::CoverageState(const VoxelPointIndex& index, int radius)
    : index_(&index),
      radius_(radius),
      counts_(index.occupied_count(), 0) {
  const double side = 2.0 * radius + 1.0;
  // r = 0 has no neighbor cells; the over-coverage term then divides by 1.
  lambda_ = std::max(1.0, side * side * side - 1.0);
}

void CoverageState::add(const VoxelCoord& center) {
  index_->neighbor_ordinals(center, radius_, scratch_);
  for (auto ord : scratch_) {
    if (counts_[ord]++ == 0) ++covered_;
  }
}

void CoverageState::remove(const VoxelCoord& center) {
  index_->neighbor_ordinals(center, radius_, scratch_);
  for (auto ord : scratch_) {
    if (counts_[ord] == 0) throw std::logic_error("CoverageState::remove: center was never added");
    if (--counts_[ord] == 0) --covered_;
  }
}

std::uint32_t CoverageState::count(const VoxelCoord& v) const {
  const auto ord = index_->ordinal(v);
  return ord ? counts_[*ord] : 0;
}

double CoverageState::gain(const VoxelCoord& challenger, double beta) const {
  index_->neighbor_ordinals(challenger, radius_, scratch_);
  double h = 0.0;
  for (auto ord : scratch_) {
    const auto c = counts_[ord];
    h += (c == 0 ? 1.0 : 0.0) - beta * static_cast<double>(c) / lambda_;
  }
  return h;
}

double CoverageState::loss(const VoxelCoord& incumbent) const {
  index_->neighbor_ordinals(incumbent, radius_, scratch_);
  double h = 0.0;
  for (auto ord : scratch_) h += counts_[ord] == 1 ? 1.0 : 0.0;
  return h;
}

CoverageState CoverageState::recount(const VoxelPointIndex& index, int radius,
                                     std::span<const VoxelCoord> centers) {
  CoverageState state(index, radius);
  for (const auto& c : centers) state.add(c);
  return state;
}

// ---------------------------------------------------------------------------

CenterSelection rps(const PointCloud& cloud, std::size_t M, Rng& rng) {
  if (cloud.empty()) throw std::invalid_argument("rps: empty cloud");
  if (M < 1) throw std::invalid_argument("rps: M must be >= 1");
  CenterSelection sel{Sampler::rps, {}, {}, M};
  const std::size_t take = std::min(M, cloud.size());
  std::vector<PointIndex> pool(cloud.size());
  std::iota(pool.begin(), pool.end(), PointIndex{0});
  partial_shuffle(pool, take, rng);
  pool.resize(take);
  sel.points = std::move(pool);
  return sel;
}

CenterSelection fps_from(const PointCloud& cloud, std::size_t M, PointIndex start, FpsTrace* trace) {
  if (cloud.empty()) throw std::invalid_argument("fps: empty cloud");
  if (M < 1) throw std::invalid_argument("fps: M must be >= 1");
  if (start >= cloud.size()) throw std::invalid_argument("fps: start index out of range");
  const std::size_t n = cloud.size();
  const std::size_t take = std::min(M, n);

  CenterSelection sel{Sampler::fps, {}, {}, M};
  sel.points.reserve(take);
  if (trace) trace->selection_distances.assign(1, std::numeric_limits<double>::infinity());

  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  PointIndex current = start;
  sel.points.push_back(current);
  min_d2[current] = -1.0;  // marks selected
  while (sel.points.size() < take) {
    const Vec3 anchor = cloud.points[current].position;
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double& d = min_d2[i];
      if (d < 0.0) continue;
      const double cand = squared_distance(cloud.points[i].position, anchor);
      if (cand < d) d = cand;
      // Strict '>' keeps the lowest index among ties.
      if (d > best) {
        best = d;
        best_i = i;
      }
    }
    current = static_cast<PointIndex>(best_i);
    sel.points.push_back(current);
    min_d2[current] = -1.0;
    if (trace) trace->selection_distances.push_back(std::sqrt(best));
  }
  return sel;
}

CenterSelection fps(const PointCloud& cloud, std::size_t M, Rng& rng, FpsTrace* trace) {
  if (cloud.empty()) throw std::invalid_argument("fps: empty cloud");
  const auto start = static_cast<PointIndex>(rng.uniform(cloud.size()));
  return fps_from(cloud, M, start, trace);
}

CenterSelection rvs(const VoxelPointIndex& index, std::size_t M, Rng& rng) {
  if (index.occupied_count() == 0) throw std::invalid_argument("rvs: empty index");
  if (M < 1) throw std::invalid_argument("rvs: M must be >= 1");
  CenterSelection sel{Sampler::rvs, {}, {}, M};
  const std::size_t take = std::min(M, index.occupied_count());
  std::vector<VoxelCoord> pool(index.occupied().begin(), index.occupied().end());
  partial_shuffle(pool, take, rng);
  pool.resize(take);
  sel.voxels = std::move(pool);
  return sel;
}

CenterSelection cas_from(const VoxelPointIndex& index, std::vector<VoxelCoord> incumbents,
                         double beta, Rng& rng, CasTrace* trace) {
  if (index.occupied_count() == 0) throw std::invalid_argument("cas: empty index");
  if (incumbents.empty()) throw std::invalid_argument("cas: needs at least one incumbent");
  if (!(beta >= 0.0)) throw std::invalid_argument("cas: beta must be >= 0");
  const int radius = index.config().neighborhood_radius;

  std::vector<char> picked(index.occupied_count(), 0);
  for (const auto& v : incumbents) {
    const auto ord = index.ordinal(v);
    if (!ord) throw std::invalid_argument("cas: incumbent is not an occupied voxel");
    if (picked[*ord]) throw std::invalid_argument("cas: duplicate incumbent");
    picked[*ord] = 1;
  }

  CoverageState state(index, radius);
  for (const auto& v : incumbents) state.add(v);
  if (trace) {
    *trace = CasTrace{};
    trace->initial_covered = state.covered_count();
  }

  std::vector<VoxelCoord> challengers;
  challengers.reserve(index.occupied_count() - incumbents.size());
  for (std::size_t ord = 0; ord < index.occupied_count(); ++ord) {
    if (!picked[ord]) challengers.push_back(index.occupied()[ord]);
  }
  rng.shuffle(std::span<VoxelCoord>(challengers));

  for (const auto& challenger : challengers) {
    const auto slot = static_cast<std::size_t>(rng.uniform(incumbents.size()));
    const VoxelCoord incumbent = incumbents[slot];
    const double h_add = state.gain(challenger, beta);
    const double h_rmv = state.loss(incumbent);
    if (trace) ++trace->challenges;
    if (!(h_add > h_rmv)) continue;
    const std::size_t before = state.covered_count();
    state.remove(incumbent);
    state.add(challenger);
    incumbents[slot] = challenger;
    if (trace) trace->swaps.push_back({challenger, incumbent, h_add, h_rmv, before, state.covered_count()});
  }

  if (trace) {
    trace->final_covered = state.covered_count();
    trace->final_counts.assign(state.counts().begin(), state.counts().end());
  }
  const std::size_t count = incumbents.size();
  return CenterSelection{Sampler::cas, std::move(incumbents), {}, count};
}

CenterSelection cas(const VoxelPointIndex& index, std::size_t M, double beta, Rng& rng,
                    CasTrace* trace) {
  auto init = rvs(index, M, rng);
  auto sel = cas_from(index, std::move(init.voxels), beta, rng, trace);
  sel.requested = M;
  return sel;
}

CenterSelection naive_grid(const VoxelPointIndex& index, std::size_t M, Rng& rng) {
  auto sel = rvs(index, M, rng);
  sel.method = Sampler::naive_grid;
  return sel;
}

}  // namespace gridq
