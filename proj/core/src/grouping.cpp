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

#include "gridq/grouping.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gridq/errors.hpp"
#include "gridq/voxel_index.hpp"

namespace gridq {

namespace {

constexpr std::uint64_t kIndexStream = 0;
constexpr std::uint64_t kSamplerStream = 1;
constexpr std::uint64_t kQueryStream = 2;
constexpr std::uint64_t kChainStreamBase = 0x4348'4149'4E00ULL;

void append_double(std::string& out, double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

struct CenterRef {
  std::optional<VoxelCoord> voxel;  // center voxel (quantized point for point samplers)
  Vec3 position{};                  // query reference position
  bool sampled_point = false;
};

}  // namespace

std::string_view to_string(Querier q) {
  switch (q) {
    case Querier::ball: return "ball";
    case Querier::knn: return "knn";
    case Querier::cube: return "cube";
    case Querier::grid_knn: return "gknn";
    case Querier::grid_knn_strict: return "gknn-strict";
  }
  return "?";
}

std::optional<Querier> parse_querier(std::string_view name) {
  if (name == "ball") return Querier::ball;
  if (name == "knn") return Querier::knn;
  if (name == "cube") return Querier::cube;
  if (name == "gknn" || name == "grid-knn" || name == "cagq-knn") return Querier::grid_knn;
  if (name == "gknn-strict" || name == "grid-knn-strict") return Querier::grid_knn_strict;
  return std::nullopt;
}

double ball_radius(const SamplingConfig& config, BallRadiusPreset preset) {
  const auto& v = config.voxel_size;
  switch (preset) {
    case BallRadiusPreset::half_diagonal:
      return 0.5 * std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    case BallRadiusPreset::volume_matched:
      return std::cbrt(3.0 * v[0] * v[1] * v[2] / (4.0 * std::numbers::pi));
  }
  return 0.0;
}

GroupCenter synthesize_center(const PointCloud& cloud, std::span<const PointIndex> nodes) {
  if (nodes.empty()) throw std::invalid_argument("synthesize_center: empty node list");
  GroupCenter c;
  Vec3 lo = cloud.points[nodes.front()].position;
  Vec3 hi = lo;
  Vec3 acc{0.0, 0.0, 0.0};
  for (auto i : nodes) {
    const auto& p = cloud.points[i];
    c.weight += p.coverage_weight;
    for (int a = 0; a < 3; ++a) {
      acc[a] += p.coverage_weight * p.position[a];
      lo[a] = std::min(lo[a], p.position[a]);
      hi[a] = std::max(hi[a], p.position[a]);
    }
  }
  // The clamp only absorbs rounding; the exact mean is always inside the box.
  for (int a = 0; a < 3; ++a) c.position[a] = std::clamp(acc[a] / c.weight, lo[a], hi[a]);
  return c;
}

GroupingOutput cagq(const PointCloud& cloud, const SamplingConfig& config,
                    const GroupingOptions& options, Rng& rng) {
  require_valid(cloud);
  config.validate();

  const bool needs_index = is_voxel_sampler(options.sampler) || is_voxel_querier(options.querier);
  std::optional<VoxelPointIndex> index;
  if (needs_index) {
    Rng index_rng = rng.split(kIndexStream);
    index.emplace(VoxelPointIndex::build(cloud, config, index_rng, options.threads));
  }

  Rng sampler_rng = rng.split(kSamplerStream);
  CenterSelection selection;
  switch (options.sampler) {
    case Sampler::rps: selection = rps(cloud, config.M, sampler_rng); break;
    case Sampler::fps: selection = fps(cloud, config.M, sampler_rng); break;
    case Sampler::rvs: selection = rvs(*index, config.M, sampler_rng); break;
    case Sampler::cas: selection = cas(*index, config.M, config.beta, sampler_rng); break;
    case Sampler::naive_grid: selection = naive_grid(*index, config.M, sampler_rng); break;
  }

  GroupingOutput out;
  out.requested = config.M;
  out.effective = selection.effective();
  out.built_index = needs_index;
  out.scanned_full_cloud = options.querier == Querier::ball || options.querier == Querier::knn;
  if (out.effective < out.requested) {
    out.warnings.push_back("requested M=" + std::to_string(out.requested) + " but only " +
                           std::to_string(out.effective) + " centers available");
  }

  std::vector<CenterRef> refs(out.effective);
  for (std::size_t j = 0; j < out.effective; ++j) {
    if (is_voxel_sampler(options.sampler)) {
      refs[j].voxel = selection.voxels[j];
      refs[j].position = voxel_midpoint(selection.voxels[j], config.voxel_size);
    } else {
      const auto& p = cloud.points[selection.points[j]].position;
      refs[j].position = p;
      refs[j].sampled_point = true;
      if (index) refs[j].voxel = quantize(p, config.voxel_size);
    }
  }

  // Naive grid query keeps nodes inside the center voxel.
  const int radius = options.sampler == Sampler::naive_grid ? 0 : config.neighborhood_radius;
  const double ball_r = options.ball_radius.value_or(ball_radius(config, options.ball_preset));
  const Rng query_root = rng.split(kQueryStream);

  std::vector<std::optional<PointGroup>> slots(out.effective);
  auto query_one = [&](std::size_t j) {
    Rng qrng = query_root.split(j);
    const auto& ref = refs[j];
    PointGroup group;
    if (is_voxel_sampler(options.sampler)) group.center_voxel = ref.voxel;
    switch (options.querier) {
      case Querier::ball:
        group.nodes = ball_query(cloud, ref.position, ball_r, config.K, qrng, config.short_group_policy);
        break;
      case Querier::knn:
        group.nodes = knn_bruteforce(cloud, ref.position, config.K);
        apply_short_group_policy(group.nodes, config.K, config.short_group_policy);
        break;
      case Querier::cube:
        group.nodes = cube_query(index->neighborhood(*ref.voxel, radius), config.K, qrng,
                                 config.short_group_policy);
        break;
      case Querier::grid_knn:
      case Querier::grid_knn_strict:
        group.nodes = knn_layered(*index, cloud, *ref.voxel, ref.position, config.K, radius,
                                  options.querier == Querier::grid_knn ? KnnMode::layered : KnnMode::strict);
        apply_short_group_policy(group.nodes, config.K, config.short_group_policy);
        break;
    }
    if (group.nodes.nodes.empty()) return;
    if (group.nodes.truncated && config.short_group_policy == ShortGroupPolicy::reject) return;
    const auto c = synthesize_center(cloud, group.nodes.nodes);
    group.center_weight = c.weight;
    group.center_position =
        (options.keep_sampled_center && ref.sampled_point) ? ref.position : c.position;
    slots[j] = std::move(group);
  };

  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1 || out.effective < 2) {
    for (std::size_t j = 0; j < out.effective; ++j) query_one(j);
  } else {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (out.effective + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = std::min(out.effective, t * chunk);
      const std::size_t hi = std::min(out.effective, lo + chunk);
      if (lo == hi) break;
      workers.emplace_back([&query_one, lo, hi] {
        for (std::size_t j = lo; j < hi; ++j) query_one(j);
      });
    }
  }

  out.groups.reserve(out.effective);
  for (auto& slot : slots) {
    if (!slot) {
      ++out.rejected;
      continue;
    }
    out.downsampled_cloud.points.push_back(Point{slot->center_position, slot->center_weight, {}});
    out.groups.push_back(std::move(*slot));
  }
  if (out.rejected > 0) {
    out.warnings.push_back(std::to_string(out.rejected) + " group(s) rejected as short");
  }
  return out;
}

std::vector<GroupingOutput> chain(const PointCloud& cloud, std::span<const SamplingConfig> configs,
                                  const GroupingOptions& options, Rng& rng) {
  if (configs.empty()) throw std::invalid_argument("chain: no levels");
  for (std::size_t i = 1; i < configs.size(); ++i) {
    if (configs[i].M >= configs[i - 1].M) throw std::invalid_argument("chain: M must strictly decrease");
  }
  std::vector<GroupingOutput> levels;
  levels.reserve(configs.size());
  const PointCloud* input = &cloud;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (input->empty()) {
      throw std::invalid_argument("chain: level " + std::to_string(i) + " has empty input");
    }
    if (i == 0) {
      levels.push_back(cagq(*input, configs[i], options, rng));
    } else {
      Rng level_rng = rng.split(kChainStreamBase + i);
      levels.push_back(cagq(*input, configs[i], options, level_rng));
    }
    input = &levels.back().downsampled_cloud;
  }
  return levels;
}

void write_groups(std::ostream& out, const GroupingOutput& output) {
  std::string line;
  for (const auto& g : output.groups) {
    line.clear();
    for (int a = 0; a < 3; ++a) {
      append_double(line, g.center_position[a]);
      line.push_back(' ');
    }
    append_double(line, g.center_weight);
    line.push_back(' ');
    line += std::to_string(g.nodes.nodes.size());
    for (auto i : g.nodes.nodes) {
      line.push_back(' ');
      line += std::to_string(i);
    }
    line.push_back('\n');
    out << line;
  }
}

std::vector<PointGroup> read_groups(std::istream& in) {
  std::vector<PointGroup> groups;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    PointGroup g;
    std::size_t k = 0;
    if (!(fields >> g.center_position[0] >> g.center_position[1] >> g.center_position[2] >>
          g.center_weight >> k)) {
      throw DataError("malformed group header", lineno);
    }
    g.nodes.nodes.reserve(k);
    for (std::size_t n = 0; n < k; ++n) {
      std::uint64_t idx = 0;
      if (!(fields >> idx)) throw DataError("expected " + std::to_string(k) + " node indices", lineno);
      g.nodes.nodes.push_back(static_cast<PointIndex>(idx));
    }
    std::string extra;
    if (fields >> extra) throw DataError("trailing tokens after node list", lineno);
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace gridq
