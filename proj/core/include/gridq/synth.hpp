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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "gridq/types.hpp"

namespace gridq {

enum class CloudKind { uniform, gaussian_clusters, sphere_surface };

std::string_view to_string(CloudKind kind);

struct SynthParams {
  // uniform: points in [0, extent)^3; also the box holding cluster centers.
  double extent = 1.0;
  // gaussian_clusters: cluster count and per-axis standard deviation. Cluster
  // populations are drawn log-normally so densities differ between clusters.
  std::size_t clusters = 8;
  double spread = 0.05;
  // sphere_surface: points on the sphere of this radius around the origin.
  double radius = 1.0;
};

// Deterministic for a fixed seed. Throws std::invalid_argument on N == 0 or
// invalid parameters.
PointCloud synth_cloud(CloudKind kind, std::size_t N, const SynthParams& params, std::uint64_t seed);

// Generator spec "kind:param[,param...]":
//   uniform:N[,extent]
//   sphere:N[,radius]
//   gaussian:clusters[,spread[,N]]
struct GenSpec {
  CloudKind kind = CloudKind::uniform;
  SynthParams params;
  std::optional<std::size_t> N;
};

// Throws std::invalid_argument with a readable message on malformed specs.
GenSpec parse_gen_spec(std::string_view spec);

}  // namespace gridq
