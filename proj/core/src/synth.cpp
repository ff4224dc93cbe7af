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

#include "gridq/synth.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridq/rng.hpp"

namespace gridq {

namespace {

double parse_real(std::string_view token, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw std::invalid_argument(std::string("bad ") + what + " '" + std::string(token) + "'");
  }
  return v;
}

std::size_t parse_count(std::string_view token, const char* what) {
  std::size_t v = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size() || v == 0) {
    throw std::invalid_argument(std::string("bad ") + what + " '" + std::string(token) + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(CloudKind kind) {
  switch (kind) {
    case CloudKind::uniform: return "uniform";
    case CloudKind::gaussian_clusters: return "gaussian";
    case CloudKind::sphere_surface: return "sphere";
  }
  return "?";
}

PointCloud synth_cloud(CloudKind kind, std::size_t N, const SynthParams& params, std::uint64_t seed) {
  if (N == 0) throw std::invalid_argument("synth_cloud: N must be >= 1");
  Rng rng(seed);
  std::vector<Vec3> pos(N);
  switch (kind) {
    case CloudKind::uniform: {
      if (!(params.extent > 0.0)) throw std::invalid_argument("synth_cloud: extent must be > 0");
      for (auto& p : pos) {
        for (auto& c : p) {
          c = rng.uniform01() * params.extent;
          // Rounding of u * extent can reach extent itself.
          if (c >= params.extent) c = std::nextafter(params.extent, 0.0);
        }
      }
      break;
    }
    case CloudKind::gaussian_clusters: {
      if (params.clusters == 0) throw std::invalid_argument("synth_cloud: clusters must be >= 1");
      if (!(params.spread >= 0.0) || !(params.extent > 0.0)) {
        throw std::invalid_argument("synth_cloud: spread must be >= 0 and extent > 0");
      }
      std::vector<Vec3> centers(params.clusters);
      std::vector<double> cumulative(params.clusters);
      double total = 0.0;
      for (std::size_t c = 0; c < params.clusters; ++c) {
        for (auto& x : centers[c]) x = rng.uniform01() * params.extent;
        total += std::exp(rng.normal());
        cumulative[c] = total;
      }
      for (auto& p : pos) {
        const double pick = rng.uniform01() * total;
        std::size_t c = 0;
        while (c + 1 < params.clusters && cumulative[c] <= pick) ++c;
        for (int a = 0; a < 3; ++a) p[a] = centers[c][a] + params.spread * rng.normal();
      }
      break;
    }
    case CloudKind::sphere_surface: {
      if (!(params.radius > 0.0)) throw std::invalid_argument("synth_cloud: radius must be > 0");
      for (auto& p : pos) {
        double norm = 0.0;
        do {
          for (auto& x : p) x = rng.normal();
          norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        } while (norm < 1e-12);
        for (auto& x : p) x *= params.radius / norm;
      }
      break;
    }
  }
  return PointCloud::from_positions(pos);
}

GenSpec parse_gen_spec(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  std::vector<std::string_view> args;
  if (colon != std::string_view::npos) {
    std::string_view rest = spec.substr(colon + 1);
    while (true) {
      const auto comma = rest.find(',');
      args.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  GenSpec out;
  auto too_many = [&](std::size_t max) {
    if (args.size() > max) throw std::invalid_argument("too many parameters in generator spec '" + std::string(spec) + "'");
  };
  if (kind == "uniform") {
    too_many(2);
    out.kind = CloudKind::uniform;
    if (args.size() > 0) out.N = parse_count(args[0], "point count");
    if (args.size() > 1) out.params.extent = parse_real(args[1], "extent");
  } else if (kind == "sphere") {
    too_many(2);
    out.kind = CloudKind::sphere_surface;
    if (args.size() > 0) out.N = parse_count(args[0], "point count");
    if (args.size() > 1) out.params.radius = parse_real(args[1], "radius");
  } else if (kind == "gaussian") {
    too_many(3);
    out.kind = CloudKind::gaussian_clusters;
    if (args.size() > 0) out.params.clusters = parse_count(args[0], "cluster count");
    if (args.size() > 1) out.params.spread = parse_real(args[1], "spread");
    if (args.size() > 2) out.N = parse_count(args[2], "point count");
  } else {
    throw std::invalid_argument("unknown generator kind '" + std::string(kind) + "'");
  }
  return out;
}

}  // namespace gridq
