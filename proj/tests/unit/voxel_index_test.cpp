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
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include <gtest/gtest.h>

#include "gridq/errors.hpp"
#include "gridq/synth.hpp"
#include "gridq/voxel_index.hpp"
#include "oracles.hpp"

namespace gridq {
namespace {

SamplingConfig unit_config(std::size_t K, std::size_t n_v = 0) {
  SamplingConfig c;
  c.K = K;
  c.n_v = n_v;
  return c;
}

TEST(Quantize, FloorsNegativeCoordinates) {
  EXPECT_EQ(quantize({2.5, 0.3, -1.2}, {1, 1, 1}), (VoxelCoord{2, 0, -2}));
}

TEST(Quantize, OriginMapsToOrigin) {
  EXPECT_EQ(quantize({0, 0, 0}, {0.37, 5, 1e-3}), (VoxelCoord{0, 0, 0}));
}

TEST(Quantize, ExactBoundaries) {
  EXPECT_EQ(quantize({3.0, 3.0, 3.0}, {1.5, 1.0, 3.0}), (VoxelCoord{2, 3, 1}));
}

TEST(Quantize, RejectsNonFiniteAndOverflow) {
  EXPECT_THROW(quantize({std::nan(""), 0, 0}, {1, 1, 1}), std::invalid_argument);
  EXPECT_THROW(quantize({0, std::numeric_limits<double>::infinity(), 0}, {1, 1, 1}),
               std::invalid_argument);
  EXPECT_THROW(quantize({1e12, 0, 0}, {1e-3, 1, 1}), std::invalid_argument);
}

TEST(Quantize, AgreesWithOracleOnRandomInput) {
  Rng rng(99);
  for (int i = 0; i < 20000; ++i) {
    const Vec3 p{rng.uniform_real(-50, 50), rng.uniform_real(-50, 50), rng.uniform_real(-50, 50)};
    const Vec3 s{rng.uniform_real(0.01, 3), rng.uniform_real(0.01, 3), rng.uniform_real(0.01, 3)};
    ASSERT_EQ(quantize(p, s), oracle::quantize(p, s));
  }
}

TEST(VoxelMidpoint, IsCellCenter) {
  const auto m = voxel_midpoint({-1, 0, 2}, {2, 1, 0.5});
  EXPECT_DOUBLE_EQ(m[0], -1.0);
  EXPECT_DOUBLE_EQ(m[1], 0.5);
  EXPECT_DOUBLE_EQ(m[2], 1.25);
}

TEST(BuildIndex, CapKeepsNvButCountsAll) {
  const auto cloud = PointCloud::from_positions({{0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}, {0.9, 0.9, 0.9}});
  Rng rng(1);
  const auto index = VoxelPointIndex::build(cloud, unit_config(8, 3), rng);
  ASSERT_EQ(index.occupied_count(), 1u);
  EXPECT_EQ(index.bucket({0, 0, 0}).size(), 3u);
  EXPECT_EQ(index.total({0, 0, 0}), 4u);
}

TEST(BuildIndex, DistinctVoxels) {
  const auto cloud = PointCloud::from_positions({{0.5, 0.5, 0.5}, {-0.5, 0.5, 0.5}});
  Rng rng(1);
  const auto index = VoxelPointIndex::build(cloud, unit_config(4), rng);
  EXPECT_EQ(index.occupied_count(), 2u);
  EXPECT_EQ(index.bucket({0, 0, 0}).size(), 1u);
  EXPECT_EQ(index.bucket({-1, 0, 0}).size(), 1u);
  EXPECT_TRUE(index.bucket({5, 5, 5}).empty());
  EXPECT_FALSE(index.ordinal({5, 5, 5}).has_value());
}

// Planar layout in the spirit of the CAGQ illustration: occupied cells with
// point counts, n_v = 3.
PointCloud figure_layout(std::map<VoxelCoord, int>* counts = nullptr) {
  const std::map<VoxelCoord, int> layout = {
      {{0, 0, 0}, 4}, {{1, 0, 0}, 2}, {{2, 0, 0}, 5}, {{2, 1, 0}, 3}, {{0, 2, 0}, 2}, {{1, 2, 0}, 6}};
  std::vector<Vec3> pos;
  Rng rng(2024);
  for (const auto& [v, n] : layout) {
    for (int i = 0; i < n; ++i) {
      pos.push_back({v.u + rng.uniform_real(0.05, 0.95), v.v + rng.uniform_real(0.05, 0.95), 0.5});
    }
  }
  if (counts) *counts = layout;
  return PointCloud::from_positions(pos);
}

TEST(BuildIndex, FigureLayoutStoresAtMostThreePerVoxel) {
  std::map<VoxelCoord, int> counts;
  const auto cloud = figure_layout(&counts);
  Rng rng(5);
  const auto index = VoxelPointIndex::build(cloud, unit_config(5, 3), rng);
  EXPECT_EQ(index.occupied_count(), counts.size());
  for (const auto& [v, n] : counts) {
    EXPECT_EQ(index.total(v), static_cast<std::size_t>(n));
    EXPECT_EQ(index.bucket(v).size(), std::min<std::size_t>(3, n));
  }
}

class IndexProperties : public ::testing::TestWithParam<int> {};

TEST_P(IndexProperties, PartitionCapCensus) {
  const int seed = GetParam();
  SynthParams p;
  p.clusters = 4;
  p.spread = 0.08;
  const auto cloud = synth_cloud(seed % 2 ? CloudKind::gaussian_clusters : CloudKind::uniform, 3000, p, seed);
  SamplingConfig c = unit_config(6);
  c.voxel_size = {0.07, 0.05, 0.09};
  Rng rng(seed);
  const auto index = VoxelPointIndex::build(cloud, c, rng);

  std::size_t census = 0;
  std::set<PointIndex> seen;
  std::set<VoxelCoord> expected_occupied;
  for (const auto& pt : cloud.points) expected_occupied.insert(oracle::quantize(pt.position, c.voxel_size));
  ASSERT_EQ(index.occupied_count(), expected_occupied.size());
  for (const auto& v : index.occupied()) {
    ASSERT_TRUE(expected_occupied.contains(v));
    const auto b = index.bucket(v);
    ASSERT_GE(b.size(), 1u);
    ASSERT_LE(b.size(), 6u);
    ASSERT_GE(index.total(v), b.size());
    census += index.total(v);
    for (auto i : b) {
      ASSERT_LT(i, cloud.size());
      ASSERT_EQ(oracle::quantize(cloud[i].position, c.voxel_size), v);
      ASSERT_TRUE(seen.insert(i).second);
    }
    // A voxel under the cap keeps every arrival.
    if (index.total(v) <= 6) ASSERT_EQ(b.size(), index.total(v));
  }
  EXPECT_EQ(census, cloud.size());
}

TEST_P(IndexProperties, ThreadCountDoesNotChangeTheIndex) {
  const int seed = GetParam();
  const auto cloud = synth_cloud(CloudKind::uniform, 5000, {}, seed);
  SamplingConfig c = unit_config(3);
  c.voxel_size = {0.1, 0.1, 0.1};
  Rng r1(seed), r4(seed);
  const auto a = VoxelPointIndex::build(cloud, c, r1, 1);
  const auto b = VoxelPointIndex::build(cloud, c, r4, 4);
  ASSERT_EQ(a.occupied_count(), b.occupied_count());
  for (std::size_t i = 0; i < a.occupied_count(); ++i) {
    ASSERT_EQ(a.occupied()[i], b.occupied()[i]);
    const auto ba = a.bucket_at(i);
    const auto bb = b.bucket_at(i);
    ASSERT_TRUE(std::equal(ba.begin(), ba.end(), bb.begin(), bb.end()));
  }
}

TEST_P(IndexProperties, ShellsPartitionTheContext) {
  const int seed = GetParam();
  Rng gen(seed);
  // Random occupancy of a 5x5x5 block, 1-4 points per occupied cell.
  std::vector<Vec3> pos;
  for (int u = 0; u < 5; ++u)
    for (int v = 0; v < 5; ++v)
      for (int w = 0; w < 5; ++w) {
        if (gen.uniform01() < 0.5 && !(u == 2 && v == 2 && w == 2)) continue;
        const auto n = 1 + gen.uniform(4);
        for (std::uint64_t k = 0; k < n; ++k)
          pos.push_back({u + gen.uniform01(), v + gen.uniform01(), w + gen.uniform01()});
      }
  const auto cloud = PointCloud::from_positions(pos);
  Rng rng(seed);
  const auto index = VoxelPointIndex::build(cloud, unit_config(4), rng);
  const VoxelCoord center{2, 2, 2};
  const auto layers = index.neighborhood_layers(center, 2);
  ASSERT_EQ(layers.size(), 3u);

  std::set<PointIndex> uni;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (auto i : layers[l]) {
      ASSERT_EQ(chebyshev_distance(oracle::quantize(cloud[i].position, {1, 1, 1}), center),
                static_cast<int>(l));
      ASSERT_TRUE(uni.insert(i).second);
    }
  }
  const auto nb = index.neighborhood(center, 2);
  EXPECT_EQ(uni, oracle::as_set(nb.context_point_indices));
  EXPECT_EQ(uni, oracle::as_set(oracle::context_points(index, center, 2)));
  EXPECT_EQ(oracle::as_set(nb.occupied_neighbors), oracle::as_set(oracle::block_voxels(index, center, 2)));
}

INSTANTIATE_TEST_SUITE_P(Seeds, IndexProperties, ::testing::Range(1, 9));

TEST(Neighborhood, IsolatedVoxel) {
  const auto cloud = PointCloud::from_positions({{0.5, 0.5, 0.5}, {0.6, 0.6, 0.6}, {5.5, 5.5, 5.5}});
  Rng rng(1);
  const auto index = VoxelPointIndex::build(cloud, unit_config(4), rng);
  const auto nb = index.neighborhood({0, 0, 0}, 1);
  ASSERT_EQ(nb.occupied_neighbors.size(), 1u);
  EXPECT_EQ(nb.occupied_neighbors[0], (VoxelCoord{0, 0, 0}));
  EXPECT_EQ(oracle::as_set(nb.context_point_indices), (std::set<PointIndex>{0, 1}));
  const auto layers = index.neighborhood_layers({0, 0, 0}, 1);
  ASSERT_EQ(layers.size(), 2u);
  EXPECT_EQ(layers[0].size(), 2u);
  EXPECT_TRUE(layers[1].empty());
}

TEST(Neighborhood, FaceAdjacentNeighborIsShellOne) {
  const auto cloud = PointCloud::from_positions({{0.5, 0.5, 0.5}, {1.5, 0.5, 0.5}});
  Rng rng(1);
  const auto index = VoxelPointIndex::build(cloud, unit_config(4), rng);
  const auto layers = index.neighborhood_layers({0, 0, 0}, 1);
  EXPECT_EQ(layers[0], (std::vector<PointIndex>{0}));
  EXPECT_EQ(layers[1], (std::vector<PointIndex>{1}));
}

TEST(Neighborhood, FullBlockHas27Cells) {
  std::vector<Vec3> pos;
  for (int u = -1; u <= 1; ++u)
    for (int v = -1; v <= 1; ++v)
      for (int w = -1; w <= 1; ++w) pos.push_back({u + 0.5, v + 0.5, w + 0.5});
  Rng rng(1);
  const auto index = VoxelPointIndex::build(PointCloud::from_positions(pos), unit_config(1), rng);
  const auto nb = index.neighborhood({0, 0, 0}, 1);
  EXPECT_EQ(nb.occupied_neighbors.size(), 27u);
  EXPECT_EQ(nb.context_point_indices.size(), 27u);
  EXPECT_TRUE(std::is_sorted(nb.occupied_neighbors.begin(), nb.occupied_neighbors.end()));
}

TEST(Neighborhood, FigureContextOfCenter21) {
  const auto cloud = figure_layout();
  Rng rng(5);
  const auto index = VoxelPointIndex::build(cloud, unit_config(5, 3), rng);
  const auto nb = index.neighborhood({2, 1, 0}, 1);
  // The 3x3 box around (2,1) holds (1,0), (2,0), (2,1) and (1,2).
  const std::set<VoxelCoord> expect{{1, 0, 0}, {2, 0, 0}, {2, 1, 0}, {1, 2, 0}};
  EXPECT_EQ(oracle::as_set(nb.occupied_neighbors), expect);
  std::set<PointIndex> stored;
  for (const auto& v : expect)
    for (auto i : index.bucket(v)) stored.insert(i);
  EXPECT_EQ(oracle::as_set(nb.context_point_indices), stored);
  EXPECT_EQ(nb.context_point_indices.size(), 2u + 3u + 3u + 3u);
}

TEST(Neighborhood, UnoccupiedCenterIsACallerBug) {
  const auto cloud = PointCloud::from_positions({{0.5, 0.5, 0.5}});
  Rng rng(1);
  const auto index = VoxelPointIndex::build(cloud, unit_config(4), rng);
  EXPECT_THROW((void)index.neighborhood({3, 3, 3}, 1), InvariantError);
  EXPECT_THROW((void)index.neighborhood_layers({3, 3, 3}, 1), InvariantError);
}

TEST(Retention, ReservoirIsUniformWithinAVoxel) {
  // 10 points in one voxel, cap 2: each should be kept with probability 1/5.
  std::vector<Vec3> pos;
  for (int i = 0; i < 10; ++i) pos.push_back({0.05 + 0.09 * i, 0.5, 0.5});
  const auto cloud = PointCloud::from_positions(pos);
  std::vector<int> kept(10, 0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    Rng rng(static_cast<std::uint64_t>(t));
    const auto index = VoxelPointIndex::build(cloud, unit_config(2), rng);
    for (auto i : index.bucket({0, 0, 0})) ++kept[i];
  }
  const double band = oracle::binomial_halfwidth(0.2, trials, 4.0);
  for (int k : kept) EXPECT_NEAR(static_cast<double>(k) / trials, 0.2, band);
}

TEST(Retention, FirstComeKeepsEarliest) {
  std::vector<Vec3> pos;
  for (int i = 0; i < 6; ++i) pos.push_back({0.1 * i, 0.5, 0.5});
  SamplingConfig c = unit_config(3);
  c.retention = RetentionPolicy::first_come;
  Rng rng(9);
  const auto index = VoxelPointIndex::build(PointCloud::from_positions(pos), c, rng);
  const auto b = index.bucket({0, 0, 0});
  EXPECT_EQ(std::vector<PointIndex>(b.begin(), b.end()), (std::vector<PointIndex>{0, 1, 2}));
}

}  // namespace
}  // namespace gridq
