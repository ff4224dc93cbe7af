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
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "gridq/errors.hpp"
#include "gridq/gca.hpp"

namespace gridq::gca {
namespace {

DenseLayer constant_layer(std::size_t in, std::size_t out, double w, double b) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.weights.assign(in * out, w);
  l.bias.assign(out, b);
  return l;
}

MlpSpec single(DenseLayer l) {
  MlpSpec m;
  m.layers.push_back(std::move(l));
  return m;
}

GcaInputs random_inputs(std::size_t k, std::size_t dim, std::size_t context, Rng& rng) {
  GcaInputs in;
  in.center = {rng.normal(), rng.normal(), rng.normal()};
  for (std::size_t i = 0; i < k; ++i) {
    in.node_positions.push_back({rng.normal(), rng.normal(), rng.normal()});
    in.node_weights.push_back(1.0 + static_cast<double>(rng.uniform(5)));
    std::vector<double> f(dim);
    for (auto& v : f) v = rng.normal();
    in.node_features.push_back(std::move(f));
  }
  for (std::size_t i = 0; i < context; ++i) {
    std::vector<double> f(dim);
    for (auto& v : f) v = rng.normal();
    in.context_features.push_back(std::move(f));
  }
  return in;
}

// Dense evaluation written out by hand, independent of MlpSpec::forward.
std::vector<double> apply_dense(const MlpSpec& mlp, std::vector<double> x) {
  for (const auto& l : mlp.layers) {
    std::vector<double> y(l.out);
    for (std::size_t r = 0; r < l.out; ++r) {
      long double z = l.bias[r];
      for (std::size_t c = 0; c < l.in; ++c) z += static_cast<long double>(l.weights[r * l.in + c]) * x[c];
      y[r] = static_cast<double>(z);
      if (l.activation == Activation::relu) y[r] = std::max(0.0, y[r]);
    }
    x = std::move(y);
  }
  return x;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], tol * std::max(1.0, std::abs(b[j]))) << j;
}

TEST(GridContextPool, Examples) {
  const std::vector<std::vector<double>> one{{1.5, -2.0}};
  EXPECT_EQ(grid_context_pool(one, Pooling::max), one[0]);
  EXPECT_EQ(grid_context_pool(one, Pooling::mean), one[0]);
  const std::vector<std::vector<double>> two{{1, 5}, {3, 2}};
  EXPECT_EQ(grid_context_pool(two, Pooling::max), (std::vector<double>{3, 5}));
  EXPECT_EQ(grid_context_pool(two, Pooling::mean), (std::vector<double>{2, 3.5}));
  const std::vector<std::vector<double>> same(4, std::vector<double>{0.25, -7});
  EXPECT_EQ(grid_context_pool(same, Pooling::max), same[0]);
}

TEST(GridContextPool, RejectsEmptyAndRagged) {
  EXPECT_THROW(grid_context_pool(std::vector<std::vector<double>>{}, Pooling::max), std::invalid_argument);
  const std::vector<std::vector<double>> ragged{{1, 2}, {3}};
  EXPECT_THROW(grid_context_pool(ragged, Pooling::mean), std::invalid_argument);
}

TEST(GridContextPool, MatchesElementwiseReductionUnderShuffle) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    auto in = random_inputs(1, 6, 1 + rng.uniform(20), rng);
    auto feats = in.context_features;
    std::vector<double> mx(6, -INFINITY), mean(6, 0.0);
    for (const auto& f : feats)
      for (std::size_t j = 0; j < 6; ++j) {
        mx[j] = std::max(mx[j], f[j]);
        mean[j] += f[j] / static_cast<double>(feats.size());
      }
    EXPECT_EQ(grid_context_pool(feats, Pooling::max), mx);
    expect_close(grid_context_pool(feats, Pooling::mean), mean, 1e-12);
    rng.shuffle(std::span<std::vector<double>>(feats));
    EXPECT_EQ(grid_context_pool(feats, Pooling::max), mx);
  }
}

TEST(EdgeAttention, ZeroWeightsGiveZero) {
  GcaConfig c;
  c.transform = single(constant_layer(3, 5, 0, 0));
  c.geo = single(constant_layer(7, 4, 0, 0));
  c.sem = single(constant_layer(6, 2, 0, 0));
  c.fuse = single(constant_layer(6, 5, 0, 0));
  c.validate();
  const std::vector<double> f{1, 2, 3};
  EXPECT_EQ(edge_attention({1, 2, 3}, {4, 5, 6}, 2.0, f, f, c), std::vector<double>(5, 0.0));
}

TEST(EdgeAttention, IdentitySpecsReproduceInputs) {
  GcaConfig c;
  c.transform = MlpSpec::identity(2);
  c.geo = MlpSpec::identity(7);
  c.sem = MlpSpec::identity(4);
  c.fuse = MlpSpec::identity(11);
  // The fuse width only has to match the transform for gca_forward.
  const std::vector<double> cxt{7, 8}, fi{9, 10};
  const auto e = edge_attention({1, 2, 3}, {4, 5, 6}, 0.5, cxt, fi, c);
  EXPECT_EQ(e, (std::vector<double>{1, 2, 3, 4, 5, 6, 0.5, 7, 8, 9, 10}));
}

TEST(EdgeAttention, SensitiveToCoverageWeight) {
  const auto c = seeded_config({}, 42);
  Rng rng(42);
  const auto in = random_inputs(1, 4, 3, rng);
  const auto cxt = grid_context_pool(in.context_features, c.pooling);
  const auto e0 = edge_attention(in.center, in.node_positions[0], 1.0, cxt, in.node_features[0], c);
  const auto e1 = edge_attention(in.center, in.node_positions[0], 2.0, cxt, in.node_features[0], c);
  double diff = 0;
  for (std::size_t j = 0; j < e0.size(); ++j) diff = std::max(diff, std::abs(e0[j] - e1[j]));
  EXPECT_GT(diff, 1e-6);
}

TEST(EdgeAttention, DimMismatchThrows) {
  const auto c = seeded_config({}, 1);
  const std::vector<double> bad{1, 2}, ok{1, 2, 3, 4};
  EXPECT_THROW(edge_attention({}, {}, 1, bad, ok, c), std::invalid_argument);
  EXPECT_THROW(edge_attention({}, {}, 1, ok, bad, c), std::invalid_argument);
}

TEST(GcaForward, SingleNodeMaxIsEdgeTimesTransform) {
  const auto c = seeded_config({}, 3);
  Rng rng(3);
  const auto in = random_inputs(1, 4, 5, rng);
  const auto cxt = grid_context_pool(in.context_features, c.pooling);
  const auto e = edge_attention(in.center, in.node_positions[0], in.node_weights[0], cxt, in.node_features[0], c);
  const auto m = c.transform.forward(in.node_features[0]);
  std::vector<double> want(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) want[j] = e[j] * m[j];
  EXPECT_EQ(gca_forward(in, c), want);
}

TEST(GcaForward, ScalarGateBroadcasts) {
  SeededShape shape;
  shape.edge_dim = 1;
  const auto c = seeded_config(shape, 5);
  Rng rng(5);
  const auto in = random_inputs(1, 4, 2, rng);
  const auto cxt = grid_context_pool(in.context_features, c.pooling);
  const auto e = edge_attention(in.center, in.node_positions[0], in.node_weights[0], cxt, in.node_features[0], c);
  ASSERT_EQ(e.size(), 1u);
  const auto m = c.transform.forward(in.node_features[0]);
  const auto out = gca_forward(in, c);
  ASSERT_EQ(out.size(), 8u);
  for (std::size_t j = 0; j < m.size(); ++j) EXPECT_EQ(out[j], e[0] * m[j]);
}

TEST(GcaForward, AllOnesEdgeWithSumMatchesPlainSum) {
  Rng rng(17);
  for (int t = 0; t < 20; ++t) {
    SeededShape shape;
    shape.aggregation = Aggregation::sum;
    auto c = seeded_config(shape, 100 + t);
    // Zero fuse weights with unit bias force e = 1 for every node.
    for (auto& l : c.fuse.layers) std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(c.fuse.layers.back().bias.begin(), c.fuse.layers.back().bias.end(), 1.0);
    const auto in = random_inputs(1 + rng.uniform(30), 4, 6, rng);
    std::vector<double> want(c.output_dim(), 0.0);
    for (const auto& f : in.node_features) {
      const auto m = apply_dense(c.transform, f);
      for (std::size_t j = 0; j < want.size(); ++j) want[j] += m[j];
    }
    expect_close(gca_forward(in, c), want, 1e-12);
  }
}

TEST(GcaForward, OutputDimFollowsTransform) {
  for (std::size_t out : {1u, 3u, 8u}) {
    SeededShape shape;
    shape.out_dim = out;
    for (bool rel : {false, true}) {
      shape.relative_geo = rel;
      const auto c = seeded_config(shape, out);
      Rng rng(out);
      EXPECT_EQ(gca_forward(random_inputs(5, 4, 5, rng), c).size(), out);
    }
  }
}

TEST(GcaForward, PermutationInvariant) {
  Rng rng(99);
  for (auto agg : {Aggregation::max, Aggregation::sum, Aggregation::weighted_mean}) {
    for (int t = 0; t < 20; ++t) {
      SeededShape shape;
      shape.aggregation = agg;
      shape.pooling = t % 2 ? Pooling::mean : Pooling::max;
      const auto c = seeded_config(shape, 1000 + t);
      auto in = random_inputs(2 + rng.uniform(20), 4, 8, rng);
      const auto base = gca_forward(in, c);
      std::vector<std::size_t> perm(in.node_features.size());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(perm));
      GcaInputs p = in;
      for (std::size_t i = 0; i < perm.size(); ++i) {
        p.node_positions[i] = in.node_positions[perm[i]];
        p.node_weights[i] = in.node_weights[perm[i]];
        p.node_features[i] = in.node_features[perm[i]];
      }
      rng.shuffle(std::span<std::vector<double>>(p.context_features));
      expect_close(gca_forward(p, c), base, 1e-12);
    }
  }
}

TEST(GcaForward, RejectsBadInput) {
  const auto c = seeded_config({}, 1);
  GcaInputs empty;
  empty.context_features = {{0, 0, 0, 0}};
  EXPECT_THROW(gca_forward(empty, c), std::invalid_argument);
  Rng rng(1);
  auto in = random_inputs(3, 4, 2, rng);
  in.node_features[1].pop_back();
  EXPECT_THROW(gca_forward(in, c), std::invalid_argument);
  in = random_inputs(3, 4, 0, rng);
  EXPECT_THROW(gca_forward(in, c), std::invalid_argument);
}

TEST(GcaGradient, ZeroFeaturesSumFollowsBiasChain) {
  // Linear transform y = W f + b with a constant unit edge: at f = 0 the output
  // is K * b and the derivative along d is W * sum(d_i).
  GcaConfig c = seeded_config({.activation = Activation::identity, .aggregation = Aggregation::sum}, 21);
  for (auto& l : c.fuse.layers) std::fill(l.weights.begin(), l.weights.end(), 0.0);
  std::fill(c.fuse.layers.back().bias.begin(), c.fuse.layers.back().bias.end(), 1.0);
  c.transform = single(constant_layer(4, 8, 0, 0));
  Rng rng(21);
  for (auto& w : c.transform.layers[0].weights) w = rng.normal();
  for (auto& b : c.transform.layers[0].bias) b = rng.normal();

  const std::size_t K = 6;
  auto in = random_inputs(K, 4, 3, rng);
  for (auto& f : in.node_features) std::fill(f.begin(), f.end(), 0.0);
  const auto& L = c.transform.layers[0];
  const auto out = gca_forward(in, c);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(out[j], K * L.bias[j], 1e-12);

  GcaDirection dir;
  std::vector<double> dsum(4, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    std::vector<double> d(4);
    for (std::size_t a = 0; a < 4; ++a) dsum[a] += (d[a] = rng.normal());
    dir.node_features.push_back(d);
    dir.node_weights.push_back(rng.normal());
  }
  const auto g = gca_directional_derivative(in, dir, c);
  for (std::size_t j = 0; j < 8; ++j) {
    double want = 0;
    for (std::size_t a = 0; a < 4; ++a) want += L.weights[j * 4 + a] * dsum[a];
    EXPECT_NEAR(g[j], want, 1e-12);
  }
}

TEST(GcaGradient, LinearNetworkFiniteDifferences) {
  Rng rng(5);
  for (auto agg : {Aggregation::sum, Aggregation::weighted_mean}) {
    for (int t = 0; t < 10; ++t) {
      const auto c = seeded_config({.activation = Activation::identity, .aggregation = agg}, 200 + t);
      const auto in = random_inputs(2 + rng.uniform(10), 4, 5, rng);
      const auto rep = finite_diff_check(c, in, 1e-5, rng, 3);
      EXPECT_LT(rep.max_rel_error, 1e-8);
      EXPECT_EQ(rep.probes, 3u);
    }
  }
}

TEST(GcaGradient, ReluNetworkFiniteDifferences) {
  Rng rng(6);
  for (auto agg : {Aggregation::max, Aggregation::sum, Aggregation::weighted_mean}) {
    for (int t = 0; t < 10; ++t) {
      const auto c = seeded_config({.aggregation = agg, .relative_geo = t % 2 == 1}, 300 + t);
      const auto in = random_inputs(2 + rng.uniform(10), 4, 5, rng);
      const auto rep = finite_diff_check(c, in, 1e-5, rng, 10);
      EXPECT_FALSE(rep.kink_unresolved);
      EXPECT_LT(rep.max_rel_error, 1e-4);
    }
  }
}

TEST(WeightFile, RoundTripsExactly) {
  const auto c = seeded_config({.edge_dim = 1, .aggregation = Aggregation::weighted_mean,
                                .pooling = Pooling::mean, .relative_geo = true}, 9);
  std::stringstream ss;
  write_config(ss, c);
  const auto back = read_config(ss);
  EXPECT_EQ(back.aggregation, c.aggregation);
  EXPECT_EQ(back.pooling, c.pooling);
  EXPECT_EQ(back.relative_geo, c.relative_geo);
  std::stringstream again;
  write_config(again, back);
  EXPECT_EQ(again.str(), [&] { std::stringstream s; write_config(s, c); return s.str(); }());
  Rng rng(9);
  const auto in = random_inputs(4, 4, 4, rng);
  EXPECT_EQ(gca_forward(in, back), gca_forward(in, c));
}

TEST(WeightFile, MismatchedDimsAreDataErrors) {
  std::stringstream ss;
  write_config(ss, seeded_config({}, 1));
  std::string text = ss.str();
  // Shrink the sem input to a width that no longer matches 2 * feature_dim.
  const auto pos = text.find("mlp sem\ndims 3 8");
  ASSERT_NE(pos, std::string::npos);
  std::string bad = text;
  bad.replace(pos, 16, "mlp sem\ndims 3 7");
  std::istringstream in(bad);
  EXPECT_THROW(read_config(in), DataError);
}

TEST(WeightFile, SyntaxErrorsCarryLineNumbers) {
  std::istringstream in("gridq-gca 1\naggregation max\npooling avg\n");
  try {
    (void)read_config(in);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream bad_version("gridq-gca 2\n");
  EXPECT_THROW(read_config(bad_version), DataError);
}

}  // namespace
}  // namespace gridq::gca
