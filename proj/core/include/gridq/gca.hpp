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
#include <iosfwd>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "gridq/grouping.hpp"
#include "gridq/rng.hpp"
#include "gridq/types.hpp"

// Training-free Grid Context Aggregation forward pass. Weights are injected
// (weight file or seeded generator); nothing here learns.
namespace gridq::gca {

enum class Activation { relu, identity };
enum class Aggregation { max, sum, weighted_mean };
enum class Pooling { max, mean };

std::string_view to_string(Activation a);
std::string_view to_string(Aggregation a);
std::string_view to_string(Pooling p);

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out
  Activation activation = Activation::identity;
};

// Tracks how close a forward pass came to a non-differentiable point: relu
// pre-activations and ties inside max reductions. `ratio` is the smallest
// |margin| / |rate of change along the probe direction| seen.
struct KinkMonitor {
  double ratio = std::numeric_limits<double>::infinity();
  void observe(double margin, double rate);
};

struct MlpSpec {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }

  // Throws std::invalid_argument unless shapes chain and buffers match.
  void validate() const;

  std::vector<double> forward(std::span<const double> x) const;
  // Output and its directional derivative along dx.
  std::vector<double> forward_tangent(std::span<const double> x, std::span<const double> dx,
                                      std::vector<double>& dy, KinkMonitor* kinks = nullptr) const;

  // Single layer y = x (square identity matrix, zero bias).
  static MlpSpec identity(std::size_t dim);
};

struct GcaConfig {
  MlpSpec transform;  // node feature transform
  MlpSpec geo;        // (center xyz, node xyz, node weight [, node - center])
  MlpSpec sem;        // (context feature, node feature)
  MlpSpec fuse;       // (geo output, sem output) -> edge vector
  Aggregation aggregation = Aggregation::max;
  Pooling pooling = Pooling::max;
  // Appends node - center to the geometric input (10 values instead of 7).
  bool relative_geo = false;

  std::size_t feature_dim() const { return transform.input_dim(); }
  std::size_t geo_input_dim() const { return relative_geo ? 10 : 7; }
  std::size_t output_dim() const { return transform.output_dim(); }

  // Edge vectors either match the transform output or are a scalar gate.
  void validate() const;
};

struct GcaInputs {
  Vec3 center{};
  std::vector<Vec3> node_positions;
  std::vector<double> node_weights;
  std::vector<std::vector<double>> node_features;
  std::vector<std::vector<double>> context_features;
};

// Pulls positions, coverage weights and features for one group out of the
// cloud it was built from. `context` lists the context point indices.
GcaInputs gather_inputs(const PointCloud& cloud, const PointGroup& group,
                        std::span<const PointIndex> context);

// Elementwise max or mean; no learnable weights.
std::vector<double> grid_context_pool(std::span<const std::vector<double>> features, Pooling pooling);

// e = fuse(geo(chi_c, chi_i, w_i), sem(f_cxt, f_i)).
std::vector<double> edge_attention(const Vec3& chi_c, const Vec3& chi_i, double w_i,
                                   std::span<const double> f_cxt, std::span<const double> f_i,
                                   const GcaConfig& config);

// Per node: contribution = e (elementwise*) transform(f_i); then aggregate.
std::vector<double> gca_forward(const GcaInputs& inputs, const GcaConfig& config);

// Perturbation of node features and node weights; context features are held
// fixed.
struct GcaDirection {
  std::vector<std::vector<double>> node_features;
  std::vector<double> node_weights;
};

// Analytic directional derivative of gca_forward along `direction`.
std::vector<double> gca_directional_derivative(const GcaInputs& inputs, const GcaDirection& direction,
                                               const GcaConfig& config, KinkMonitor* kinks = nullptr);

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  // Probes that landed too close to a kink and were re-drawn with jitter.
  std::size_t kink_retries = 0;
  bool kink_unresolved = false;
};

// Compares the analytic directional derivative against central differences
// for `probes` random directions. Error per component is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
FiniteDiffReport finite_diff_check(const GcaConfig& config, const GcaInputs& inputs, double epsilon,
                                   Rng& rng, std::size_t probes = 1);

struct SeededShape {
  std::size_t feature_dim = 4;
  std::size_t hidden = 16;
  std::size_t out_dim = 8;
  // Fuse output width; 0 means "match out_dim".
  std::size_t edge_dim = 0;
  Activation activation = Activation::relu;
  Aggregation aggregation = Aggregation::max;
  Pooling pooling = Pooling::max;
  bool relative_geo = false;
};

// Two-layer MLPs with weights uniform in +-1/sqrt(fan_in) and small biases.
GcaConfig seeded_config(const SeededShape& shape, std::uint64_t seed);

// Text weight file; see docs/file_formats.md. read_config throws DataError on
// syntax errors and on shape mismatches.
void write_config(std::ostream& out, const GcaConfig& config);
GcaConfig read_config(std::istream& in);

}  // namespace gridq::gca
