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

#include "gridq/gca.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "gridq/errors.hpp"

namespace gridq::gca {

namespace {

void check_dims(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(got) + ", expected " +
                                std::to_string(want));
  }
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<double> geo_input(const Vec3& chi_c, const Vec3& chi_i, double w_i, bool relative) {
  std::vector<double> in{chi_c[0], chi_c[1], chi_c[2], chi_i[0], chi_i[1], chi_i[2], w_i};
  if (relative) {
    for (int a = 0; a < 3; ++a) in.push_back(chi_i[a] - chi_c[a]);
  }
  return in;
}

void check_inputs(const GcaInputs& in, const GcaConfig& config) {
  const std::size_t k = in.node_positions.size();
  if (k == 0) throw std::invalid_argument("gca_forward: empty group");
  if (in.node_weights.size() != k || in.node_features.size() != k) {
    throw std::invalid_argument("gca_forward: per-node arrays differ in length");
  }
  if (in.context_features.empty()) throw std::invalid_argument("gca_forward: empty context");
  for (const auto& f : in.node_features) check_dims(f.size(), config.feature_dim(), "node feature");
}

// Shared forward/tangent evaluation. When `dir` is null only the value is
// computed.
std::vector<double> evaluate(const GcaInputs& in, const GcaConfig& config, const GcaDirection* dir,
                             std::vector<double>* d_out, KinkMonitor* kinks) {
  check_inputs(in, config);
  const std::size_t k = in.node_positions.size();
  const std::size_t out_dim = config.output_dim();
  const auto f_cxt = grid_context_pool(in.context_features, config.pooling);
  check_dims(f_cxt.size(), config.feature_dim(), "context feature");

  std::vector<std::vector<double>> contrib(k), d_contrib(dir ? k : 0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto geo_in = geo_input(in.center, in.node_positions[i], in.node_weights[i], config.relative_geo);
    const auto sem_in = concat(f_cxt, in.node_features[i]);
    std::vector<double> e, m;
    std::vector<double> de, dm;
    if (!dir) {
      e = config.fuse.forward(concat(config.geo.forward(geo_in), config.sem.forward(sem_in)));
      m = config.transform.forward(in.node_features[i]);
    } else {
      std::vector<double> d_geo_in(geo_in.size(), 0.0);
      d_geo_in[6] = dir->node_weights[i];
      std::vector<double> d_sem_in(f_cxt.size(), 0.0);
      d_sem_in.insert(d_sem_in.end(), dir->node_features[i].begin(), dir->node_features[i].end());
      std::vector<double> dg, ds;
      const auto g = config.geo.forward_tangent(geo_in, d_geo_in, dg, kinks);
      const auto s = config.sem.forward_tangent(sem_in, d_sem_in, ds, kinks);
      e = config.fuse.forward_tangent(concat(g, s), concat(dg, ds), de, kinks);
      m = config.transform.forward_tangent(in.node_features[i], dir->node_features[i], dm, kinks);
    }
    auto& c = contrib[i];
    c.resize(out_dim);
    const bool gate = e.size() == 1;
    for (std::size_t j = 0; j < out_dim; ++j) c[j] = (gate ? e[0] : e[j]) * m[j];
    if (dir) {
      auto& dc = d_contrib[i];
      dc.resize(out_dim);
      for (std::size_t j = 0; j < out_dim; ++j) {
        const double ej = gate ? e[0] : e[j];
        const double dej = gate ? de[0] : de[j];
        dc[j] = dej * m[j] + ej * dm[j];
      }
    }
  }

  std::vector<double> out(out_dim, 0.0);
  std::vector<double> dout(dir ? out_dim : 0, 0.0);
  switch (config.aggregation) {
    case Aggregation::max:
      for (std::size_t j = 0; j < out_dim; ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < k; ++i) {
          if (contrib[i][j] > contrib[best][j]) best = i;
        }
        out[j] = contrib[best][j];
        if (dir) {
          dout[j] = d_contrib[best][j];
          if (kinks) {
            for (std::size_t i = 0; i < k; ++i) {
              if (i == best) continue;
              kinks->observe(contrib[best][j] - contrib[i][j], std::abs(d_contrib[best][j] - d_contrib[i][j]));
            }
          }
        }
      }
      break;
    case Aggregation::sum:
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < out_dim; ++j) {
          out[j] += contrib[i][j];
          if (dir) dout[j] += d_contrib[i][j];
        }
      }
      break;
    case Aggregation::weighted_mean: {
      double total = 0.0, d_total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        total += in.node_weights[i];
        if (dir) d_total += dir->node_weights[i];
        for (std::size_t j = 0; j < out_dim; ++j) {
          out[j] += in.node_weights[i] * contrib[i][j];
          if (dir) dout[j] += dir->node_weights[i] * contrib[i][j] + in.node_weights[i] * d_contrib[i][j];
        }
      }
      if (!(total > 0.0)) throw std::invalid_argument("gca_forward: weighted_mean needs positive total weight");
      for (std::size_t j = 0; j < out_dim; ++j) {
        out[j] /= total;
        if (dir) dout[j] = dout[j] / total - out[j] * d_total / total;
      }
      break;
    }
  }
  if (d_out) *d_out = std::move(dout);
  return out;
}

GcaInputs displaced(const GcaInputs& in, const GcaDirection& dir, double step) {
  GcaInputs out = in;
  for (std::size_t i = 0; i < out.node_features.size(); ++i) {
    for (std::size_t j = 0; j < out.node_features[i].size(); ++j) out.node_features[i][j] += step * dir.node_features[i][j];
    out.node_weights[i] += step * dir.node_weights[i];
  }
  return out;
}

GcaDirection random_direction(const GcaInputs& in, Rng& rng) {
  GcaDirection dir;
  dir.node_features.resize(in.node_features.size());
  for (std::size_t i = 0; i < in.node_features.size(); ++i) {
    dir.node_features[i].resize(in.node_features[i].size());
    for (auto& v : dir.node_features[i]) v = rng.normal();
  }
  dir.node_weights.resize(in.node_weights.size());
  for (auto& v : dir.node_weights) v = rng.normal();
  return dir;
}

// --- weight file ---------------------------------------------------------

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  bool next(std::string& tok) {
    while (true) {
      while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
      if (pos_ < line_.size() && line_[pos_] != '#') break;
      if (!std::getline(in_, line_)) return false;
      ++lineno_;
      pos_ = 0;
    }
    const std::size_t start = pos_;
    while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
    tok.assign(line_, start, pos_ - start);
    return true;
  }

  std::string expect_word(const char* what) {
    std::string tok;
    if (!next(tok)) fail(std::string("unexpected end of file, expected ") + what);
    return tok;
  }

  void expect(const char* keyword) {
    const auto tok = expect_word(keyword);
    if (tok != keyword) fail("expected '" + std::string(keyword) + "', got '" + tok + "'");
  }

  double real() {
    const auto tok = expect_word("a number");
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) fail("non-numeric token '" + tok + "'");
    return v;
  }

  std::size_t count() {
    const auto tok = expect_word("an integer");
    std::size_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) fail("expected an integer, got '" + tok + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw DataError(msg, lineno_); }

  std::size_t line() const { return lineno_; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t pos_ = 0;
  std::size_t lineno_ = 0;
};

Activation parse_activation(const TokenReader& r, const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  r.fail("unknown activation '" + s + "'");
}

MlpSpec read_mlp(TokenReader& r, const char* name) {
  r.expect("mlp");
  r.expect(name);
  r.expect("dims");
  const std::size_t n_dims = r.count();
  if (n_dims < 2) r.fail("an MLP needs at least two dims");
  std::vector<std::size_t> dims(n_dims);
  for (auto& d : dims) {
    d = r.count();
    if (d == 0) r.fail("layer dims must be positive");
  }
  r.expect("activations");
  MlpSpec mlp;
  mlp.layers.resize(n_dims - 1);
  for (std::size_t l = 0; l + 1 < n_dims; ++l) {
    mlp.layers[l].in = dims[l];
    mlp.layers[l].out = dims[l + 1];
    mlp.layers[l].activation = parse_activation(r, r.expect_word("an activation"));
  }
  for (auto& layer : mlp.layers) {
    layer.weights.resize(layer.in * layer.out);
    for (auto& w : layer.weights) w = r.real();
    layer.bias.resize(layer.out);
    for (auto& b : layer.bias) b = r.real();
  }
  r.expect("end");
  return mlp;
}

void write_mlp(std::ostream& out, const char* name, const MlpSpec& mlp) {
  char buf[32];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, res.ptr - buf);
  };
  out << "mlp " << name << "\ndims " << (mlp.layers.size() + 1) << ' ' << mlp.input_dim();
  for (const auto& l : mlp.layers) out << ' ' << l.out;
  out << "\nactivations";
  for (const auto& l : mlp.layers) out << ' ' << to_string(l.activation);
  out << '\n';
  for (const auto& l : mlp.layers) {
    for (std::size_t row = 0; row < l.out; ++row) {
      for (std::size_t col = 0; col < l.in; ++col) {
        if (col) out << ' ';
        put(l.weights[row * l.in + col]);
      }
      out << '\n';
    }
    for (std::size_t j = 0; j < l.out; ++j) {
      if (j) out << ' ';
      put(l.bias[j]);
    }
    out << '\n';
  }
  out << "end\n";
}

MlpSpec seeded_mlp(const std::vector<std::size_t>& dims, Activation hidden, Rng& rng) {
  MlpSpec mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.activation = l + 2 == dims.size() ? Activation::identity : hidden;
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
    layer.weights.resize(layer.in * layer.out);
    for (auto& w : layer.weights) w = rng.uniform_real(-scale, scale);
    layer.bias.resize(layer.out);
    for (auto& b : layer.bias) b = rng.uniform_real(-0.1, 0.1);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

}  // namespace

void KinkMonitor::observe(double margin, double rate) {
  if (rate > 0.0) ratio = std::min(ratio, std::abs(margin) / rate);
}

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::max: return "max";
    case Aggregation::sum: return "sum";
    case Aggregation::weighted_mean: return "weighted_mean";
  }
  return "?";
}

std::string_view to_string(Pooling p) { return p == Pooling::max ? "max" : "mean"; }

void MlpSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("MLP has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.in == 0 || layer.out == 0) throw std::invalid_argument("MLP layer with zero width");
    if (layer.weights.size() != layer.in * layer.out) throw std::invalid_argument("MLP weight matrix has wrong size");
    if (layer.bias.size() != layer.out) throw std::invalid_argument("MLP bias has wrong size");
    if (l > 0 && layers[l - 1].out != layer.in) {
      throw std::invalid_argument("MLP layer " + std::to_string(l) + " input " + std::to_string(layer.in) +
                                  " does not match previous output " + std::to_string(layers[l - 1].out));
    }
  }
}

std::vector<double> MlpSpec::forward(std::span<const double> x) const {
  check_dims(x.size(), input_dim(), "MLP input");
  std::vector<double> cur(x.begin(), x.end()), next;
  for (const auto& layer : layers) {
    next.assign(layer.out, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      double z = layer.bias[r];
      const double* w = layer.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) z += w[c] * cur[c];
      next[r] = (layer.activation == Activation::relu && z < 0.0) ? 0.0 : z;
    }
    cur.swap(next);
  }
  return cur;
}

std::vector<double> MlpSpec::forward_tangent(std::span<const double> x, std::span<const double> dx,
                                             std::vector<double>& dy, KinkMonitor* kinks) const {
  check_dims(x.size(), input_dim(), "MLP input");
  check_dims(dx.size(), input_dim(), "MLP tangent");
  std::vector<double> cur(x.begin(), x.end()), dcur(dx.begin(), dx.end()), next, dnext;
  for (const auto& layer : layers) {
    next.assign(layer.out, 0.0);
    dnext.assign(layer.out, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      double z = layer.bias[r];
      double dz = 0.0;
      const double* w = layer.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) {
        z += w[c] * cur[c];
        dz += w[c] * dcur[c];
      }
      if (layer.activation == Activation::relu) {
        if (kinks) kinks->observe(z, std::abs(dz));
        next[r] = z < 0.0 ? 0.0 : z;
        dnext[r] = z < 0.0 ? 0.0 : dz;
      } else {
        next[r] = z;
        dnext[r] = dz;
      }
    }
    cur.swap(next);
    dcur.swap(dnext);
  }
  dy = std::move(dcur);
  return cur;
}

MlpSpec MlpSpec::identity(std::size_t dim) {
  DenseLayer layer;
  layer.in = layer.out = dim;
  layer.weights.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) layer.weights[i * dim + i] = 1.0;
  layer.bias.assign(dim, 0.0);
  MlpSpec mlp;
  mlp.layers.push_back(std::move(layer));
  return mlp;
}

void GcaConfig::validate() const {
  transform.validate();
  geo.validate();
  sem.validate();
  fuse.validate();
  check_dims(geo.input_dim(), geo_input_dim(), "geo MLP input");
  check_dims(sem.input_dim(), 2 * feature_dim(), "sem MLP input");
  check_dims(fuse.input_dim(), geo.output_dim() + sem.output_dim(), "fuse MLP input");
  if (fuse.output_dim() != 1 && fuse.output_dim() != transform.output_dim()) {
    throw std::invalid_argument("fuse MLP output " + std::to_string(fuse.output_dim()) +
                                " must be 1 or match transform output " + std::to_string(transform.output_dim()));
  }
}

GcaInputs gather_inputs(const PointCloud& cloud, const PointGroup& group, std::span<const PointIndex> context) {
  GcaInputs in;
  in.center = group.center_position;
  for (auto i : group.nodes.nodes) {
    const auto& p = cloud.points.at(i);
    in.node_positions.push_back(p.position);
    in.node_weights.push_back(p.coverage_weight);
    in.node_features.push_back(p.features);
  }
  for (auto i : context) in.context_features.push_back(cloud.points.at(i).features);
  return in;
}

std::vector<double> grid_context_pool(std::span<const std::vector<double>> features, Pooling pooling) {
  if (features.empty()) throw std::invalid_argument("grid_context_pool: empty context");
  const std::size_t dim = features.front().size();
  std::vector<double> out(features.front());
  for (std::size_t i = 1; i < features.size(); ++i) {
    check_dims(features[i].size(), dim, "context feature");
    for (std::size_t j = 0; j < dim; ++j) {
      if (pooling == Pooling::max) out[j] = std::max(out[j], features[i][j]); else out[j] += features[i][j];
    }
  }
  if (pooling == Pooling::mean) {
    for (auto& v : out) v /= static_cast<double>(features.size());
  }
  return out;
}

std::vector<double> edge_attention(const Vec3& chi_c, const Vec3& chi_i, double w_i,
                                   std::span<const double> f_cxt, std::span<const double> f_i,
                                   const GcaConfig& config) {
  check_dims(f_cxt.size(), config.feature_dim(), "context feature");
  check_dims(f_i.size(), config.feature_dim(), "node feature");
  const auto g = config.geo.forward(geo_input(chi_c, chi_i, w_i, config.relative_geo));
  const auto s = config.sem.forward(concat(f_cxt, f_i));
  return config.fuse.forward(concat(g, s));
}

std::vector<double> gca_forward(const GcaInputs& inputs, const GcaConfig& config) {
  return evaluate(inputs, config, nullptr, nullptr, nullptr);
}

std::vector<double> gca_directional_derivative(const GcaInputs& inputs, const GcaDirection& direction,
                                               const GcaConfig& config, KinkMonitor* kinks) {
  const std::size_t k = inputs.node_features.size();
  if (direction.node_features.size() != k || direction.node_weights.size() != k) {
    throw std::invalid_argument("gca_directional_derivative: direction does not match inputs");
  }
  for (std::size_t i = 0; i < k; ++i) check_dims(direction.node_features[i].size(), config.feature_dim(), "direction");
  std::vector<double> d;
  evaluate(inputs, config, &direction, &d, kinks);
  return d;
}

FiniteDiffReport finite_diff_check(const GcaConfig& config, const GcaInputs& inputs, double epsilon, Rng& rng,
                                   std::size_t probes) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_check: epsilon must be > 0");
  constexpr std::size_t kMaxRetries = 32;
  // A step of epsilon must stay this many steps away from any kink.
  constexpr double kSafety = 10.0;
  FiniteDiffReport report;
  for (std::size_t p = 0; p < probes; ++p) {
    GcaInputs probe = inputs;
    GcaDirection dir = random_direction(probe, rng);
    KinkMonitor kinks;
    auto analytic = gca_directional_derivative(probe, dir, config, &kinks);
    std::size_t retries = 0;
    while (kinks.ratio < kSafety * epsilon && retries < kMaxRetries) {
      ++retries;
      for (auto& f : probe.node_features) {
        for (auto& v : f) v += 1e-2 * rng.normal();
      }
      dir = random_direction(probe, rng);
      kinks = KinkMonitor{};
      analytic = gca_directional_derivative(probe, dir, config, &kinks);
    }
    report.kink_retries += retries;
    if (kinks.ratio < kSafety * epsilon) report.kink_unresolved = true;

    const auto plus = gca_forward(displaced(probe, dir, epsilon), config);
    const auto minus = gca_forward(displaced(probe, dir, -epsilon), config);
    for (std::size_t j = 0; j < analytic.size(); ++j) {
      const double numeric = (plus[j] - minus[j]) / (2.0 * epsilon);
      const double denom = std::max({1.0, std::abs(analytic[j]), std::abs(numeric)});
      report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic[j] - numeric) / denom);
    }
    ++report.probes;
  }
  return report;
}

GcaConfig seeded_config(const SeededShape& shape, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t h = shape.hidden;
  const std::size_t edge = shape.edge_dim == 0 ? shape.out_dim : shape.edge_dim;
  GcaConfig config;
  config.relative_geo = shape.relative_geo;
  config.aggregation = shape.aggregation;
  config.pooling = shape.pooling;
  config.transform = seeded_mlp({shape.feature_dim, h, shape.out_dim}, shape.activation, rng);
  config.geo = seeded_mlp({config.geo_input_dim(), h, h}, shape.activation, rng);
  config.sem = seeded_mlp({2 * shape.feature_dim, h, h}, shape.activation, rng);
  config.fuse = seeded_mlp({2 * h, h, edge}, shape.activation, rng);
  config.validate();
  return config;
}

void write_config(std::ostream& out, const GcaConfig& config) {
  out << "gridq-gca 1\n";
  out << "aggregation " << to_string(config.aggregation) << '\n';
  out << "pooling " << to_string(config.pooling) << '\n';
  out << "relative_geo " << (config.relative_geo ? 1 : 0) << '\n';
  write_mlp(out, "transform", config.transform);
  write_mlp(out, "geo", config.geo);
  write_mlp(out, "sem", config.sem);
  write_mlp(out, "fuse", config.fuse);
}

GcaConfig read_config(std::istream& in) {
  TokenReader r(in);
  r.expect("gridq-gca");
  if (r.count() != 1) r.fail("unsupported weight file version");
  GcaConfig config;
  r.expect("aggregation");
  const auto agg = r.expect_word("an aggregation");
  if (agg == "max") config.aggregation = Aggregation::max;
  else if (agg == "sum") config.aggregation = Aggregation::sum;
  else if (agg == "weighted_mean") config.aggregation = Aggregation::weighted_mean;
  else r.fail("unknown aggregation '" + agg + "'");
  r.expect("pooling");
  const auto pool = r.expect_word("a pooling");
  if (pool == "max") config.pooling = Pooling::max;
  else if (pool == "mean") config.pooling = Pooling::mean;
  else r.fail("unknown pooling '" + pool + "'");
  r.expect("relative_geo");
  config.relative_geo = r.count() != 0;
  config.transform = read_mlp(r, "transform");
  config.geo = read_mlp(r, "geo");
  config.sem = read_mlp(r, "sem");
  config.fuse = read_mlp(r, "fuse");
  std::string extra;
  if (r.next(extra)) r.fail("trailing content '" + extra + "'");
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("inconsistent weight shapes: ") + e.what());
  }
  return config;
}

}  // namespace gridq::gca
