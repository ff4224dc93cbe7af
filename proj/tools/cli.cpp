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
#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "gridq/bench.hpp"
#include "gridq/center_sampling.hpp"
#include "gridq/errors.hpp"
#include "gridq/gca.hpp"
#include "gridq/grouping.hpp"
#include "gridq/metrics.hpp"
#include "gridq/point_io.hpp"
#include "gridq/synth.hpp"
#include "gridq/voxel_index.hpp"

namespace gridq::cli {

namespace {

// Bad flag values detected after CLI11 parsing; reported as usage errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputFlags {
  std::string in_path;
  std::string gen;
  std::optional<std::size_t> n;
  std::uint64_t seed = 0;
};

struct StructureFlags {
  std::string voxel_size;
  double points_per_voxel = 2.0;
  std::size_t M = 0;
  std::size_t K = 0;
  std::size_t n_v = 0;
  int radius = 1;
  double beta = 0.0;
  std::string policy = "repeat";
  std::string retention = "reservoir";
  std::string sampler = "cas";
  std::string querier = "cube";
  std::string ball_preset = "half-diagonal";
  std::optional<double> ball_radius;
  bool keep_sampled_center = false;
  unsigned threads = 1;
};

struct BenchFlags {
  std::string preset;
  std::vector<std::string> grid;
  std::vector<std::string> methods;
  std::size_t reps = 5;
  std::size_t warmups = 2;
  bool parallel = false;
  std::string format = "csv";
};

struct GcaFlags {
  std::string weights;
  std::optional<std::uint64_t> seeded;
  std::string activation = "relu";
  std::string aggregation = "max";
  std::string pooling = "max";
  std::size_t feature_dim = 4;
  std::size_t hidden = 16;
  std::size_t out_dim = 8;
  std::size_t edge_dim = 0;
  bool relative_geo = false;
  std::string dump_weights;
  std::size_t groups = 16;
  std::size_t probes = 10;
  double epsilon = 1e-5;
};

struct Flags {
  InputFlags input;
  StructureFlags structure;
  BenchFlags bench;
  GcaFlags gca;
  std::string out_path;
  std::string format = "ascii";
};

// Sink for --out, falling back to the caller's stream.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback, bool binary = false) : stream_(&fallback) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path, binary ? std::ios::binary : std::ios::out);
    if (!*file_) throw DataError("cannot open output file " + path);
    stream_ = file_.get();
  }
  std::ostream& get() { return *stream_; }
  void close() {
    if (file_) {
      file_->close();
      if (!*file_) throw DataError("failed writing output file");
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

std::string check_sampler(const std::string& s) {
  return parse_sampler(s) ? std::string{} : "unknown sampler '" + s + "'";
}

std::string check_querier(const std::string& s) {
  return parse_querier(s) ? std::string{} : "unknown querier '" + s + "'";
}

PointCloud load_cloud(const InputFlags& f) {
  if (!f.in_path.empty() && !f.gen.empty()) throw UsageError("--in and --gen are mutually exclusive");
  if (!f.in_path.empty()) {
    auto cloud = read_point_file(f.in_path);
    const auto report = validate_cloud(cloud);
    if (!report.ok()) throw DataError("invalid point " + std::to_string(report.violations.front().index) + ": " +
                                      report.violations.front().message);
    return cloud;
  }
  if (f.gen.empty()) throw UsageError("one of --in or --gen is required");
  GenSpec spec;
  try {
    spec = parse_gen_spec(f.gen);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto n = f.n ? f.n : spec.N;
  if (!n) throw UsageError("generator spec '" + f.gen + "' has no point count; pass --n");
  return synth_cloud(spec.kind, *n, spec.params, f.seed);
}

Vec3 parse_voxel_size(const std::string& text, const PointCloud* cloud, double points_per_voxel) {
  if (text == "auto") {
    if (!cloud) throw UsageError("--voxel-size auto needs a point cloud");
    const double e = suggest_voxel_edge(*cloud, points_per_voxel);
    return {e, e, e};
  }
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size() || !(v > 0.0) || !std::isfinite(v)) {
      throw UsageError("bad --voxel-size '" + text + "'");
    }
    parts.push_back(v);
  }
  if (parts.size() == 1) return {parts[0], parts[0], parts[0]};
  if (parts.size() == 3) return {parts[0], parts[1], parts[2]};
  throw UsageError("--voxel-size takes one value, three comma-separated values, or 'auto'");
}

BallRadiusPreset parse_ball_preset(const std::string& s) {
  if (s == "half-diagonal") return BallRadiusPreset::half_diagonal;
  if (s == "volume-matched") return BallRadiusPreset::volume_matched;
  throw UsageError("unknown ball preset '" + s + "'");
}

SamplingConfig make_config(const StructureFlags& f, const PointCloud& cloud, std::uint64_t seed) {
  SamplingConfig c;
  c.voxel_size = parse_voxel_size(f.voxel_size, &cloud, f.points_per_voxel);
  c.M = f.M;
  c.K = f.K;
  c.n_v = f.n_v;
  c.neighborhood_radius = f.radius;
  c.beta = f.beta;
  c.seed = seed;
  if (f.policy == "repeat") c.short_group_policy = ShortGroupPolicy::repeat;
  else if (f.policy == "reject") c.short_group_policy = ShortGroupPolicy::reject;
  else throw UsageError("unknown short-group policy '" + f.policy + "'");
  if (f.retention == "reservoir") c.retention = RetentionPolicy::reservoir;
  else if (f.retention == "first-come") c.retention = RetentionPolicy::first_come;
  else throw UsageError("unknown retention policy '" + f.retention + "'");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

void add_input_flags(CLI::App* app, InputFlags& f) {
  app->add_option("--in", f.in_path, "Point file (ASCII or PCF1 binary)");
  app->add_option("--gen", f.gen, "Generator spec, e.g. uniform:1000 or gaussian:8,0.05,4096");
  app->add_option("--n", f.n, "Point count for the generator");
}

void add_structure_flags(CLI::App* app, StructureFlags& f, bool need_mk) {
  auto* vs = app->add_option("--voxel-size", f.voxel_size, "Voxel edge: v, vx,vy,vz, or auto");
  app->add_option("--ppv", f.points_per_voxel, "Target points per occupied voxel for --voxel-size auto");
  auto* m = app->add_option("--M", f.M, "Number of groups");
  app->add_option("--n-v", f.n_v, "Per-voxel storage cap (0: use K)");
  app->add_option("--radius", f.radius, "Voxel neighborhood radius");
  app->add_option("--beta", f.beta, "Over-coverage penalty for CAS");
  app->add_option("--retention", f.retention, "reservoir | first-come");
  app->add_option("--threads", f.threads, "Worker threads");
  if (need_mk) {
    vs->required();
    m->required();
  }
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// --- subcommands -----------------------------------------------------------

int cmd_index(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto cloud = load_cloud(f.input);
  auto s = f.structure;
  if (s.K == 0) s.K = 1;
  if (s.M == 0) s.M = 1;
  const auto config = make_config(s, cloud, f.input.seed);
  Rng rng(f.input.seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto index = VoxelPointIndex::build(cloud, config, rng, s.threads);
  const double ms = elapsed_ms(t0);

  std::vector<std::size_t> order(index.occupied_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return index.occupied()[a] < index.occupied()[b]; });
  Output sink(f.out_path, out);
  auto& o = sink.get();
  o << "# u v w total stored\n";
  for (auto ord : order) {
    const auto& v = index.occupied()[ord];
    o << v.u << ' ' << v.v << ' ' << v.w << ' ' << index.total_at(ord) << ' ' << index.bucket_at(ord).size() << '\n';
  }
  sink.close();
  err << "points=" << cloud.size() << " occupied=" << index.occupied_count() << " stored=" << index.stored_count()
      << " voxel=" << config.voxel_size[0] << ',' << config.voxel_size[1] << ',' << config.voxel_size[2]
      << " time_ms=" << std::fixed << std::setprecision(3) << ms << '\n';
  return kOk;
}

int cmd_sample(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto cloud = load_cloud(f.input);
  auto s = f.structure;
  if (s.K == 0) s.K = 1;
  const auto config = make_config(s, cloud, f.input.seed);
  const auto sampler = *parse_sampler(s.sampler);
  Rng rng(f.input.seed);
  const auto t0 = std::chrono::steady_clock::now();
  CenterSelection sel;
  if (is_voxel_sampler(sampler)) {
    Rng index_rng = rng.split(0);
    const auto index = VoxelPointIndex::build(cloud, config, index_rng, s.threads);
    Rng sampler_rng = rng.split(1);
    switch (sampler) {
      case Sampler::rvs: sel = rvs(index, config.M, sampler_rng); break;
      case Sampler::cas: sel = cas(index, config.M, config.beta, sampler_rng); break;
      default: sel = naive_grid(index, config.M, sampler_rng); break;
    }
  } else {
    Rng sampler_rng = rng.split(1);
    sel = sampler == Sampler::rps ? rps(cloud, config.M, sampler_rng) : fps(cloud, config.M, sampler_rng);
  }
  const double ms = elapsed_ms(t0);

  Output sink(f.out_path, out);
  auto& o = sink.get();
  if (is_voxel_sampler(sampler)) {
    for (const auto& v : sel.voxels) o << v.u << ' ' << v.v << ' ' << v.w << '\n';
  } else {
    for (auto i : sel.points) o << i << '\n';
  }
  sink.close();
  err << "sampler=" << to_string(sampler) << " requested=" << sel.requested << " effective=" << sel.effective()
      << " time_ms=" << std::fixed << std::setprecision(3) << ms << '\n';
  if (sel.effective() < sel.requested) {
    err << "warning: requested M=" << sel.requested << " but only " << sel.effective() << " centers available\n";
  }
  return kOk;
}

int cmd_group(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto cloud = load_cloud(f.input);
  const auto& s = f.structure;
  const auto config = make_config(s, cloud, f.input.seed);
  GroupingOptions opts;
  opts.sampler = *parse_sampler(s.sampler);
  opts.querier = *parse_querier(s.querier);
  opts.ball_preset = parse_ball_preset(s.ball_preset);
  opts.ball_radius = s.ball_radius;
  opts.keep_sampled_center = s.keep_sampled_center;
  opts.threads = s.threads;
  Rng rng(f.input.seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = cagq(cloud, config, opts, rng);
  const double ms = elapsed_ms(t0);
  const double coverage = occupied_space_coverage(cloud, result, config.voxel_size);

  Output sink(f.out_path, out);
  write_groups(sink.get(), result);
  sink.close();
  print_warnings(err, result.warnings);
  err << "M_effective=" << result.effective << " groups=" << result.groups.size() << " rejected=" << result.rejected
      << std::fixed << std::setprecision(2) << " coverage=" << coverage << "%" << std::setprecision(3)
      << " time_ms=" << ms << '\n';
  return kOk;
}

std::vector<GridCell> parse_grid(const std::vector<std::string>& tokens) {
  std::vector<GridCell> cells;
  std::optional<GridCell> cur;
  int seen = 0;
  auto flush = [&] {
    if (!cur) return;
    if (seen != 7) throw UsageError("grid cell needs N=, M= and K=");
    cells.push_back(*cur);
    cur.reset();
    seen = 0;
  };
  for (const auto& tok : tokens) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq + 1 == tok.size()) throw UsageError("bad grid token '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    std::size_t value = 0;
    try {
      std::size_t used = 0;
      value = std::stoull(tok.substr(eq + 1), &used);
      if (used != tok.size() - eq - 1) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("bad grid value in '" + tok + "'");
    }
    const int bit = key == "N" ? 1 : key == "M" ? 2 : key == "K" ? 4 : 0;
    if (bit == 0) throw UsageError("unknown grid key '" + key + "'");
    if (seen & bit) flush();
    if (!cur) cur = GridCell{};
    (bit == 1 ? cur->N : bit == 2 ? cur->M : cur->K) = value;
    seen |= bit;
  }
  flush();
  return cells;
}

int cmd_bench(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto& b = f.bench;
  std::vector<GridCell> grid;
  if (!b.preset.empty()) {
    if (b.preset != "table2") throw UsageError("unknown preset '" + b.preset + "'");
    if (!b.grid.empty()) throw UsageError("--preset and --grid are mutually exclusive");
    grid = table2_grid();
  } else {
    if (b.grid.empty()) throw UsageError("one of --preset or --grid is required");
    grid = parse_grid(b.grid);
  }
  std::vector<Combo> combos;
  if (b.methods.empty()) {
    combos = table2_combos();
  } else {
    for (const auto& m : b.methods) {
      const auto c = parse_combo(m);
      if (!c) throw UsageError("bad method '" + m + "', expected sampler+querier");
      combos.push_back(*c);
    }
  }

  CloudSource source;
  if (!f.input.in_path.empty()) {
    if (!f.input.gen.empty()) throw UsageError("--in and --gen are mutually exclusive");
    source.pool = std::make_shared<PointCloud>(load_cloud(f.input));
  } else {
    try {
      source.generator = parse_gen_spec(f.input.gen.empty() ? "gaussian:8" : f.input.gen);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  SweepOptions opts;
  opts.reps = b.reps;
  opts.warmups = b.warmups;
  opts.seed = f.input.seed;
  opts.points_per_voxel = f.structure.points_per_voxel;
  opts.neighborhood_radius = f.structure.radius;
  opts.ball_preset = parse_ball_preset(f.structure.ball_preset);
  opts.parallel = b.parallel;
  if (!f.structure.voxel_size.empty() && f.structure.voxel_size != "auto") {
    opts.voxel_size = parse_voxel_size(f.structure.voxel_size, nullptr, opts.points_per_voxel);
  }
  if (b.reps < 3) throw UsageError("--reps must be >= 3");
  if (b.format != "csv" && b.format != "table") throw UsageError("--format must be csv or table");

  std::vector<std::string> warnings;
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = run_sweep(source, grid, combos, opts, &warnings);
  const double ms = elapsed_ms(t0);
  Output sink(f.out_path, out);
  if (b.format == "csv") write_csv(sink.get(), records); else write_table_report(sink.get(), records);
  sink.close();
  print_warnings(err, warnings);
  err << "rows=" << records.size() << " cells=" << grid.size() << " methods=" << combos.size()
      << " time_ms=" << std::fixed << std::setprecision(1) << ms << '\n';
  return kOk;
}

int cmd_gen(const Flags& f, std::ostream& out, std::ostream& err) {
  if (!f.input.in_path.empty()) throw UsageError("gen does not read --in");
  if (f.format != "ascii" && f.format != "binary") throw UsageError("--format must be ascii or binary");
  const auto cloud = load_cloud(f.input);
  Output sink(f.out_path, out, f.format == "binary");
  if (f.format == "ascii") write_ascii_points(sink.get(), cloud); else write_binary_points(sink.get(), cloud);
  sink.close();
  err << "points=" << cloud.size() << '\n';
  return kOk;
}

// --- gca-check ---------------------------------------------------------------

bool all_identity(const gca::GcaConfig& c) {
  for (const auto* mlp : {&c.transform, &c.geo, &c.sem, &c.fuse})
    for (const auto& l : mlp->layers)
      if (l.activation != gca::Activation::identity) return false;
  return true;
}

gca::GcaConfig load_gca_config(const GcaFlags& g) {
  if (!g.weights.empty() && g.seeded) throw UsageError("--weights and --seeded-weights are mutually exclusive");
  if (!g.weights.empty()) {
    std::ifstream in(g.weights);
    if (!in) throw DataError("cannot open weight file " + g.weights);
    return gca::read_config(in);
  }
  if (!g.seeded) throw UsageError("one of --weights or --seeded-weights is required");
  gca::SeededShape shape;
  shape.feature_dim = g.feature_dim;
  shape.hidden = g.hidden;
  shape.out_dim = g.out_dim;
  shape.edge_dim = g.edge_dim;
  shape.relative_geo = g.relative_geo;
  if (g.activation == "relu") shape.activation = gca::Activation::relu;
  else if (g.activation == "identity") shape.activation = gca::Activation::identity;
  else throw UsageError("unknown activation '" + g.activation + "'");
  if (g.aggregation == "max") shape.aggregation = gca::Aggregation::max;
  else if (g.aggregation == "sum") shape.aggregation = gca::Aggregation::sum;
  else if (g.aggregation == "weighted_mean") shape.aggregation = gca::Aggregation::weighted_mean;
  else throw UsageError("unknown aggregation '" + g.aggregation + "'");
  if (g.pooling == "max") shape.pooling = gca::Pooling::max;
  else if (g.pooling == "mean") shape.pooling = gca::Pooling::mean;
  else throw UsageError("unknown pooling '" + g.pooling + "'");
  if (shape.feature_dim == 0 || shape.hidden == 0 || shape.out_dim == 0) throw UsageError("dims must be positive");
  return gca::seeded_config(shape, *g.seeded);
}

int cmd_gca_check(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto& g = f.gca;
  const auto config = load_gca_config(g);
  if (!g.dump_weights.empty()) {
    Output dump(g.dump_weights, err);
    gca::write_config(dump.get(), config);
    dump.close();
  }
  const std::uint64_t seed = f.input.seed;
  if (g.groups == 0 || g.probes == 0 || !(g.epsilon > 0.0)) throw UsageError("--groups, --probes and --epsilon must be positive");

  // Real groups from a clustered cloud carrying random features.
  auto cloud = synth_cloud(CloudKind::gaussian_clusters, 2000, {}, seed);
  Rng feat_rng = Rng(seed).split(7);
  for (auto& p : cloud.points) {
    p.features.resize(config.feature_dim());
    for (auto& v : p.features) v = feat_rng.normal();
  }
  SamplingConfig sc;
  const double e = suggest_voxel_edge(cloud, 2.0);
  sc.voxel_size = {e, e, e};
  sc.M = g.groups;
  sc.K = 16;
  GroupingOptions opts;
  Rng rng(seed);
  const auto grouped = cagq(cloud, sc, opts, rng);
  Rng index_rng(seed);
  const auto index = VoxelPointIndex::build(cloud, sc, index_rng);

  std::vector<gca::GcaInputs> inputs;
  for (const auto& group : grouped.groups) {
    const auto hood = index.neighborhood(*group.center_voxel, sc.neighborhood_radius);
    inputs.push_back(gca::gather_inputs(cloud, group, hood.context_point_indices));
  }

  Output sink(f.out_path, out);
  auto& o = sink.get();
  bool all_pass = true;
  auto report = [&](bool pass, const std::string& name, const std::string& detail) {
    all_pass = all_pass && pass;
    o << (pass ? "PASS " : "FAIL ") << name << ' ' << detail << '\n';
  };
  auto fmt = [](double v) {
    std::ostringstream s;
    s << std::scientific << std::setprecision(3) << v;
    return s.str();
  };

  bool shape_ok = true;
  double perm_err = 0.0;
  Rng perm_rng = Rng(seed).split(11);
  for (const auto& in : inputs) {
    const auto base = gca::gca_forward(in, config);
    shape_ok = shape_ok && base.size() == config.output_dim();
    auto p = in;
    std::vector<std::size_t> order(in.node_positions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    perm_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < order.size(); ++i) {
      p.node_positions[i] = in.node_positions[order[i]];
      p.node_weights[i] = in.node_weights[order[i]];
      p.node_features[i] = in.node_features[order[i]];
    }
    perm_rng.shuffle(std::span<std::vector<double>>(p.context_features));
    const auto shuffled = gca::gca_forward(p, config);
    for (std::size_t j = 0; j < base.size() && j < shuffled.size(); ++j) {
      perm_err = std::max(perm_err, std::abs(base[j] - shuffled[j]) / std::max(1.0, std::abs(base[j])));
    }
  }
  report(shape_ok, "shape", "groups=" + std::to_string(inputs.size()) + " out_dim=" + std::to_string(config.output_dim()));
  report(perm_err <= 1e-12, "permutation", "max_rel_diff=" + fmt(perm_err) + " threshold=" + fmt(1e-12));

  bool pool_ok = true;
  for (const auto& in : inputs) {
    const auto& ctx = in.context_features;
    std::vector<double> mx = ctx.front(), mean(ctx.front().size(), 0.0);
    for (const auto& v : ctx)
      for (std::size_t j = 0; j < v.size(); ++j) {
        mx[j] = std::max(mx[j], v[j]);
        mean[j] += v[j];
      }
    const auto pm = gca::grid_context_pool(ctx, gca::Pooling::max);
    const auto pa = gca::grid_context_pool(ctx, gca::Pooling::mean);
    pool_ok = pool_ok && pm == mx;
    for (std::size_t j = 0; j < mean.size(); ++j) {
      pool_ok = pool_ok && std::abs(pa[j] - mean[j] / static_cast<double>(ctx.size())) <= 1e-12 * std::max(1.0, std::abs(pa[j]));
    }
  }
  report(pool_ok, "pooling", "groups=" + std::to_string(inputs.size()));

  const bool linear = all_identity(config);
  const double threshold = linear ? 1e-8 : 1e-4;
  double fd_err = 0.0;
  std::size_t retries = 0;
  bool unresolved = false;
  Rng fd_rng = Rng(seed).split(13);
  for (const auto& in : inputs) {
    const auto r = gca::finite_diff_check(config, in, g.epsilon, fd_rng, g.probes);
    fd_err = std::max(fd_err, r.max_rel_error);
    retries += r.kink_retries;
    unresolved = unresolved || r.kink_unresolved;
  }
  report(fd_err < threshold && !unresolved, "finite_diff",
         "max_rel_error=" + fmt(fd_err) + " threshold=" + fmt(threshold) + " probes=" +
             std::to_string(g.probes * inputs.size()) + " kink_retries=" + std::to_string(retries) +
             (unresolved ? " kink_unresolved" : ""));
  sink.close();
  err << (all_pass ? "all checks passed" : "some checks failed") << '\n';
  return all_pass ? kOk : kInternalError;
}

// --- --config expansion -------------------------------------------------------

// Pulls "--config <file>" out of args and appends the file's key=value pairs
// as flags, skipping keys already given on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args, CLI::App& app) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  {
    std::ifstream probe(path);
    if (!probe) throw DataError("cannot open config file " + path);
  }
  const auto items = CLI::ConfigINI().from_file(path);
  CLI::App* sub = nullptr;
  for (const auto& a : args) {
    for (auto* s : app.get_subcommands({})) {
      if (s->get_name() == a) sub = s;
    }
    if (sub) break;
  }
  if (!sub) throw CLI::CallForHelp();
  auto given = [&](const std::string& name) {
    for (const auto& a : args) {
      if (a == "--" + name || a.rfind("--" + name + "=", 0) == 0) return true;
    }
    return false;
  };
  for (const auto& item : items) {
    if (!item.parents.empty()) throw DataError("config file sections are not supported: " + item.parents.front());
    if (given(item.name)) continue;
    const auto* opt = sub->get_option_no_throw("--" + item.name);
    if (!opt) throw CLI::ExtrasError({"--" + item.name});
    if (opt->get_expected_max() == 0) {
      if (!item.inputs.empty() && item.inputs.front() != "true" && item.inputs.front() != "1") continue;
      args.push_back("--" + item.name);
      continue;
    }
    args.push_back("--" + item.name);
    for (const auto& v : item.inputs) args.push_back(v);
  }
  return args;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Flags f;
  CLI::App app{"Voxel-grid point cloud structuring: index, sample, group, benchmark.", "gridq"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto* index = app.add_subcommand("index", "Build the voxel-point index and list occupied voxels");
  add_input_flags(index, f.input);
  add_structure_flags(index, f.structure, false);
  index->add_option("--K", f.structure.K, "Group size (sets the default storage cap)");
  index->add_option("--seed", f.input.seed, "Random seed");
  index->add_option("--out", f.out_path, "Output file");
  index->get_option("--voxel-size")->required();

  auto* sample = app.add_subcommand("sample", "Select group centers");
  add_input_flags(sample, f.input);
  add_structure_flags(sample, f.structure, true);
  sample->add_option("--sampler", f.structure.sampler, "rps | fps | rvs | cas | naive")->check(check_sampler);
  sample->add_option("--seed", f.input.seed, "Random seed");
  sample->add_option("--out", f.out_path, "Output file");

  auto* group = app.add_subcommand("group", "Sample centers, query nodes and write groups");
  add_input_flags(group, f.input);
  add_structure_flags(group, f.structure, true);
  group->add_option("--K", f.structure.K, "Nodes per group")->required();
  group->add_option("--sampler", f.structure.sampler, "rps | fps | rvs | cas | naive")->required()->check(check_sampler);
  group->add_option("--querier", f.structure.querier, "ball | knn | cube | gknn | gknn-strict")->required()->check(check_querier);
  group->add_option("--seed", f.input.seed, "Random seed")->required();
  group->add_option("--policy", f.structure.policy, "Short groups: repeat | reject");
  group->add_option("--ball-preset", f.structure.ball_preset, "half-diagonal | volume-matched");
  group->add_option("--ball-radius", f.structure.ball_radius, "Explicit ball query radius");
  group->add_flag("--keep-sampled-center", f.structure.keep_sampled_center,
                  "Point samplers: keep the sampled point as the group center");
  group->add_option("--out", f.out_path, "Output file");

  auto* bench = app.add_subcommand("bench", "Coverage and latency sweep, CSV output");
  add_input_flags(bench, f.input);
  bench->add_option("--preset", f.bench.preset, "Condition grid preset: table2");
  bench->add_option("--grid", f.bench.grid, "Cells as N=.. M=.. K=.. (repeatable)")->expected(1, -1);
  bench->add_option("--methods", f.bench.methods, "Comma-separated sampler+querier list")->delimiter(',');
  bench->add_option("--reps", f.bench.reps, "Timed repetitions per cell (>= 3)");
  bench->add_option("--warmups", f.bench.warmups, "Untimed warmup runs per cell");
  bench->add_option("--seed", f.input.seed, "Random seed");
  bench->add_option("--voxel-size", f.structure.voxel_size, "Voxel edge: v, vx,vy,vz, or auto");
  bench->add_option("--ppv", f.structure.points_per_voxel, "Target points per occupied voxel for auto sizing");
  bench->add_option("--radius", f.structure.radius, "Voxel neighborhood radius");
  bench->add_option("--ball-preset", f.structure.ball_preset, "half-diagonal | volume-matched");
  bench->add_flag("--parallel", f.bench.parallel, "Run cells concurrently (latencies flagged)");
  bench->add_option("--format", f.bench.format, "csv | table");
  bench->add_option("--out", f.out_path, "Output file");

  auto* gca_check = app.add_subcommand("gca-check", "Invariant and gradient checks of the aggregation forward pass");
  gca_check->add_option("--weights", f.gca.weights, "Weight file");
  gca_check->add_option("--seeded-weights", f.gca.seeded, "Generate weights from this seed");
  gca_check->add_option("--activation", f.gca.activation, "relu | identity (seeded weights)");
  gca_check->add_option("--aggregation", f.gca.aggregation, "max | sum | weighted_mean (seeded weights)");
  gca_check->add_option("--pooling", f.gca.pooling, "max | mean (seeded weights)");
  gca_check->add_option("--feature-dim", f.gca.feature_dim, "Feature width (seeded weights)");
  gca_check->add_option("--hidden", f.gca.hidden, "Hidden width (seeded weights)");
  gca_check->add_option("--out-dim", f.gca.out_dim, "Output width (seeded weights)");
  gca_check->add_option("--edge-dim", f.gca.edge_dim, "Edge width, 1 for a scalar gate (seeded weights)");
  gca_check->add_flag("--relative-geo", f.gca.relative_geo, "Feed node - center to the geometric MLP");
  gca_check->add_option("--dump-weights", f.gca.dump_weights, "Write the weights in use to this file");
  gca_check->add_option("--groups", f.gca.groups, "Groups to check");
  gca_check->add_option("--probes", f.gca.probes, "Finite-difference probes per group");
  gca_check->add_option("--epsilon", f.gca.epsilon, "Finite-difference step");
  gca_check->add_option("--seed", f.input.seed, "Seed for the probe data");
  gca_check->add_option("--out", f.out_path, "Output file");

  auto* gen = app.add_subcommand("gen", "Write a synthetic point cloud");
  gen->add_option("--gen", f.input.gen, "Generator spec")->required();
  gen->add_option("--n", f.input.n, "Point count");
  gen->add_option("--seed", f.input.seed, "Random seed");
  gen->add_option("--format", f.format, "ascii | binary");
  gen->add_option("--out", f.out_path, "Output file");

  try {
    try {
      auto args = expand_config(raw_args, app);
      std::reverse(args.begin(), args.end());
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << '\n';
      CLI::App* ctx = &app;
      for (auto* s : app.get_subcommands()) ctx = s;
      err << ctx->help();
      return kUsage;
    }

    if (index->parsed()) return cmd_index(f, out, err);
    if (sample->parsed()) return cmd_sample(f, out, err);
    if (group->parsed()) return cmd_group(f, out, err);
    if (bench->parsed()) return cmd_bench(f, out, err);
    if (gca_check->parsed()) return cmd_gca_check(f, out, err);
    if (gen->parsed()) return cmd_gen(f, out, err);
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace gridq::cli
