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
#ifdef GRIDQ_HAVE_CLI

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "gridq/bench.hpp"
#include "gridq/gca.hpp"

namespace gridq::cli {
namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gridq_cli_test_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const std::vector<std::string> kGroupArgs = {"group", "--gen", "uniform:1000", "--M", "100", "--K", "8", "--sampler",
                                             "cas", "--querier", "cube", "--voxel-size", "0.1", "--seed", "7"};

TEST(CliGroup, RepeatedRunsAreByteIdentical) {
  const auto a = invoke(kGroupArgs);
  const auto b = invoke(kGroupArgs);
  ASSERT_EQ(a.code, kOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(count_lines(a.out), 100u);
  EXPECT_NE(a.err.find("M_effective=100"), std::string::npos);
  EXPECT_NE(a.err.find("coverage="), std::string::npos);
  EXPECT_NE(a.err.find("time_ms="), std::string::npos);
}

TEST(CliGroup, ThreadCountDoesNotChangeOutput) {
  for (const char* q : {"cube", "gknn", "ball"}) {
    auto args = kGroupArgs;
    args[10] = q;
    auto many = args;
    many.insert(many.end(), {"--threads", "4"});
    const auto a = invoke(args);
    const auto b = invoke(many);
    ASSERT_EQ(a.code, kOk) << a.err;
    EXPECT_EQ(a.out, b.out) << q;
  }
}

TEST(CliGroup, MissingMIsUsageError) {
  auto args = kGroupArgs;
  args.erase(args.begin() + 3, args.begin() + 5);
  const auto r = invoke(args);
  EXPECT_EQ(r.code, kUsage);
  EXPECT_NE(r.err.find("--M"), std::string::npos);
  EXPECT_NE(r.err.find("Usage:"), std::string::npos);
}

TEST(CliGroup, UnknownFlagIsUsageError) {
  auto args = kGroupArgs;
  args.push_back("--frobnicate");
  EXPECT_EQ(invoke(args).code, kUsage);
  auto bad = kGroupArgs;
  bad[8] = "best";
  EXPECT_EQ(invoke(bad).code, kUsage);
}

TEST(CliGroup, BadTokenOnLineFiveIsDataError) {
  const auto path = temp_file("bad.xyz");
  {
    std::ofstream out(path);
    out << "0 0 0\n1 1 1\n2 2 2\n3 3 3\n4 x 4\n";
  }
  const auto r = invoke({"group", "--in", path.string(), "--M", "1", "--K", "1", "--sampler", "cas", "--querier",
                         "cube", "--voxel-size", "1", "--seed", "1"});
  EXPECT_EQ(r.code, kDataError);
  EXPECT_NE(r.err.find("line 5"), std::string::npos);
  std::filesystem::remove(path);
}

TEST(CliGroup, OutFileMatchesStdout) {
  const auto path = temp_file("groups.txt");
  auto args = kGroupArgs;
  args.insert(args.end(), {"--out", path.string()});
  const auto r = invoke(args);
  ASSERT_EQ(r.code, kOk);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(slurp(path), invoke(kGroupArgs).out);
  std::filesystem::remove(path);
}

TEST(CliGroup, ConfigFileMatchesFlags) {
  const auto path = temp_file("run.cfg");
  {
    std::ofstream out(path);
    out << "# same run as the flags\ngen=uniform:1000\nM=100\nK=8\nsampler=cas\nquerier=cube\nvoxel-size=0.1\nseed=7\n";
  }
  const auto r = invoke({"group", "--config", path.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(r.out, invoke(kGroupArgs).out);
  // Command-line flags win over the file.
  const auto override = invoke({"group", "--config", path.string(), "--M", "20"});
  EXPECT_EQ(count_lines(override.out), 20u);
  std::filesystem::remove(path);
}

TEST(CliGroup, ConfigFileFlags) {
  const auto path = temp_file("flags.cfg");
  {
    std::ofstream out(path);
    out << "gen=uniform:1000\nM=50\nK=8\nsampler=fps\nquerier=ball\nvoxel-size=0.1\nseed=7\n"
        << "keep-sampled-center=true\n";
  }
  const auto r = invoke({"group", "--config", path.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(r.out, invoke({"group", "--gen", "uniform:1000", "--M", "50", "--K", "8", "--sampler", "fps",
                           "--querier", "ball", "--voxel-size", "0.1", "--seed", "7", "--keep-sampled-center"})
                       .out);
  std::filesystem::remove(path);
}

TEST(CliBench, SingleCellSingleRow) {
  const auto r = invoke({"bench", "--grid", "N=1024", "M=8", "K=8", "--methods", "rps+ball", "--reps", "3"});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream in(r.out);
  const auto recs = read_csv(in);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].sampler, "rps");
  EXPECT_EQ(recs[0].N, 1024u);
}

TEST(CliBench, PresetEmitsTwelveConditions) {
  const auto r = invoke({"bench", "--preset", "table2", "--gen", "gaussian:8", "--methods", "cas+cube", "--reps", "3",
                         "--warmups", "0", "--seed", "1"});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream in(r.out);
  const auto recs = read_csv(in);
  const auto grid = table2_grid();
  ASSERT_EQ(recs.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(recs[i].N, grid[i].N);
    EXPECT_EQ(recs[i].M, grid[i].M);
    EXPECT_EQ(recs[i].K, grid[i].K);
  }
}

TEST(CliBench, OutFileMatchesStdoutRowCount) {
  const std::vector<std::string> args = {"bench", "--grid", "N=1024", "M=32", "K=8", "N=2048", "M=64", "K=8",
                                         "--methods", "rvs+cube,cas+cube", "--reps", "3", "--seed", "2"};
  const auto stdout_run = invoke(args);
  ASSERT_EQ(stdout_run.code, kOk) << stdout_run.err;
  const auto path = temp_file("report.csv");
  auto file_args = args;
  file_args.insert(file_args.end(), {"--out", path.string()});
  ASSERT_EQ(invoke(file_args).code, kOk);
  std::ifstream in(path);
  const auto recs = read_csv(in);
  EXPECT_EQ(recs.size(), 4u);
  EXPECT_EQ(count_lines(slurp(path)), count_lines(stdout_run.out));
  std::filesystem::remove(path);
}

TEST(CliBench, MalformedGridIsUsageError) {
  EXPECT_EQ(invoke({"bench", "--grid", "N=1024", "M=8"}).code, kUsage);
  EXPECT_EQ(invoke({"bench", "--grid", "N=1024", "M=8", "Q=8"}).code, kUsage);
  EXPECT_EQ(invoke({"bench", "--grid", "N=abc", "M=8", "K=8"}).code, kUsage);
  EXPECT_EQ(invoke({"bench", "--grid", "N=1024", "M=8", "K=8", "--methods", "cas"}).code, kUsage);
  EXPECT_EQ(invoke({"bench", "--preset", "table9"}).code, kUsage);
}

TEST(CliGcaCheck, SeededLinearConfigPasses) {
  const auto r = invoke({"gca-check", "--seeded-weights", "4", "--activation", "identity", "--aggregation", "sum"});
  EXPECT_EQ(r.code, kOk) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(count_lines(r.out), 4u);
}

TEST(CliGcaCheck, ReluConfigTenProbesPasses) {
  const auto r = invoke({"gca-check", "--seeded-weights", "5", "--probes", "10"});
  EXPECT_EQ(r.code, kOk) << r.out;
  EXPECT_NE(r.out.find("PASS finite_diff max_rel_error="), std::string::npos);
  EXPECT_NE(r.out.find("threshold=1.000e-04"), std::string::npos);
}

TEST(CliGcaCheck, WeightFileRoundTrip) {
  const auto path = temp_file("weights.txt");
  ASSERT_EQ(invoke({"gca-check", "--seeded-weights", "6", "--dump-weights", path.string()}).code, kOk);
  const auto r = invoke({"gca-check", "--weights", path.string()});
  EXPECT_EQ(r.code, kOk) << r.out << r.err;
  std::filesystem::remove(path);
}

TEST(CliGcaCheck, MismatchedDimsIsDataError) {
  auto config = gca::seeded_config({}, 7);
  // A syntactically valid file whose sem MLP expects the wrong input width.
  config.sem = gca::seeded_config({.feature_dim = 3}, 7).sem;
  const auto path = temp_file("bad_weights.txt");
  {
    std::ofstream out(path);
    gca::write_config(out, config);
  }
  const auto r = invoke({"gca-check", "--weights", path.string()});
  EXPECT_EQ(r.code, kDataError);
  EXPECT_NE(r.err.find("sem"), std::string::npos);
  std::filesystem::remove(path);
}

TEST(CliGen, DeterministicAndReadable) {
  const auto a = invoke({"gen", "--gen", "gaussian:4,0.05", "--n", "500", "--seed", "3"});
  const auto b = invoke({"gen", "--gen", "gaussian:4,0.05", "--n", "500", "--seed", "3"});
  ASSERT_EQ(a.code, kOk);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(count_lines(a.out), 500u);
  EXPECT_EQ(invoke({"gen", "--gen", "gaussian:4"}).code, kUsage);
  const auto path = temp_file("cloud.pcf");
  ASSERT_EQ(invoke({"gen", "--gen", "sphere:64", "--format", "binary", "--out", path.string()}).code, kOk);
  EXPECT_EQ(std::filesystem::file_size(path), 12u + 64u * 12u);
  const auto idx = invoke({"index", "--in", path.string(), "--voxel-size", "0.5"});
  EXPECT_EQ(idx.code, kOk) << idx.err;
  std::filesystem::remove(path);
}

TEST(CliSample, MatchesGroupCenters) {
  const auto s = invoke({"sample", "--gen", "uniform:800", "--M", "20", "--voxel-size", "0.1", "--sampler", "rvs",
                         "--seed", "5"});
  ASSERT_EQ(s.code, kOk) << s.err;
  EXPECT_EQ(count_lines(s.out), 20u);
  EXPECT_EQ(invoke({"sample", "--gen", "uniform:800", "--M", "20", "--voxel-size", "0.1", "--sampler", "rvs",
                    "--seed", "5", "--threads", "3"}).out,
            s.out);
}

TEST(Cli, HelpAndMissingSubcommand) {
  const auto help = invoke({"--help"});
  EXPECT_EQ(help.code, kOk);
  EXPECT_NE(help.out.find("gca-check"), std::string::npos);
  EXPECT_EQ(invoke({}).code, kUsage);
  EXPECT_EQ(invoke({"frob"}).code, kUsage);
}

}  // namespace
}  // namespace gridq::cli

#endif  // GRIDQ_HAVE_CLI
