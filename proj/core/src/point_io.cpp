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

#include "gridq/point_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "gridq/errors.hpp"

namespace gridq {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'C', 'F', '1'};

static_assert(std::endian::native == std::endian::little,
              "binary point files are read by reinterpretation; add byte swapping for big-endian hosts");

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(std::string("truncated binary header: ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

PointCloud read_ascii_points(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest(line);
    const auto first = rest.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || rest[first] == '#') continue;
    values.clear();
    while (true) {
      const auto start = rest.find_first_not_of(" \t\r");
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      const auto end = std::min(rest.find_first_of(" \t\r"), rest.size());
      const std::string_view token = rest.substr(0, end);
      double v = 0.0;
      const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
      if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        throw DataError("non-numeric token '" + std::string(token) + "'", lineno);
      }
      values.push_back(v);
      rest.remove_prefix(end);
    }
    if (values.size() < 3) throw DataError("expected at least 3 coordinates", lineno);
    if (width == 0) {
      width = values.size();
    } else if (values.size() != width) {
      throw DataError("expected " + std::to_string(width) + " values, got " + std::to_string(values.size()),
                      lineno);
    }
    Point p;
    p.position = {values[0], values[1], values[2]};
    p.features.assign(values.begin() + 3, values.end());
    cloud.points.push_back(std::move(p));
  }
  return cloud;
}

PointCloud read_binary_points(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) throw DataError("bad magic, expected PCF1");
  const std::uint32_t n = read_u32(in, "point count");
  const std::uint32_t dim = read_u32(in, "feature dim");
  const std::size_t stride = 3 + static_cast<std::size_t>(dim);
  PointCloud cloud;
  cloud.points.resize(n);
  std::vector<float> row(stride);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(stride * sizeof(float)))) {
      throw DataError("truncated binary payload at point " + std::to_string(i));
    }
    auto& p = cloud.points[i];
    p.position = {row[0], row[1], row[2]};
    p.features.assign(row.begin() + 3, row.end());
  }
  return cloud;
}

PointCloud read_point_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::array<char, 4> head{};
  in.read(head.data(), 4);
  const bool binary = in.gcount() == 4 && head == kMagic;
  in.clear();
  in.seekg(0);
  return binary ? read_binary_points(in) : read_ascii_points(in);
}

void write_ascii_points(std::ostream& out, const PointCloud& cloud) {
  std::string line;
  char buf[32];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    line.append(buf, res.ptr);
  };
  for (const auto& p : cloud.points) {
    line.clear();
    put(p.position[0]);
    for (int a = 1; a < 3; ++a) {
      line.push_back(' ');
      put(p.position[a]);
    }
    for (double f : p.features) {
      line.push_back(' ');
      put(f);
    }
    line.push_back('\n');
    out << line;
  }
}

void write_binary_points(std::ostream& out, const PointCloud& cloud) {
  if (cloud.size() > std::numeric_limits<std::uint32_t>::max()) throw std::length_error("cloud too large");
  const std::size_t dim = cloud.feature_dim();
  out.write(kMagic.data(), 4);
  write_u32(out, static_cast<std::uint32_t>(cloud.size()));
  write_u32(out, static_cast<std::uint32_t>(dim));
  std::vector<float> row(3 + dim);
  for (const auto& p : cloud.points) {
    if (p.features.size() != dim) throw std::invalid_argument("write_binary_points: inconsistent feature dims");
    for (int a = 0; a < 3; ++a) row[a] = static_cast<float>(p.position[a]);
    for (std::size_t f = 0; f < dim; ++f) row[3 + f] = static_cast<float>(p.features[f]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

}  // namespace gridq
