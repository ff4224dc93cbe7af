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

#include <filesystem>
#include <iosfwd>

#include "gridq/types.hpp"

namespace gridq {

// ASCII: one point per line, "x y z [f0 f1 ...]", '#' lines and blank lines
// ignored. Every line must carry the same number of values.
//
// Binary: magic "PCF1", u32 N, u32 feature_dim, then N * (3 + feature_dim)
// float32 values; all little-endian.
//
// Both readers throw DataError (with a 1-based line number for ASCII).
PointCloud read_ascii_points(std::istream& in);
PointCloud read_binary_points(std::istream& in);

// Sniffs the magic and dispatches to the matching reader.
PointCloud read_point_file(const std::filesystem::path& path);

void write_ascii_points(std::ostream& out, const PointCloud& cloud);
void write_binary_points(std::ostream& out, const PointCloud& cloud);

}  // namespace gridq
