// Copyright 2026 The evblab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVBLAB_EXPORT_H
#define EVBLAB_EXPORT_H

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "evblab/coincidence.h"
#include "evblab/qplate_state.h"
#include "evblab/tomography.h"
#include "json.hpp"

namespace evblab::io {

using Json = nlohmann::ordered_json;

/// Writes `text` to `path`, replacing it. Throws std::runtime_error on failure.
void write_text(const std::filesystem::path& path, std::string_view text);
/// Throws FormatError naming the file when it cannot be read.
std::string read_text(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// One row per matrix row, full round-trip precision.
std::string matrix_csv(const Eigen::MatrixXd& m);

/// Binary 8-bit PGM (P5), one pixel per cell, row = matrix row. Values are
/// mapped linearly from [lo, hi] onto [0, 255] and clamped.
std::string pgm_image(const Eigen::MatrixXd& m, double lo, double hi);

/// Bin-centre (theta_s, theta_i) cells placed on a torus of radii (major, minor):
/// theta_s runs around the major circle, theta_i around the tube.
/// Columns: theta_s, theta_i, x, y, z, then one column per named map.
std::string torus_csv(std::span<const std::pair<std::string, Eigen::MatrixXd>> maps, double major = 2.0,
                      double minor = 1.0);

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json count_matrix_to_json(const CountMatrix& m);
CountMatrix count_matrix_from_json(const Json& j);

Json histogram_to_json(const CoincidenceHistogram& h);
/// Throws FormatError naming `source` on a malformed document.
CoincidenceHistogram histogram_from_json(const Json& j, std::string_view source);

/// Flat row-major real and imaginary parts.
Json density_to_json(const DensityMatrix& rho);
Json bell_to_json(const BellProbabilities& b);
Json bell_maps_to_json(const BellMaps& maps);
BellMaps bell_maps_from_json(const Json& j, std::string_view source);
Json tomography_to_json(const AngularTomography& t);

}  // namespace evblab::io

#endif
