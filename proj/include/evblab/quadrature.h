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

#ifndef EVBLAB_QUADRATURE_H
#define EVBLAB_QUADRATURE_H

#include <cstddef>
#include <vector>

namespace evblab {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped onto [a, b]. Throws std::invalid_argument
/// for n == 0 or a non-finite / empty interval.
QuadratureRule gauss_legendre(std::size_t n, double a, double b);

/// Radial integration grid, in units of the beam waist.
struct RadialQuadrature {
    std::size_t points = 64;
    double r_max_in_waists = 5.0;
};

}  // namespace evblab

#endif
