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

#include "evblab/lgmodes.h"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace evblab::lg {

LGIndex::LGIndex(int ell) : ell_(ell) {
    if (ell < -kMaxAbsEll || ell > kMaxAbsEll) {
        throw std::invalid_argument("LG azimuthal index out of range: " + std::to_string(ell));
    }
}

RadialProfile::RadialProfile(LGIndex index, double waist) : index_(index), waist_(waist) {
    if (!std::isfinite(waist) || waist <= 0.0) {
        throw std::invalid_argument("beam waist must be finite and positive");
    }
}

double evaluate(const RadialProfile& profile, double r) {
    if (!std::isfinite(r) || r < 0.0) {
        throw std::invalid_argument("radius must be finite and nonnegative");
    }
    const int m = profile.index().abs_ell();
    const double w = profile.waist();
    const double norm = std::sqrt(2.0 / (std::numbers::pi * std::tgamma(m + 1.0))) / w;
    const double x = std::numbers::sqrt2 * r / w;
    return norm * std::pow(x, m) * std::exp(-(r * r) / (w * w));
}

std::complex<double> mode_amplitude(const RadialProfile& profile, double r, double theta) {
    if (!std::isfinite(theta)) {
        throw std::invalid_argument("azimuth must be finite");
    }
    return std::polar(evaluate(profile, r), profile.index().ell() * theta);
}

double peak_radius(const RadialProfile& profile) {
    return profile.waist() * std::sqrt(profile.index().abs_ell() / 2.0);
}

}  // namespace evblab::lg
