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

#ifndef EVBLAB_LGMODES_H
#define EVBLAB_LGMODES_H

#include <complex>

namespace evblab::lg {

// Largest |ell| accepted anywhere in the library.
inline constexpr int kMaxAbsEll = 8;

/// Azimuthal index of a p = 0 Laguerre-Gauss mode.
class LGIndex {
   public:
    /// Throws std::invalid_argument when |ell| > kMaxAbsEll.
    explicit LGIndex(int ell);

    int ell() const { return ell_; }
    int abs_ell() const { return ell_ < 0 ? -ell_ : ell_; }

    friend bool operator==(LGIndex, LGIndex) = default;

   private:
    int ell_;
};

/// Radial profile F_ell(r) of LG_{0,ell} with beam waist `waist`, normalised so
/// that the integral of F^2 * 2*pi*r dr over [0, inf) is 1.
class RadialProfile {
   public:
    /// Throws std::invalid_argument unless waist is finite and positive.
    RadialProfile(LGIndex index, double waist);

    LGIndex index() const { return index_; }
    double waist() const { return waist_; }

   private:
    LGIndex index_;
    double waist_;
};

/// F_ell(r) = sqrt(2 / (pi |ell|!)) / w * (sqrt(2) r / w)^|ell| * exp(-r^2 / w^2).
double evaluate(const RadialProfile& profile, double r);

/// F_ell(r) * exp(i ell theta).
std::complex<double> mode_amplitude(const RadialProfile& profile, double r, double theta);

/// Radius of maximal |F_ell|, w * sqrt(|ell| / 2).
double peak_radius(const RadialProfile& profile);

}  // namespace evblab::lg

#endif
