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

#ifndef EVBLAB_POLARIMETRY_H
#define EVBLAB_POLARIMETRY_H

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evblab/qplate_state.h"

namespace evblab {

/// A two-photon analyzer setting such as "HV" or "AR" (signal first).
class MeasurementSetting {
   public:
    /// Throws std::invalid_argument unless `label` is two characters from HVDALR.
    static MeasurementSetting parse(std::string_view label);
    MeasurementSetting(PolBasis s, PolBasis i);

    const std::string& label() const { return label_; }
    PolBasis pol_s() const { return pol_s_; }
    PolBasis pol_i() const { return pol_i_; }
    Eigen::Vector2cd proj_s() const { return jones(pol_s_); }
    Eigen::Vector2cd proj_i() const { return jones(pol_i_); }
    /// proj_s (x) proj_i in the linear two-photon basis.
    TwoQubit projector() const;

    friend bool operator==(const MeasurementSetting& a, const MeasurementSetting& b) { return a.label_ == b.label_; }

   private:
    PolBasis pol_s_;
    PolBasis pol_i_;
    std::string label_;
};

/// Ordered set of 16 settings. The construction rejects sets whose design
/// matrix is singular.
class TomographySet {
   public:
    /// Throws ConfigurationError for duplicate labels, a count other than 16,
    /// or a tomographically incomplete set.
    explicit TomographySet(std::vector<MeasurementSetting> settings);
    static TomographySet from_labels(std::span<const std::string> labels);

    const std::vector<MeasurementSetting>& settings() const { return settings_; }
    std::size_t size() const { return settings_.size(); }
    std::optional<std::size_t> index_of(std::string_view label) const;

    /// Rows map the 16 real Pauli coordinates s of rho = (1/4) sum s_k sigma_k
    /// to the setting probabilities <pi|rho|pi>.
    const Eigen::Matrix<double, 16, 16>& design_matrix() const { return design_; }
    double condition_number() const { return condition_; }

    /// Indices of four settings forming a complete orthogonal product basis
    /// {a, a_perp} x {b, b_perp}, used for flux normalisation.
    const std::array<std::size_t, 4>& flux_subset() const { return flux_subset_; }

   private:
    std::vector<MeasurementSetting> settings_;
    Eigen::Matrix<double, 16, 16> design_;
    double condition_ = 0.0;
    std::array<std::size_t, 4> flux_subset_{};
};

/// {H, V, A, R} (signal) x {H, V, A, L} (idler), row-major: "HH", "HV", ..., "RL".
const TomographySet& standard_set();

/// The 16 two-qubit Pauli products sigma_a (x) sigma_b, a major.
const std::array<Eigen::Matrix4cd, 16>& pauli_basis();

/// |<proj_s proj_i | psi(x)>|^2.
double coincidence_density(const ModeSuperposition& state, const MeasurementSetting& setting, const TransversePoint& x);
double coincidence_density(const LocalSpinorField& field, const MeasurementSetting& setting, const TransversePoint& x);

struct PolarBinning;

/// Analytic bin-integrated coincidence counts (real-valued) for one setting.
struct ExpectedHistogram {
    std::string label;
    Eigen::MatrixXd counts_theta;  // n_theta x n_theta, row = signal bin
    Eigen::MatrixXd counts_r;      // n_r x n_r
    double total = 0.0;            // sum over all bins within r_max
};

/// Bin-integrated coincidence_density scaled by `n_pairs` incident pairs.
/// Angular bin integrals are exact; radii use `radial_nodes` Gauss-Legendre
/// points per radial bin. werner_p < 1 mixes in white polarization noise with
/// the same spatial profile: p |<pi|psi>|^2 + (1 - p) |psi|^2 / 4.
ExpectedHistogram expected_histogram(const ModeSuperposition& state, const MeasurementSetting& setting,
                                     const PolarBinning& binning, double n_pairs, double werner_p = 1.0,
                                     std::size_t radial_nodes = 16);

}  // namespace evblab

#endif
