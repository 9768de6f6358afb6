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

#ifndef EVBLAB_QPLATE_STATE_H
#define EVBLAB_QPLATE_STATE_H

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "evblab/quadrature.h"

namespace evblab {

using cplx = std::complex<double>;

/// Default beam waist in camera pixels; a 40x40 ROI holds the |ell| <= 2 modes.
inline constexpr double kDefaultWaistPx = 10.0;

// Single-photon polarization states. Jones vectors in the (H, V) basis:
// L = (1, i)/sqrt2, R = (1, -i)/sqrt2, D = (1, 1)/sqrt2, A = (1, -1)/sqrt2.
enum class PolBasis { H, V, L, R, D, A };

Eigen::Vector2cd jones(PolBasis pol);
char pol_char(PolBasis pol);
std::optional<PolBasis> pol_from_char(char c);
/// The orthogonal partner (H<->V, D<->A, L<->R).
PolBasis orthogonal(PolBasis pol);

/// Half-integer topological charge, stored as the integer 2q.
class TopologicalCharge {
   public:
    /// Throws std::invalid_argument unless 2q is an integer.
    static TopologicalCharge from_value(double q);
    static constexpr TopologicalCharge from_twice(int twice_q) { return TopologicalCharge(twice_q); }

    int twice() const { return twice_q_; }
    double value() const { return twice_q_ / 2.0; }

    friend bool operator==(TopologicalCharge, TopologicalCharge) = default;

   private:
    constexpr explicit TopologicalCharge(int twice_q) : twice_q_(twice_q) {}
    int twice_q_;
};

struct QPlateParams {
    TopologicalCharge q = TopologicalCharge::from_twice(1);
    double delta = 0.0;  // retardation in [0, pi]
    double waist = kDefaultWaistPx;

    /// Validating constructor; throws std::invalid_argument.
    static QPlateParams make(double q, double delta, double waist = kDefaultWaistPx);
    static QPlateParams tuned(double q, double waist = kDefaultWaistPx);
    static QPlateParams partially_tuned(double q, double waist = kDefaultWaistPx);
};

enum class Photon { Signal, Idler };

/// One summand pol_s (x) pol_i (x) LG_{ell_s} (x) LG_{ell_i} with complex weight.
struct ModeTerm {
    PolBasis pol_s = PolBasis::L;  // L or R only
    PolBasis pol_i = PolBasis::L;  // L or R only
    int ell_s = 0;
    int ell_i = 0;
    cplx amp{};

    friend bool operator==(const ModeTerm&, const ModeTerm&) = default;
};

/// Two-photon state as a finite superposition of circular-polarization and
/// LG_{0,ell} basis products. Like terms are merged; the state is unit norm.
class ModeSuperposition {
   public:
    /// Throws std::invalid_argument on non-circular polarizations, non-finite
    /// amplitudes, |ell| beyond the LG bound, bad waists, or norm != 1 (1e-12).
    ModeSuperposition(std::vector<ModeTerm> terms, double waist_s, double waist_i);

    const std::vector<ModeTerm>& terms() const { return terms_; }
    double waist_s() const { return waist_s_; }
    double waist_i() const { return waist_i_; }
    double waist(Photon which) const { return which == Photon::Signal ? waist_s_ : waist_i_; }
    double norm_squared() const;

   private:
    std::vector<ModeTerm> terms_;
    double waist_s_;
    double waist_i_;
};

/// (i/sqrt2)(|L,R> - |R,L>) in the Gaussian mode; equals |psi-> in the H/V basis.
ModeSuperposition epr_state(double waist_s = kDefaultWaistPx, double waist_i = kDefaultWaistPx);

/// First-order q-plate action on one photon:
///   |L, 0> -> cos(d/2)|L, 0> + i sin(d/2)|R, -2q>
///   |R, 0> -> cos(d/2)|R, 0> + i sin(d/2)|L, +2q>
/// The acted-on photon takes the plate's waist. Throws UnsupportedComposition
/// if that photon already carries ell != 0 in any term.
ModeSuperposition apply_qplate(const ModeSuperposition& state, Photon which, const QPlateParams& plate);

/// apply_qplate(apply_qplate(epr_state(), signal, qs), idler, qi).
ModeSuperposition evb_state(const QPlateParams& qs, const QPlateParams& qi);

struct TransversePoint {
    double r_s = 0.0;
    double theta_s = 0.0;
    double r_i = 0.0;
    double theta_i = 0.0;
};

// Two-qubit amplitude vectors are ordered {LL, LR, RL, RR} in the circular
// basis and {HH, HV, VH, VV} in the linear basis; the signal photon is the
// more significant index.
using TwoQubit = Eigen::Vector4cd;

/// Maps circular-basis amplitudes onto the linear basis.
const Eigen::Matrix4cd& circular_to_linear();

/// Precomputed evaluator for the position-dependent two-qubit amplitude of a state.
class LocalSpinorField {
   public:
    explicit LocalSpinorField(const ModeSuperposition& state);

    /// Un-normalised amplitude in the circular basis. Throws std::invalid_argument
    /// for negative or non-finite radii and non-finite angles.
    TwoQubit circular(const TransversePoint& x) const;
    TwoQubit linear(const TransversePoint& x) const { return circular_to_linear() * circular(x); }

    /// Distinct ell values carried by each photon, ascending.
    const std::vector<int>& ells(Photon which) const { return which == Photon::Signal ? ells_s_ : ells_i_; }
    const ModeSuperposition& state() const { return state_; }

   private:
    struct CompiledTerm {
        std::size_t sector;
        std::size_t slot_s;
        std::size_t slot_i;
        cplx amp;
    };
    ModeSuperposition state_;
    std::vector<int> ells_s_;
    std::vector<int> ells_i_;
    std::vector<double> norm_s_;
    std::vector<double> norm_i_;
    std::vector<CompiledTerm> compiled_;
};

TwoQubit local_spinor(const ModeSuperposition& state, const TransversePoint& x);

enum class BellState { PhiPlus, PhiMinus, PsiPlus, PsiMinus };
inline constexpr std::array<BellState, 4> kBellStates = {BellState::PhiPlus, BellState::PhiMinus,
                                                        BellState::PsiPlus, BellState::PsiMinus};
const char* bell_name(BellState b);

/// Bell state in the linear basis: phi+- = (HH +- VV)/sqrt2, psi+- = (HV +- VH)/sqrt2.
TwoQubit bell_vector(BellState b);

struct BellProbabilities {
    double phi_plus = 0.0;
    double phi_minus = 0.0;
    double psi_plus = 0.0;
    double psi_minus = 0.0;

    double operator[](BellState b) const;
    double& operator[](BellState b);
    double sum() const { return phi_plus + phi_minus + psi_plus + psi_minus; }
};

/// |<B|psi(x)>|^2 for the four Bell states (a probability density in position).
BellProbabilities bell_probabilities(const ModeSuperposition& state, const TransversePoint& x);
BellProbabilities bell_probabilities(const TwoQubit& linear_amplitude);

struct BellMapOptions {
    std::size_t n_theta = 16;
    RadialQuadrature radial{};
    // Gauss-Legendre nodes per angular bin and axis; 1 samples the bin centre.
    std::size_t angular_samples = 1;
};

/// Radially integrated Bell probability densities on an n_theta x n_theta
/// azimuthal grid (row = signal bin). Summed over the four states they give the
/// joint angular marginal.
struct BellMaps {
    std::size_t n_theta = 0;
    std::array<Eigen::MatrixXd, 4> maps;

    const Eigen::MatrixXd& operator[](BellState b) const { return maps[static_cast<std::size_t>(b)]; }
    Eigen::MatrixXd& operator[](BellState b) { return maps[static_cast<std::size_t>(b)]; }
    Eigen::MatrixXd marginal() const;
    /// Each cell divided by the marginal, so the four maps sum to 1 cell-wise.
    BellMaps conditional() const;
};

/// Throws std::invalid_argument for n_theta < 4, an empty radial rule, or
/// zero angular samples.
BellMaps bell_probability_map(const ModeSuperposition& state, const BellMapOptions& options);

}  // namespace evblab

#endif
