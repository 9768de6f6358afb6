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

#include "evblab/qplate_state.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>

#include "evblab/error.h"
#include "evblab/lgmodes.h"

namespace evblab {

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
constexpr double kDropAmplitude = 1e-14;

bool is_circular(PolBasis p) { return p == PolBasis::L || p == PolBasis::R; }

std::size_t sector_index(PolBasis s, PolBasis i) {
    return 2 * static_cast<std::size_t>(s == PolBasis::R) + static_cast<std::size_t>(i == PolBasis::R);
}

void check_point(const TransversePoint& x) {
    for (double r : {x.r_s, x.r_i}) {
        if (!std::isfinite(r) || r < 0.0) {
            throw std::invalid_argument("radial coordinate must be finite and nonnegative");
        }
    }
    if (!std::isfinite(x.theta_s) || !std::isfinite(x.theta_i)) {
        throw std::invalid_argument("azimuthal coordinate must be finite");
    }
}

std::vector<ModeTerm> merge_terms(const std::vector<ModeTerm>& in) {
    using Key = std::tuple<int, int, int, int>;
    std::map<Key, cplx> acc;
    std::vector<Key> order;
    for (const auto& t : in) {
        const Key k{static_cast<int>(t.pol_s), static_cast<int>(t.pol_i), t.ell_s, t.ell_i};
        auto [it, inserted] = acc.try_emplace(k, cplx{});
        if (inserted) {
            order.push_back(k);
        }
        it->second += t.amp;
    }
    std::vector<ModeTerm> out;
    for (const auto& k : order) {
        const cplx a = acc.at(k);
        if (std::abs(a) <= kDropAmplitude) {
            continue;
        }
        out.push_back(ModeTerm{static_cast<PolBasis>(std::get<0>(k)), static_cast<PolBasis>(std::get<1>(k)),
                               std::get<2>(k), std::get<3>(k), a});
    }
    return out;
}

double radial_norm(int abs_ell, double waist) {
    return std::sqrt(2.0 / (std::numbers::pi * std::tgamma(abs_ell + 1.0))) / waist;
}

}  // namespace

Eigen::Vector2cd jones(PolBasis pol) {
    const cplx i{0.0, 1.0};
    switch (pol) {
        case PolBasis::H:
            return {1.0, 0.0};
        case PolBasis::V:
            return {0.0, 1.0};
        case PolBasis::L:
            return {kInvSqrt2, i * kInvSqrt2};
        case PolBasis::R:
            return {kInvSqrt2, -i * kInvSqrt2};
        case PolBasis::D:
            return {kInvSqrt2, kInvSqrt2};
        case PolBasis::A:
            return {kInvSqrt2, -kInvSqrt2};
    }
    throw std::invalid_argument("unknown polarization");
}

char pol_char(PolBasis pol) {
    static constexpr char kChars[] = {'H', 'V', 'L', 'R', 'D', 'A'};
    return kChars[static_cast<int>(pol)];
}

std::optional<PolBasis> pol_from_char(char c) {
    switch (c) {
        case 'H':
            return PolBasis::H;
        case 'V':
            return PolBasis::V;
        case 'L':
            return PolBasis::L;
        case 'R':
            return PolBasis::R;
        case 'D':
            return PolBasis::D;
        case 'A':
            return PolBasis::A;
        default:
            return std::nullopt;
    }
}

PolBasis orthogonal(PolBasis pol) {
    switch (pol) {
        case PolBasis::H:
            return PolBasis::V;
        case PolBasis::V:
            return PolBasis::H;
        case PolBasis::L:
            return PolBasis::R;
        case PolBasis::R:
            return PolBasis::L;
        case PolBasis::D:
            return PolBasis::A;
        case PolBasis::A:
            return PolBasis::D;
    }
    throw std::invalid_argument("unknown polarization");
}

TopologicalCharge TopologicalCharge::from_value(double q) {
    const double twice = 2.0 * q;
    if (!std::isfinite(q) || std::abs(twice - std::round(twice)) > 1e-9) {
        throw std::invalid_argument("q-plate charge must be a half-integer, got " + std::to_string(q));
    }
    const long t = std::lround(twice);
    if (std::abs(t) > lg::kMaxAbsEll) {
        throw std::invalid_argument("q-plate charge too large: " + std::to_string(q));
    }
    return TopologicalCharge(static_cast<int>(t));
}

QPlateParams QPlateParams::make(double q, double delta, double waist) {
    if (!std::isfinite(delta) || delta < 0.0 || delta > std::numbers::pi + 1e-12) {
        throw std::invalid_argument("q-plate retardation must lie in [0, pi]");
    }
    if (!std::isfinite(waist) || waist <= 0.0) {
        throw std::invalid_argument("q-plate waist must be finite and positive");
    }
    return QPlateParams{TopologicalCharge::from_value(q), std::min(delta, std::numbers::pi), waist};
}

QPlateParams QPlateParams::tuned(double q, double waist) { return make(q, std::numbers::pi, waist); }

QPlateParams QPlateParams::partially_tuned(double q, double waist) {
    return make(q, std::numbers::pi / 2.0, waist);
}

ModeSuperposition::ModeSuperposition(std::vector<ModeTerm> terms, double waist_s, double waist_i)
    : waist_s_(waist_s), waist_i_(waist_i) {
    for (double w : {waist_s, waist_i}) {
        if (!std::isfinite(w) || w <= 0.0) {
            throw std::invalid_argument("mode waist must be finite and positive");
        }
    }
    for (const auto& t : terms) {
        if (!is_circular(t.pol_s) || !is_circular(t.pol_i)) {
            throw std::invalid_argument("mode terms must use circular polarizations");
        }
        if (!std::isfinite(t.amp.real()) || !std::isfinite(t.amp.imag())) {
            throw std::invalid_argument("mode amplitude must be finite");
        }
        lg::LGIndex{t.ell_s};
        lg::LGIndex{t.ell_i};
    }
    terms_ = merge_terms(terms);
    const double n2 = norm_squared();
    if (std::abs(n2 - 1.0) > 1e-12) {
        throw std::invalid_argument("mode superposition is not normalised: |psi|^2 = " + std::to_string(n2));
    }
}

double ModeSuperposition::norm_squared() const {
    double s = 0.0;
    for (const auto& t : terms_) {
        s += std::norm(t.amp);
    }
    return s;
}

ModeSuperposition epr_state(double waist_s, double waist_i) {
    const cplx a{0.0, kInvSqrt2};
    return ModeSuperposition({ModeTerm{PolBasis::L, PolBasis::R, 0, 0, a}, ModeTerm{PolBasis::R, PolBasis::L, 0, 0, -a}},
                             waist_s, waist_i);
}

ModeSuperposition apply_qplate(const ModeSuperposition& state, Photon which, const QPlateParams& plate) {
    const cplx keep{std::cos(plate.delta / 2.0), 0.0};
    const cplx flip{0.0, std::sin(plate.delta / 2.0)};
    const int shift = plate.q.twice();
    const bool signal = which == Photon::Signal;

    std::vector<ModeTerm> out;
    out.reserve(2 * state.terms().size());
    for (const auto& t : state.terms()) {
        const int ell = signal ? t.ell_s : t.ell_i;
        if (ell != 0) {
            throw UnsupportedComposition(
                "q-plate acts on a photon that already carries orbital angular momentum; only Gaussian input is "
                "modelled");
        }
        const PolBasis pol = signal ? t.pol_s : t.pol_i;
        ModeTerm unconverted = t;
        unconverted.amp = t.amp * keep;
        ModeTerm converted = t;
        converted.amp = t.amp * flip;
        const PolBasis flipped = pol == PolBasis::L ? PolBasis::R : PolBasis::L;
        const int new_ell = pol == PolBasis::L ? -shift : shift;
        if (signal) {
            converted.pol_s = flipped;
            converted.ell_s = new_ell;
        } else {
            converted.pol_i = flipped;
            converted.ell_i = new_ell;
        }
        out.push_back(unconverted);
        out.push_back(converted);
    }
    const double ws = signal ? plate.waist : state.waist_s();
    const double wi = signal ? state.waist_i() : plate.waist;
    return ModeSuperposition(std::move(out), ws, wi);
}

ModeSuperposition evb_state(const QPlateParams& qs, const QPlateParams& qi) {
    const auto s = apply_qplate(epr_state(qs.waist, qi.waist), Photon::Signal, qs);
    return apply_qplate(s, Photon::Idler, qi);
}

const Eigen::Matrix4cd& circular_to_linear() {
    static const Eigen::Matrix4cd m = [] {
        Eigen::Matrix2cd single;
        single.col(0) = jones(PolBasis::L);
        single.col(1) = jones(PolBasis::R);
        Eigen::Matrix4cd k;
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                k.block<2, 2>(2 * a, 2 * b) = single(a, b) * single;
            }
        }
        return k;
    }();
    return m;
}

LocalSpinorField::LocalSpinorField(const ModeSuperposition& state) : state_(state) {
    for (const auto& t : state.terms()) {
        ells_s_.push_back(t.ell_s);
        ells_i_.push_back(t.ell_i);
    }
    for (auto* v : {&ells_s_, &ells_i_}) {
        std::sort(v->begin(), v->end());
        v->erase(std::unique(v->begin(), v->end()), v->end());
    }
    for (int l : ells_s_) {
        norm_s_.push_back(radial_norm(std::abs(l), state.waist_s()));
    }
    for (int l : ells_i_) {
        norm_i_.push_back(radial_norm(std::abs(l), state.waist_i()));
    }
    auto slot = [](const std::vector<int>& v, int l) {
        return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), l) - v.begin());
    };
    for (const auto& t : state.terms()) {
        compiled_.push_back(
            CompiledTerm{sector_index(t.pol_s, t.pol_i), slot(ells_s_, t.ell_s), slot(ells_i_, t.ell_i), t.amp});
    }
}

TwoQubit LocalSpinorField::circular(const TransversePoint& x) const {
    check_point(x);
    auto modes = [](const std::vector<int>& ells, const std::vector<double>& norms, double w, double r,
                    double theta, std::array<cplx, 2 * lg::kMaxAbsEll + 1>& out) {
        const double gauss = std::exp(-(r * r) / (w * w));
        const double u = std::numbers::sqrt2 * r / w;
        for (std::size_t k = 0; k < ells.size(); ++k) {
            const int m = std::abs(ells[k]);
            out[k] = std::polar(norms[k] * std::pow(u, m) * gauss, ells[k] * theta);
        }
    };
    std::array<cplx, 2 * lg::kMaxAbsEll + 1> ms{};
    std::array<cplx, 2 * lg::kMaxAbsEll + 1> mi{};
    modes(ells_s_, norm_s_, state_.waist_s(), x.r_s, x.theta_s, ms);
    modes(ells_i_, norm_i_, state_.waist_i(), x.r_i, x.theta_i, mi);
    TwoQubit v = TwoQubit::Zero();
    for (const auto& c : compiled_) {
        v[static_cast<Eigen::Index>(c.sector)] += c.amp * ms[c.slot_s] * mi[c.slot_i];
    }
    return v;
}

TwoQubit local_spinor(const ModeSuperposition& state, const TransversePoint& x) {
    return LocalSpinorField(state).circular(x);
}

const char* bell_name(BellState b) {
    switch (b) {
        case BellState::PhiPlus:
            return "phi_plus";
        case BellState::PhiMinus:
            return "phi_minus";
        case BellState::PsiPlus:
            return "psi_plus";
        case BellState::PsiMinus:
            return "psi_minus";
    }
    return "?";
}

TwoQubit bell_vector(BellState b) {
    TwoQubit v = TwoQubit::Zero();
    switch (b) {
        case BellState::PhiPlus:
            v << 1, 0, 0, 1;
            break;
        case BellState::PhiMinus:
            v << 1, 0, 0, -1;
            break;
        case BellState::PsiPlus:
            v << 0, 1, 1, 0;
            break;
        case BellState::PsiMinus:
            v << 0, 1, -1, 0;
            break;
    }
    return v * kInvSqrt2;
}

double BellProbabilities::operator[](BellState b) const {
    switch (b) {
        case BellState::PhiPlus:
            return phi_plus;
        case BellState::PhiMinus:
            return phi_minus;
        case BellState::PsiPlus:
            return psi_plus;
        case BellState::PsiMinus:
            return psi_minus;
    }
    return 0.0;
}

double& BellProbabilities::operator[](BellState b) {
    switch (b) {
        case BellState::PhiPlus:
            return phi_plus;
        case BellState::PhiMinus:
            return phi_minus;
        case BellState::PsiPlus:
            return psi_plus;
        case BellState::PsiMinus:
            break;
    }
    return psi_minus;
}

BellProbabilities bell_probabilities(const TwoQubit& linear_amplitude) {
    BellProbabilities p;
    for (auto b : kBellStates) {
        p[b] = std::norm(bell_vector(b).dot(linear_amplitude));
    }
    return p;
}

BellProbabilities bell_probabilities(const ModeSuperposition& state, const TransversePoint& x) {
    return bell_probabilities(LocalSpinorField(state).linear(x));
}

Eigen::MatrixXd BellMaps::marginal() const { return maps[0] + maps[1] + maps[2] + maps[3]; }

BellMaps BellMaps::conditional() const {
    BellMaps out = *this;
    const Eigen::MatrixXd total = marginal();
    for (auto& m : out.maps) {
        for (Eigen::Index a = 0; a < m.rows(); ++a) {
            for (Eigen::Index b = 0; b < m.cols(); ++b) {
                m(a, b) = total(a, b) > 0.0 ? m(a, b) / total(a, b) : 0.0;
            }
        }
    }
    return out;
}

BellMaps bell_probability_map(const ModeSuperposition& state, const BellMapOptions& options) {
    if (options.n_theta < 4) {
        throw std::invalid_argument("Bell map needs at least 4 angular bins");
    }
    if (options.radial.points == 0 || !(options.radial.r_max_in_waists > 0.0) || options.angular_samples == 0) {
        throw std::invalid_argument("degenerate quadrature for Bell map");
    }

    // The integrand is |sum_t c_t A_t(r_s) B_t(r_i) e^{i(...)}|^2, so the radial
    // integrals factor into per-photon Gram matrices of the radial profiles.
    auto gram = [&](const std::vector<int>& ells, double waist) {
        const auto rule = gauss_legendre(options.radial.points, 0.0, options.radial.r_max_in_waists * waist);
        const auto n = static_cast<Eigen::Index>(ells.size());
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double r = rule.nodes[k];
            Eigen::VectorXd f(n);
            for (Eigen::Index j = 0; j < n; ++j) {
                f[j] = lg::evaluate(lg::RadialProfile(lg::LGIndex(ells[static_cast<std::size_t>(j)]), waist), r);
            }
            g += rule.weights[k] * r * f * f.transpose();
        }
        return g;
    };

    const LocalSpinorField field(state);
    const auto& ells_s = field.ells(Photon::Signal);
    const auto& ells_i = field.ells(Photon::Idler);
    const Eigen::MatrixXd gs = gram(ells_s, state.waist_s());
    const Eigen::MatrixXd gi = gram(ells_i, state.waist_i());

    auto slot = [](const std::vector<int>& v, int l) {
        return static_cast<Eigen::Index>(std::lower_bound(v.begin(), v.end(), l) - v.begin());
    };
    struct Projected {
        Eigen::Index s;
        Eigen::Index i;
        int ell_s;
        int ell_i;
        std::array<cplx, 4> coeff;  // <B| pol_s pol_i> * amp, per Bell state
    };
    std::vector<Projected> terms;
    const Eigen::Matrix4cd& c2l = circular_to_linear();
    for (const auto& t : state.terms()) {
        Projected p{slot(ells_s, t.ell_s), slot(ells_i, t.ell_i), t.ell_s, t.ell_i, {}};
        const TwoQubit lin = c2l.col(static_cast<Eigen::Index>(sector_index(t.pol_s, t.pol_i)));
        for (std::size_t b = 0; b < 4; ++b) {
            p.coeff[b] = t.amp * bell_vector(kBellStates[b]).dot(lin);
        }
        terms.push_back(p);
    }

    const std::size_t n = options.n_theta;
    const double width = 2.0 * std::numbers::pi / static_cast<double>(n);
    QuadratureRule sub;
    if (options.angular_samples == 1) {
        sub.nodes = {0.5 * width};
        sub.weights = {1.0};
    } else {
        sub = gauss_legendre(options.angular_samples, 0.0, width);
        for (auto& w : sub.weights) {
            w /= width;
        }
    }

    BellMaps out;
    out.n_theta = n;
    for (auto& m : out.maps) {
        m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    }
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            std::array<double, 4> acc{};
            for (std::size_t ja = 0; ja < sub.nodes.size(); ++ja) {
                const double ts = a * width + sub.nodes[ja];
                for (std::size_t jb = 0; jb < sub.nodes.size(); ++jb) {
                    const double ti = b * width + sub.nodes[jb];
                    const double wgt = sub.weights[ja] * sub.weights[jb];
                    for (std::size_t u = 0; u < terms.size(); ++u) {
                        for (std::size_t v = 0; v < terms.size(); ++v) {
                            const auto& tu = terms[u];
                            const auto& tv = terms[v];
                            const double radial = gs(tu.s, tv.s) * gi(tu.i, tv.i);
                            if (radial == 0.0) {
                                continue;
                            }
                            const cplx phase =
                                std::polar(1.0, (tu.ell_s - tv.ell_s) * ts + (tu.ell_i - tv.ell_i) * ti);
                            for (std::size_t k = 0; k < 4; ++k) {
                                acc[k] += wgt * radial * std::real(tu.coeff[k] * std::conj(tv.coeff[k]) * phase);
                            }
                        }
                    }
                }
            }
            for (std::size_t k = 0; k < 4; ++k) {
                out.maps[k](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = std::max(acc[k], 0.0);
            }
        }
    }
    return out;
}

}  // namespace evblab
