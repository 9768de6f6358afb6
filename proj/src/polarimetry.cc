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

#include "evblab/polarimetry.h"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "evblab/coincidence.h"
#include "evblab/error.h"
#include "evblab/lgmodes.h"

namespace evblab {

MeasurementSetting::MeasurementSetting(PolBasis s, PolBasis i)
    : pol_s_(s), pol_i_(i), label_{pol_char(s), pol_char(i)} {}

MeasurementSetting MeasurementSetting::parse(std::string_view label) {
    if (label.size() != 2) {
        throw std::invalid_argument("setting label must have two characters: '" + std::string(label) + "'");
    }
    const auto s = pol_from_char(label[0]);
    const auto i = pol_from_char(label[1]);
    if (!s || !i) {
        throw std::invalid_argument("setting label must use H, V, D, A, L, R: '" + std::string(label) + "'");
    }
    return MeasurementSetting(*s, *i);
}

TwoQubit MeasurementSetting::projector() const {
    const Eigen::Vector2cd a = proj_s();
    const Eigen::Vector2cd b = proj_i();
    TwoQubit v;
    v << a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1];
    return v;
}

const std::array<Eigen::Matrix4cd, 16>& pauli_basis() {
    static const std::array<Eigen::Matrix4cd, 16> basis = [] {
        const cplx i{0.0, 1.0};
        std::array<Eigen::Matrix2cd, 4> s;
        s[0] << 1, 0, 0, 1;
        s[1] << 0, 1, 1, 0;
        s[2] << 0, -i, i, 0;
        s[3] << 1, 0, 0, -1;
        std::array<Eigen::Matrix4cd, 16> out;
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                Eigen::Matrix4cd k;
                for (int r = 0; r < 2; ++r) {
                    for (int c = 0; c < 2; ++c) {
                        k.block<2, 2>(2 * r, 2 * c) = s[a](r, c) * s[b];
                    }
                }
                out[4 * a + b] = k;
            }
        }
        return out;
    }();
    return basis;
}

TomographySet::TomographySet(std::vector<MeasurementSetting> settings) : settings_(std::move(settings)) {
    if (settings_.size() != 16) {
        throw ConfigurationError("tomography set needs exactly 16 settings, got " + std::to_string(settings_.size()));
    }
    std::set<std::string> seen;
    for (const auto& s : settings_) {
        if (!seen.insert(s.label()).second) {
            throw ConfigurationError("duplicate setting label " + s.label());
        }
    }
    const auto& paulis = pauli_basis();
    for (std::size_t k = 0; k < 16; ++k) {
        const TwoQubit pi = settings_[k].projector();
        for (std::size_t m = 0; m < 16; ++m) {
            design_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) =
                0.25 * std::real(pi.dot(paulis[m] * pi));
        }
    }
    Eigen::JacobiSVD<Eigen::Matrix<double, 16, 16>> svd(design_);
    const auto& sv = svd.singularValues();
    const double smin = sv[15];
    if (!(smin > 1e-12 * sv[0])) {
        throw ConfigurationError("measurement settings are not tomographically complete");
    }
    condition_ = sv[0] / smin;

    bool found = false;
    for (std::size_t k = 0; k < 16 && !found; ++k) {
        const auto a = settings_[k].pol_s();
        const auto b = settings_[k].pol_i();
        const auto i1 = index_of(MeasurementSetting(a, orthogonal(b)).label());
        const auto i2 = index_of(MeasurementSetting(orthogonal(a), b).label());
        const auto i3 = index_of(MeasurementSetting(orthogonal(a), orthogonal(b)).label());
        if (i1 && i2 && i3) {
            flux_subset_ = {k, *i1, *i2, *i3};
            found = true;
        }
    }
    if (!found) {
        throw ConfigurationError("tomography set lacks a complete product basis for flux normalisation");
    }
}

TomographySet TomographySet::from_labels(std::span<const std::string> labels) {
    std::vector<MeasurementSetting> settings;
    for (const auto& l : labels) {
        settings.push_back(MeasurementSetting::parse(l));
    }
    return TomographySet(std::move(settings));
}

std::optional<std::size_t> TomographySet::index_of(std::string_view label) const {
    for (std::size_t k = 0; k < settings_.size(); ++k) {
        if (settings_[k].label() == label) {
            return k;
        }
    }
    return std::nullopt;
}

const TomographySet& standard_set() {
    static const TomographySet set = [] {
        std::vector<MeasurementSetting> v;
        for (auto s : {PolBasis::H, PolBasis::V, PolBasis::A, PolBasis::R}) {
            for (auto i : {PolBasis::H, PolBasis::V, PolBasis::A, PolBasis::L}) {
                v.emplace_back(s, i);
            }
        }
        return TomographySet(std::move(v));
    }();
    return set;
}

double coincidence_density(const LocalSpinorField& field, const MeasurementSetting& setting, const TransversePoint& x) {
    return std::norm(setting.projector().dot(field.linear(x)));
}

double coincidence_density(const ModeSuperposition& state, const MeasurementSetting& setting, const TransversePoint& x) {
    return coincidence_density(LocalSpinorField(state), setting, x);
}

namespace {

// Integral of exp(i m theta) over [lo, hi].
cplx angular_integral(int m, double lo, double hi) {
    if (m == 0) {
        return {hi - lo, 0.0};
    }
    const cplx i{0.0, 1.0};
    return (std::exp(i * static_cast<double>(m) * hi) - std::exp(i * static_cast<double>(m) * lo)) /
           (i * static_cast<double>(m));
}

}  // namespace

ExpectedHistogram expected_histogram(const ModeSuperposition& state, const MeasurementSetting& setting,
                                     const PolarBinning& binning, double n_pairs, double werner_p,
                                     std::size_t radial_nodes) {
    binning.validate();
    if (!(werner_p >= 0.0 && werner_p <= 1.0)) {
        throw std::invalid_argument("werner_p must lie in [0, 1]");
    }
    if (radial_nodes == 0) {
        throw std::invalid_argument("radial_nodes must be positive");
    }
    const auto& terms = state.terms();
    const std::size_t nt = terms.size();
    const auto n_theta = static_cast<Eigen::Index>(binning.n_theta);
    const auto n_r = static_cast<Eigen::Index>(binning.n_r);

    // Per-term radial Gram matrices for each radial bin.
    auto grams = [&](Photon which) {
        std::vector<Eigen::MatrixXd> g(binning.n_r, Eigen::MatrixXd::Zero(nt, nt));
        const double dr = binning.r_max / static_cast<double>(binning.n_r);
        for (std::size_t c = 0; c < binning.n_r; ++c) {
            const auto rule = gauss_legendre(radial_nodes, c * dr, (c + 1) * dr);
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double r = rule.nodes[q];
                Eigen::VectorXd f(nt);
                for (std::size_t t = 0; t < nt; ++t) {
                    const int ell = which == Photon::Signal ? terms[t].ell_s : terms[t].ell_i;
                    f[static_cast<Eigen::Index>(t)] =
                        lg::evaluate(lg::RadialProfile(lg::LGIndex(ell), state.waist(which)), r);
                }
                g[c] += rule.weights[q] * r * f * f.transpose();
            }
        }
        return g;
    };
    const auto gs = grams(Photon::Signal);
    const auto gi = grams(Photon::Idler);
    Eigen::MatrixXd gs_all = Eigen::MatrixXd::Zero(nt, nt);
    Eigen::MatrixXd gi_all = Eigen::MatrixXd::Zero(nt, nt);
    for (std::size_t c = 0; c < binning.n_r; ++c) {
        gs_all += gs[c];
        gi_all += gi[c];
    }

    // Coherent sums contributing to the density: the projected amplitude with
    // weight p, and each circular sector with weight (1 - p)/4.
    struct Coherent {
        double weight;
        std::vector<cplx> coeff;
    };
    std::vector<Coherent> sums;
    const TwoQubit pi = setting.projector();
    const Eigen::Matrix4cd& c2l = circular_to_linear();
    auto sector_of = [](const ModeTerm& t) {
        return 2 * static_cast<int>(t.pol_s == PolBasis::R) + static_cast<int>(t.pol_i == PolBasis::R);
    };
    if (werner_p > 0.0) {
        Coherent c{werner_p, std::vector<cplx>(nt)};
        for (std::size_t t = 0; t < nt; ++t) {
            c.coeff[t] = terms[t].amp * pi.dot(c2l.col(sector_of(terms[t])));
        }
        sums.push_back(std::move(c));
    }
    if (werner_p < 1.0) {
        for (int sec = 0; sec < 4; ++sec) {
            Coherent c{(1.0 - werner_p) / 4.0, std::vector<cplx>(nt)};
            for (std::size_t t = 0; t < nt; ++t) {
                c.coeff[t] = sector_of(terms[t]) == sec ? terms[t].amp : cplx{};
            }
            sums.push_back(std::move(c));
        }
    }

    const double width = 2.0 * std::numbers::pi / static_cast<double>(binning.n_theta);
    ExpectedHistogram out;
    out.label = setting.label();
    out.counts_theta = Eigen::MatrixXd::Zero(n_theta, n_theta);
    out.counts_r = Eigen::MatrixXd::Zero(n_r, n_r);
    std::vector<cplx> theta_s(binning.n_theta);
    std::vector<cplx> theta_i(binning.n_theta);
    for (const auto& sum : sums) {
        for (std::size_t u = 0; u < nt; ++u) {
            for (std::size_t v = 0; v < nt; ++v) {
                const cplx k = sum.weight * sum.coeff[u] * std::conj(sum.coeff[v]);
                if (k == cplx{}) {
                    continue;
                }
                const int ms = terms[u].ell_s - terms[v].ell_s;
                const int mi = terms[u].ell_i - terms[v].ell_i;
                const auto uu = static_cast<Eigen::Index>(u);
                const auto vv = static_cast<Eigen::Index>(v);
                for (std::size_t a = 0; a < binning.n_theta; ++a) {
                    theta_s[a] = angular_integral(ms, a * width, (a + 1) * width);
                    theta_i[a] = angular_integral(mi, a * width, (a + 1) * width);
                }
                const cplx radial_all = k * gs_all(uu, vv) * gi_all(uu, vv);
                for (Eigen::Index a = 0; a < n_theta; ++a) {
                    for (Eigen::Index b = 0; b < n_theta; ++b) {
                        out.counts_theta(a, b) += std::real(radial_all * theta_s[static_cast<std::size_t>(a)] *
                                                            theta_i[static_cast<std::size_t>(b)]);
                    }
                }
                if (ms == 0 && mi == 0) {
                    const double full = 4.0 * std::numbers::pi * std::numbers::pi;
                    for (Eigen::Index c = 0; c < n_r; ++c) {
                        for (Eigen::Index d = 0; d < n_r; ++d) {
                            out.counts_r(c, d) += full * std::real(k * gs[static_cast<std::size_t>(c)](uu, vv) *
                                                                   gi[static_cast<std::size_t>(d)](uu, vv));
                        }
                    }
                }
            }
        }
    }
    out.counts_theta = (out.counts_theta * n_pairs).cwiseMax(0.0);
    out.counts_r = (out.counts_r * n_pairs).cwiseMax(0.0);
    out.total = out.counts_theta.sum();
    return out;
}

}  // namespace evblab
