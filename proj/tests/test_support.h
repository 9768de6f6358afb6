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

// Independent reference implementations used as test oracles. Nothing here
// calls into the library code it is compared against.

#ifndef EVBLAB_TESTS_TEST_SUPPORT_H
#define EVBLAB_TESTS_TEST_SUPPORT_H

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "evblab/camera.h"
#include "evblab/event_io.h"

namespace evblab::testing {

using cplx = std::complex<double>;

// LG_{0,l} radial profile written from the textbook expression.
inline double lg_radial(int ell, double w, double r) {
    const int a = std::abs(ell);
    const double norm = std::sqrt(2.0 / (std::numbers::pi * std::tgamma(a + 1.0))) / w;
    return norm * std::pow(std::sqrt(2.0) * r / w, a) * std::exp(-r * r / (w * w));
}

// F_{a,b}(r_s, r_i) with a, b the plate charges: orders 2|a| and 2|b|.
inline double f_pair(double qa, double qb, double w, double rs, double ri) {
    return lg_radial(static_cast<int>(std::lround(2 * std::abs(qa))), w, rs) *
           lg_radial(static_cast<int>(std::lround(2 * std::abs(qb))), w, ri);
}

struct ClosedFormBell {
    double phi_plus;
    double phi_minus;
    double psi_plus;
    double psi_minus;
};

// Fully converting plates on both photons.
inline ClosedFormBell tuned_bell(double qs, double qi, double w, double rs, double ts, double ri, double ti) {
    const double phi = qs * ts - qi * ti;
    const double f = f_pair(qs, qi, w, rs, ri);
    return {f * f * std::pow(std::sin(2 * phi), 2), 0.0, 0.0, f * f * std::pow(std::cos(2 * phi), 2)};
}

// Half-converting plates (retardation pi/2) on both photons.
inline ClosedFormBell partial_bell(double qs, double qi, double w, double rs, double ts, double ri, double ti) {
    const double phi = qs * ts - qi * ti;
    const double f = f_pair(qs, qi, w, rs, ri);
    const double f00 = f_pair(0, 0, w, rs, ri);
    const double f0i = f_pair(0, qi, w, rs, ri);
    const double fs0 = f_pair(qs, 0, w, rs, ri);
    const double a = f0i * std::sin(2 * qi * ti) - fs0 * std::sin(2 * qs * ts);
    const double b = f0i * std::cos(2 * qi * ti) - fs0 * std::cos(2 * qs * ts);
    const double c = f00 + f * std::cos(2 * phi);
    return {0.25 * f * f * std::pow(std::sin(2 * phi), 2), 0.25 * a * a, 0.25 * b * b, 0.25 * c * c};
}

// Every in-window (signal, idler) index pair, or the greedy nearest-in-time
// single matching, computed by exhaustive search.
inline std::vector<std::pair<std::size_t, std::size_t>> brute_force_coincidences(
    const std::vector<EventRecord>& stream, const CameraGeometry& g, double window_ns, bool multi,
    std::int64_t idler_offset = 0) {
    std::vector<std::size_t> sig;
    std::vector<std::size_t> idl;
    for (std::size_t k = 0; k < stream.size(); ++k) {
        if (g.roi_signal.contains(stream[k].x, stream[k].y)) {
            sig.push_back(k);
        } else if (g.roi_idler.contains(stream[k].x, stream[k].y)) {
            idl.push_back(k);
        }
    }
    const auto w = static_cast<std::int64_t>(std::floor(window_ns));
    auto dt = [&](std::size_t s, std::size_t i) {
        return static_cast<std::int64_t>(stream[i].t) + idler_offset - static_cast<std::int64_t>(stream[s].t);
    };
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (multi) {
        for (auto s : sig) {
            for (auto i : idl) {
                if (std::llabs(dt(s, i)) <= w) {
                    out.emplace_back(s, i);
                }
            }
        }
        return out;
    }
    std::vector<bool> used(stream.size(), false);
    for (auto s : sig) {
        std::size_t best = 0;
        std::int64_t best_d = -1;
        for (auto i : idl) {
            if (used[i]) {
                continue;
            }
            const std::int64_t d = std::llabs(dt(s, i));
            if (d > w) {
                continue;
            }
            const std::int64_t ti = static_cast<std::int64_t>(stream[i].t);
            const std::int64_t tb = best_d < 0 ? 0 : static_cast<std::int64_t>(stream[best].t);
            if (best_d < 0 || d < best_d || (d == best_d && (ti < tb || (ti == tb && i < best)))) {
                best = i;
                best_d = d;
            }
        }
        if (best_d >= 0) {
            used[best] = true;
            out.emplace_back(s, best);
        }
    }
    return out;
}

// Eigenvalue truncation of Smolin, Gambetta and Smith: walk the spectrum from
// the bottom, zeroing negatives and spreading the deficit over the rest.
inline Eigen::Matrix4cd sgs_projection(const Eigen::Matrix4cd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m);
    std::vector<double> mu(4);
    for (int k = 0; k < 4; ++k) {
        mu[static_cast<std::size_t>(k)] = es.eigenvalues()[3 - k];  // descending
    }
    std::vector<double> lam(4, 0.0);
    int i = 3;
    double a = 0.0;
    while (i >= 0 && mu[static_cast<std::size_t>(i)] + a / (i + 1) < 0) {
        a += mu[static_cast<std::size_t>(i)];
        --i;
    }
    for (int j = 0; j <= i; ++j) {
        lam[static_cast<std::size_t>(j)] = mu[static_cast<std::size_t>(j)] + a / (i + 1);
    }
    Eigen::Vector4d d;
    for (int k = 0; k < 4; ++k) {
        d[3 - k] = lam[static_cast<std::size_t>(k)];
    }
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

// Wootters concurrence from the non-Hermitian product rho * rho_tilde.
inline double wootters(const Eigen::Matrix4cd& rho) {
    Eigen::Matrix2cd y;
    y << 0, cplx(0, -1), cplx(0, 1), 0;
    Eigen::Matrix4cd yy;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            yy.block<2, 2>(2 * r, 2 * c) = y(r, c) * y;
        }
    }
    const Eigen::Matrix4cd rt = yy * rho.conjugate() * yy;
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(rho * rt);
    std::vector<double> l;
    for (int k = 0; k < 4; ++k) {
        l.push_back(std::sqrt(std::max(0.0, es.eigenvalues()[k].real())));
    }
    std::sort(l.rbegin(), l.rend());
    return std::max(0.0, l[0] - l[1] - l[2] - l[3]);
}

// Hilbert-Schmidt random mixed state: G G^dag / tr with complex Gaussian G.
inline Eigen::Matrix4cd random_density(std::mt19937_64& rng, int rank = 4) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXcd g(4, rank);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < rank; ++c) {
            g(r, c) = cplx(n(rng), n(rng));
        }
    }
    Eigen::Matrix4cd rho = g * g.adjoint();
    return rho / rho.trace().real();
}

inline Eigen::Vector4cd psi_minus() { return Eigen::Vector4cd(0, 1, -1, 0) / std::sqrt(2.0); }

inline Eigen::Matrix4cd werner(double p) {
    const Eigen::Vector4cd v = psi_minus();
    return p * v * v.adjoint() + (1 - p) * Eigen::Matrix4cd::Identity() / 4.0;
}

// Upper-tail probability of a chi-squared statistic, via the regularized gamma.
double chi2_pvalue(double stat, double dof);

}  // namespace evblab::testing

#endif
