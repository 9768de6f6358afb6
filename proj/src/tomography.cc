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

#include "evblab/tomography.h"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "evblab/parallel.h"

namespace evblab {

namespace {

constexpr double kHermitianTol = 1e-10;

bool is_hermitian(const Eigen::Matrix4cd& m) {
    return (m - m.adjoint()).norm() <= kHermitianTol * std::max(1.0, m.norm());
}

Eigen::Matrix4cd hermitian_sqrt(const Eigen::Matrix4cd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (m + m.adjoint()));
    const Eigen::Vector4d s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
}

void check_physical(const DensityMatrix& rho) {
    if (!is_physical(rho)) {
        throw std::invalid_argument("density matrix is not physical (Hermitian, unit trace, positive)");
    }
}

void check_counts(const SettingCounts& counts) {
    for (double n : counts) {
        if (!std::isfinite(n) || n < 0.0) {
            throw std::invalid_argument("counts must be finite and >= 0");
        }
    }
}

std::array<Eigen::Matrix4cd, 16> projectors(const TomographySet& set) {
    std::array<Eigen::Matrix4cd, 16> p;
    for (std::size_t k = 0; k < 16; ++k) {
        const TwoQubit v = set.settings()[k].projector();
        p[k] = v * v.adjoint();
    }
    return p;
}

}  // namespace

SettingCounts forward_probabilities(const DensityMatrix& rho, const TomographySet& set) {
    SettingCounts p;
    for (std::size_t k = 0; k < 16; ++k) {
        const TwoQubit v = set.settings()[k].projector();
        p[static_cast<Eigen::Index>(k)] = std::real(v.dot(rho * v));
    }
    return p;
}

DensityMatrix linear_inversion(const SettingCounts& counts, const TomographySet& set) {
    check_counts(counts);
    double flux = 0.0;
    for (std::size_t k : set.flux_subset()) {
        flux += counts[static_cast<Eigen::Index>(k)];
    }
    if (!(flux > 0.0)) {
        throw InsufficientData("no counts in the flux-normalisation settings");
    }
    const Eigen::Matrix<double, 16, 1> s = set.design_matrix().partialPivLu().solve(counts / flux);
    const auto& paulis = pauli_basis();
    DensityMatrix rho = DensityMatrix::Zero();
    for (std::size_t m = 0; m < 16; ++m) {
        rho += 0.25 * s[static_cast<Eigen::Index>(m)] * paulis[m];
    }
    return 0.5 * (rho + rho.adjoint());
}

DensityMatrix project_physical(const DensityMatrix& m) {
    if (!m.allFinite() || !is_hermitian(m)) {
        throw std::invalid_argument("project_physical needs a Hermitian matrix");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (m + m.adjoint()));
    const Eigen::Vector4d mu = es.eigenvalues();
    // Euclidean projection of the spectrum onto the probability simplex.
    std::array<double, 4> u{mu[3], mu[2], mu[1], mu[0]};
    double cumulative = 0.0;
    double shift = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        cumulative += u[k];
        const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) {
            shift = t;
        }
    }
    const Eigen::Vector4d lambda = (mu.array() - shift).cwiseMax(0.0);
    DensityMatrix out = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().adjoint();
    return 0.5 * (out + out.adjoint());
}

bool is_physical(const DensityMatrix& rho, double tol) {
    if (!rho.allFinite() || (rho - rho.adjoint()).norm() > tol) {
        return false;
    }
    if (std::abs(rho.trace() - 1.0) > tol) {
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

double factorized_log_likelihood(const Eigen::Matrix4cd& t, const SettingCounts& counts, const TomographySet& set) {
    const Eigen::Matrix4cd a = t.adjoint() * t;
    const SettingCounts p = forward_probabilities(a, set);
    const double total_n = counts.sum();
    const double total_p = p.sum();
    double l = 0.0;
    for (Eigen::Index k = 0; k < 16; ++k) {
        if (counts[k] > 0.0) {
            l += counts[k] * std::log(p[k] / total_p);
        }
    }
    return l / total_n;
}

Eigen::Matrix4cd factorized_gradient(const Eigen::Matrix4cd& t, const SettingCounts& counts, const TomographySet& set) {
    // L is scale-free in A = T^dag T, so the trace normalisation drops out.
    const Eigen::Matrix4cd a = t.adjoint() * t;
    const auto proj = projectors(set);
    const SettingCounts p = forward_probabilities(a, set);
    const double total_n = counts.sum();
    const double total_p = p.sum();
    Eigen::Matrix4cd g = Eigen::Matrix4cd::Zero();
    for (std::size_t k = 0; k < 16; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        double w = -total_n / total_p;
        if (counts[kk] > 0.0) {
            w += counts[kk] / p[kk];
        }
        g += w * proj[k];
    }
    const Eigen::Matrix4cd k = g * t.adjoint() / total_n;
    Eigen::Matrix4cd grad;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            grad(r, c) = {2.0 * std::real(k(c, r)), -2.0 * std::imag(k(c, r))};
        }
    }
    return grad;
}

MleResult mle_refine(const DensityMatrix& initial, const SettingCounts& counts, const TomographySet& set,
                     const MleOptions& options) {
    check_physical(initial);
    check_counts(counts);
    if (!(options.tol > 0.0) || options.max_iterations < 0) {
        throw std::invalid_argument("mle tolerance must be positive");
    }
    if (!(counts.sum() > 0.0)) {
        throw InsufficientData("mle needs at least one count");
    }
    // A physical linear estimate reproduces every count ratio, which is the
    // likelihood's upper bound.
    try {
        const DensityMatrix lin = linear_inversion(counts, set);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> les(lin, Eigen::EigenvaluesOnly);
        if (les.eigenvalues().minCoeff() >= -1e-12) {
            MleResult res;
            res.rho = project_physical(lin);
            res.log_likelihood = factorized_log_likelihood(hermitian_sqrt(res.rho), counts, set);
            res.history.push_back(res.log_likelihood);
            return res;
        }
    } catch (const InsufficientData&) {
    }
    DensityMatrix start = initial;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(start, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < 1e-6) {
        // A zero eigenvalue is a fixed direction of T -> T^dag T.
        start = (1.0 - 1e-3) * start + 1e-3 * DensityMatrix::Identity() / 4.0;
    }
    Eigen::Matrix4cd t = hermitian_sqrt(start);
    auto normalise = [](Eigen::Matrix4cd& m) { m /= m.norm(); };
    normalise(t);

    using Vec = Eigen::Matrix<double, 32, 1>;
    auto pack = [](const Eigen::Matrix4cd& m) {
        Vec v;
        for (int k = 0; k < 16; ++k) {
            v[k] = m(k / 4, k % 4).real();
            v[16 + k] = m(k / 4, k % 4).imag();
        }
        return v;
    };
    auto unpack = [](const Vec& v) {
        Eigen::Matrix4cd m;
        for (int k = 0; k < 16; ++k) {
            m(k / 4, k % 4) = {v[k], v[16 + k]};
        }
        return m;
    };

    // BFGS ascent on the entries of T with a backtracking Armijo search.
    MleResult res;
    double l = factorized_log_likelihood(t, counts, set);
    res.history.push_back(l);
    Vec x = pack(t);
    Vec g = pack(factorized_gradient(t, counts, set));
    Eigen::Matrix<double, 32, 32> h = Eigen::Matrix<double, 32, 32>::Identity();
    for (int it = 0;; ++it) {
        res.gradient_norm = g.norm();
        res.iterations = it;
        if (res.gradient_norm < options.tol) {
            res.rho = t.adjoint() * t / (t.adjoint() * t).trace().real();
            res.rho = 0.5 * (res.rho + res.rho.adjoint()).eval();
            res.log_likelihood = l;
            return res;
        }
        if (it == options.max_iterations) {
            break;
        }
        Vec dir = h * g;
        if (dir.dot(g) <= 0.0) {
            h.setIdentity();
            dir = g;
        }
        bool accepted = false;
        for (double step = 1.0; step > 1e-14; step *= 0.5) {
            Eigen::Matrix4cd cand = unpack(x + step * dir);
            normalise(cand);
            const double lc = factorized_log_likelihood(cand, counts, set);
            if (std::isfinite(lc) && lc >= l + 1e-4 * step * dir.dot(g)) {
                const Vec xn = pack(cand);
                const Vec gn = pack(factorized_gradient(cand, counts, set));
                const Vec sv = xn - x;
                const Vec yv = g - gn;  // gradient of -L
                const double sy = sv.dot(yv);
                if (sy > 1e-300) {
                    const double rho_k = 1.0 / sy;
                    const Eigen::Matrix<double, 32, 32> e =
                        Eigen::Matrix<double, 32, 32>::Identity() - rho_k * sv * yv.transpose();
                    h = e * h * e.transpose() + rho_k * sv * sv.transpose();
                }
                t = cand;
                x = xn;
                g = gn;
                l = lc;
                res.history.push_back(l);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (h.isIdentity()) {
                break;
            }
            h.setIdentity();
            --it;
        }
    }
    DensityMatrix best = t.adjoint() * t / (t.adjoint() * t).trace().real();
    best = (0.5 * (best + best.adjoint())).eval();
    throw ConvergenceError(
        fmt::format("mle did not converge: gradient norm {:.3g} after {} iterations", res.gradient_norm, res.iterations),
        best, res.iterations);
}

double concurrence(const DensityMatrix& rho) {
    check_physical(rho);
    Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;
    const Eigen::Matrix4cd tilde = yy * rho.conjugate() * yy;
    const Eigen::Matrix4cd sq = hermitian_sqrt(rho);
    const Eigen::Matrix4cd r = sq * tilde * sq;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
    const Eigen::Vector4d lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();  // ascending
    const double c = lam[3] - lam[2] - lam[1] - lam[0];
    // snap round-off at the bounds
    constexpr double snap = 16 * std::numeric_limits<double>::epsilon();
    if (c > 1.0 - snap) {
        return 1.0;
    }
    return c < snap ? 0.0 : c;
}

double purity(const DensityMatrix& rho) { return std::real((rho * rho).trace()); }

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    check_physical(rho);
    check_physical(sigma);
    const Eigen::Matrix4cd sq = hermitian_sqrt(rho);
    const Eigen::Matrix4cd m = sq * sigma * sq;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    const double tr = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return std::min(1.0, tr * tr);
}

BellProbabilities bell_decomposition(const DensityMatrix& rho) {
    check_physical(rho);
    BellProbabilities out;
    for (auto b : kBellStates) {
        const TwoQubit v = bell_vector(b);
        out[b] = std::clamp(std::real(v.dot(rho * v)), 0.0, 1.0);
    }
    return out;
}

Eigen::MatrixXd AngularTomography::concurrence_map() const {
    Eigen::MatrixXd m(n_theta, n_theta);
    for (std::size_t a = 0; a < n_theta; ++a) {
        for (std::size_t b = 0; b < n_theta; ++b) {
            m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = at(a, b).concurrence;
        }
    }
    return m;
}

Eigen::MatrixXd AngularTomography::purity_map() const {
    Eigen::MatrixXd m(n_theta, n_theta);
    for (std::size_t a = 0; a < n_theta; ++a) {
        for (std::size_t b = 0; b < n_theta; ++b) {
            m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = at(a, b).purity;
        }
    }
    return m;
}

BellMaps AngularTomography::bell_maps() const {
    BellMaps maps;
    maps.n_theta = n_theta;
    for (auto b : kBellStates) {
        maps[b] = Eigen::MatrixXd::Zero(n_theta, n_theta);
        for (std::size_t a = 0; a < n_theta; ++a) {
            for (std::size_t c = 0; c < n_theta; ++c) {
                maps[b](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) = at(a, c).bell[b];
            }
        }
    }
    return maps;
}

std::pair<double, double> weighted_mean_stderr(std::span<const double> values, std::span<const double> weights) {
    if (values.size() != weights.size()) {
        throw std::invalid_argument("values and weights differ in length");
    }
    double sw = 0.0;
    double swx = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        sw += weights[k];
        swx += weights[k] * values[k];
    }
    if (!(sw > 0.0)) {
        throw InsufficientData("no weight to average over");
    }
    const double mean = swx / sw;
    double acc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double d = values[k] - mean;
        acc += weights[k] * weights[k] * d * d;
    }
    return {mean, std::sqrt(acc) / sw};
}

AngularTomography angular_tomography(std::span<const CoincidenceHistogram> histograms, const TomographySet& set,
                                     const TomographyOptions& options) {
    std::vector<const CoincidenceHistogram*> ordered;
    std::vector<std::string> missing;
    for (const auto& s : set.settings()) {
        const auto it = std::find_if(histograms.begin(), histograms.end(),
                                     [&](const CoincidenceHistogram& h) { return h.label == s.label(); });
        if (it == histograms.end()) {
            missing.push_back(s.label());
        } else {
            ordered.push_back(&*it);
        }
    }
    if (!missing.empty()) {
        throw ConfigurationError(fmt::format("missing histograms for settings: {}", fmt::join(missing, ", ")));
    }
    const std::size_t n = ordered.front()->n_theta;
    for (const auto* h : ordered) {
        if (!h->same_shape(*ordered.front()) || static_cast<std::size_t>(h->counts_theta.rows()) != n ||
            static_cast<std::size_t>(h->counts_theta.cols()) != n) {
            throw ConfigurationError("histograms disagree on binning (" + h->label + ")");
        }
        if (options.subtract_accidentals && (h->accidentals_theta.rows() != h->counts_theta.rows() ||
                                             h->accidentals_theta.cols() != h->counts_theta.cols())) {
            throw ConfigurationError("accidental subtraction requested but " + h->label + " has no estimate");
        }
    }
    if (n == 0) {
        throw ConfigurationError("histograms have no angular bins");
    }

    AngularTomography out;
    out.n_theta = n;
    out.bins.resize(n * n);
    parallel_for(n * n, options.threads, [&](std::size_t cell) {
        const auto a = static_cast<Eigen::Index>(cell / n);
        const auto b = static_cast<Eigen::Index>(cell % n);
        SettingCounts counts;
        for (std::size_t k = 0; k < 16; ++k) {
            double c = static_cast<double>(ordered[k]->counts_theta(a, b));
            if (options.subtract_accidentals) {
                c = std::max(0.0, c - static_cast<double>(ordered[k]->accidentals_theta(a, b)));
            }
            counts[static_cast<Eigen::Index>(k)] = c;
        }
        TomographyResult& r = out.bins[cell];
        r.bin_s = static_cast<std::size_t>(a);
        r.bin_i = static_cast<std::size_t>(b);
        r.counts_used = counts.sum();
        r.low_statistics = r.counts_used < options.min_counts;
        try {
            r.rho = project_physical(linear_inversion(counts, set));
        } catch (const InsufficientData&) {
            r.low_statistics = true;
            return;
        }
        if (options.mle) {
            try {
                r.rho = mle_refine(r.rho, counts, set, options.mle_options).rho;
            } catch (const ConvergenceError& e) {
                r.rho = e.best();
                r.mle_converged = false;
            }
        }
        r.concurrence = concurrence(r.rho);
        r.purity = purity(r.rho);
        r.bell = bell_decomposition(r.rho);
    });

    std::vector<double> values;
    std::vector<double> weights;
    for (const auto& r : out.bins) {
        out.mle_unconverged += !r.mle_converged;
        if (!r.low_statistics) {
            values.push_back(r.concurrence);
            weights.push_back(r.counts_used);
        }
    }
    out.bins_used = values.size();
    if (!values.empty()) {
        std::tie(out.average_concurrence, out.concurrence_stderr) = weighted_mean_stderr(values, weights);
    }
    return out;
}

}  // namespace evblab
