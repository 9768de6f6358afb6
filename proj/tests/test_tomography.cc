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

#include <cmath>
#include <random>

#include "evblab/eventsim.h"
#include "gtest/gtest.h"
#include "test_support.h"

using namespace evblab;
namespace oracle = evblab::testing;

namespace {

// <pi|rho|pi> with the analyzer vectors written out directly.
SettingCounts hand_probabilities(const DensityMatrix& rho, const TomographySet& set) {
    const double h = 1 / std::sqrt(2.0);
    const cplx i{0, 1};
    auto vec = [&](PolBasis p) -> Eigen::Vector2cd {
        switch (p) {
            case PolBasis::H: return {1, 0};
            case PolBasis::V: return {0, 1};
            case PolBasis::D: return {h, h};
            case PolBasis::A: return {h, -h};
            case PolBasis::L: return {h, i * h};
            default: return {h, -i * h};
        }
    };
    SettingCounts out;
    for (std::size_t k = 0; k < 16; ++k) {
        const auto& s = set.settings()[k];
        const Eigen::Vector2cd a = vec(s.pol_s());
        const Eigen::Vector2cd b = vec(s.pol_i());
        const Eigen::Vector4cd v(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]);
        out[static_cast<Eigen::Index>(k)] = std::real(v.dot(rho * v));
    }
    return out;
}

DensityMatrix pure(const Eigen::Vector4cd& v) { return v * v.adjoint() / v.squaredNorm(); }

TomographyResult analyse_single(const DensityMatrix& rho, double flux) {
    const auto& set = standard_set();
    std::vector<CoincidenceHistogram> hs;
    PolarBinning b;
    b.n_theta = 4;
    b.n_r = 1;
    const SettingCounts p = hand_probabilities(rho, set);
    for (std::size_t k = 0; k < 16; ++k) {
        auto h = CoincidenceHistogram::empty(set.settings()[k].label(), b);
        h.counts_theta.setConstant(static_cast<std::uint64_t>(std::llround(flux * p[static_cast<Eigen::Index>(k)])));
        hs.push_back(h);
    }
    return angular_tomography(hs, set).at(1, 2);
}

// Runs generate -> coincide -> tomography in memory.
AngularTomography pipeline(const RunManifest& m, std::size_t n_theta, bool mle = false) {
    const RunSimulator sim(m);
    PolarBinning b;
    b.n_theta = n_theta;
    std::vector<CoincidenceHistogram> hs;
    for (std::size_t k = 0; k < sim.size(); ++k) {
        const auto run = sim.simulate(k);
        hs.push_back(histogram_stream(run.events, m.geometry, {}, b, run.report.label));
    }
    TomographyOptions opt;
    opt.mle = mle;
    return angular_tomography(hs, m.tomography_set(), opt);
}

}  // namespace

TEST(tomography, forward_probabilities_match_hand_projection) {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 10; ++k) {
        const auto rho = oracle::random_density(rng);
        EXPECT_LT((forward_probabilities(rho, standard_set()) - hand_probabilities(rho, standard_set())).norm(), 1e-14);
    }
}

TEST(tomography, linear_inversion_examples) {
    const auto& set = standard_set();
    DensityMatrix hh = DensityMatrix::Zero();
    hh(0, 0) = 1;
    EXPECT_LT((linear_inversion(hand_probabilities(hh, set), set) - hh).norm(), 1e-12);
    const DensityMatrix psi = pure(oracle::psi_minus());
    EXPECT_LT((linear_inversion(hand_probabilities(psi, set) * 5000.0, set) - psi).norm(), 1e-12);
    const DensityMatrix mixed = linear_inversion(SettingCounts::Constant(37.0), set);
    EXPECT_LT((mixed - DensityMatrix::Identity() / 4.0).norm(), 1e-12);
}

TEST(tomography, linear_inversion_round_trip) {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 100; ++k) {
        const auto rho = oracle::random_density(rng, 1 + k % 4);
        const auto back = linear_inversion(hand_probabilities(rho, standard_set()) * (1 + k), standard_set());
        ASSERT_LT((back - rho).norm(), 1e-10) << k;
    }
    // A different complete set.
    std::vector<std::string> labels;
    for (char a : std::string("HVDR")) {
        for (char b : std::string("HVDL")) {
            labels.push_back({a, b});
        }
    }
    const auto other = TomographySet::from_labels(labels);
    const auto rho = oracle::random_density(rng);
    EXPECT_LT((linear_inversion(hand_probabilities(rho, other), other) - rho).norm(), 1e-10);
}

TEST(tomography, linear_inversion_errors) {
    const auto& set = standard_set();
    SettingCounts c = SettingCounts::Zero();
    EXPECT_THROW(linear_inversion(c, set), InsufficientData);
    c[5] = 10;  // HV is in the flux subset
    EXPECT_NO_THROW(linear_inversion(c, set));
    c = SettingCounts::Constant(1.0);
    c[3] = -1;
    EXPECT_THROW(linear_inversion(c, set), std::invalid_argument);
    c[3] = NAN;
    EXPECT_THROW(linear_inversion(c, set), std::invalid_argument);
}

TEST(tomography, projection_matches_truncation_algorithm) {
    DensityMatrix d = DensityMatrix::Zero();
    d.diagonal() << 1.1, 0.1, -0.1, -0.1;
    DensityMatrix want = DensityMatrix::Zero();
    want(0, 0) = 1.0;
    EXPECT_LT((project_physical(d) - want).norm(), 1e-12);
    EXPECT_LT((oracle::sgs_projection(d) - want).norm(), 1e-12);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 0.2);
    for (int k = 0; k < 50; ++k) {
        const auto rho = oracle::random_density(rng);
        EXPECT_LT((project_physical(rho) - rho).norm(), 1e-12);
        DensityMatrix noise;
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                noise(r, c) = cplx(n(rng), n(rng));
            }
        }
        DensityMatrix m = rho + noise + noise.adjoint();
        m -= (m.trace().real() - 1) / 4 * DensityMatrix::Identity();
        const auto p = project_physical(m);
        EXPECT_LT((p - oracle::sgs_projection(m)).norm(), 1e-10);
        EXPECT_TRUE(is_physical(p));
        EXPECT_NEAR(p.trace().real(), 1.0, 1e-12);
    }
    DensityMatrix bad = DensityMatrix::Identity() / 4.0;
    bad(0, 1) = 0.1;
    EXPECT_THROW(project_physical(bad), std::invalid_argument);
    EXPECT_FALSE(is_physical(d));
}

TEST(tomography, gradient_matches_finite_differences) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> u(1, 100);
    const auto& set = standard_set();
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::Matrix4cd t;
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                t(r, c) = cplx(n(rng), n(rng));
            }
        }
        SettingCounts counts;
        for (int k = 0; k < 16; ++k) {
            counts[k] = u(rng);
        }
        const auto g = factorized_gradient(t, counts, set);
        const double h = 1e-6;
        double err = 0;
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                for (int part = 0; part < 2; ++part) {
                    const cplx step = part == 0 ? cplx(h, 0) : cplx(0, h);
                    Eigen::Matrix4cd tp = t, tm = t;
                    tp(r, c) += step;
                    tm(r, c) -= step;
                    const double fd = (factorized_log_likelihood(tp, counts, set) -
                                       factorized_log_likelihood(tm, counts, set)) /
                                      (2 * h);
                    const double an = part == 0 ? g(r, c).real() : g(r, c).imag();
                    err = std::max(err, std::abs(fd - an));
                }
            }
        }
        EXPECT_LT(err, 1e-5 * g.norm()) << trial;
    }
}

TEST(tomography, mle_on_exact_counts) {
    std::mt19937_64 rng(5);
    const auto& set = standard_set();
    for (int k = 0; k < 40; ++k) {
        const auto rho = oracle::random_density(rng, 1 + k % 4);
        const SettingCounts counts = hand_probabilities(rho, set) * 1e4;
        const auto start = project_physical(linear_inversion(counts, set));
        const auto r = mle_refine(DensityMatrix::Identity() / 4.0, counts, set);
        EXPECT_GE(fidelity(r.rho, rho), 1 - 1e-8);
        EXPECT_TRUE(is_physical(r.rho));
        for (std::size_t j = 1; j < r.history.size(); ++j) {
            ASSERT_GE(r.history[j], r.history[j - 1]);
        }
        EXPECT_GE(fidelity(mle_refine(start, counts, set).rho, rho), 1 - 1e-8);
    }
}

TEST(tomography, mle_with_poisson_noise) {
    std::mt19937_64 rng(6);
    const auto& set = standard_set();
    const DensityMatrix psi = pure(oracle::psi_minus());
    const SettingCounts p = hand_probabilities(psi, set);
    int good = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        SettingCounts c;
        for (int k = 0; k < 16; ++k) {
            std::poisson_distribution<int> pois(1e4 * p[k]);
            c[k] = pois(rng);
        }
        const auto start = project_physical(linear_inversion(c, set));
        MleResult r;
        try {
            r = mle_refine(start, c, set, {1e-8, 5000});
        } catch (const ConvergenceError& e) {
            r.rho = e.best();
        }
        for (std::size_t j = 1; j < r.history.size(); ++j) {
            ASSERT_GE(r.history[j], r.history[j - 1]);
        }
        good += fidelity(r.rho, psi) >= 0.99;
    }
    EXPECT_GE(good, 95);
}

TEST(tomography, mle_reports_non_convergence) {
    std::mt19937_64 rng(7);
    const auto rho = oracle::random_density(rng, 1);
    const SettingCounts mean = hand_probabilities(rho, standard_set()) * 1e3;
    SettingCounts counts;
    for (Eigen::Index k = 0; k < 16; ++k) {
        counts[k] = std::poisson_distribution<int>(mean[k])(rng);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(linear_inversion(counts, standard_set()));
    ASSERT_LT(es.eigenvalues().minCoeff(), 0.0);
    try {
        mle_refine(DensityMatrix::Identity() / 4.0, counts, standard_set(), {1e-14, 2});
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_TRUE(is_physical(e.best()));
        EXPECT_EQ(e.iterations(), 2);
    }
    EXPECT_THROW(mle_refine(rho, SettingCounts::Zero(), standard_set()), InsufficientData);
    EXPECT_THROW(mle_refine(rho, counts, standard_set(), {0.0, 10}), std::invalid_argument);
}

TEST(tomography, concurrence_examples) {
    EXPECT_EQ(concurrence(pure(oracle::psi_minus())), 1.0);
    EXPECT_EQ(concurrence(DensityMatrix::Identity() / 4.0), 0.0);
    for (int k = 0; k <= 5; ++k) {
        const double p = 0.2 * k;
        EXPECT_NEAR(concurrence(oracle::werner(p)), std::max(0.0, (3 * p - 1) / 2), 1e-9) << p;
    }
    EXPECT_NEAR(concurrence(oracle::werner(0.7)), 0.55, 1e-9);
    DensityMatrix bad = DensityMatrix::Zero();
    bad.diagonal() << 1.2, -0.2, 0, 0;
    EXPECT_THROW(concurrence(bad), std::invalid_argument);
}

TEST(tomography, concurrence_matches_wootters_and_is_continuous) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0, 1);
    for (int k = 0; k < 100; ++k) {
        const auto rho = oracle::random_density(rng, 1 + k % 3);
        const double c = concurrence(rho);
        EXPECT_NEAR(c, oracle::wootters(rho), 1e-7);
        Eigen::Matrix4cd e;
        for (int r = 0; r < 4; ++r) {
            for (int s = 0; s < 4; ++s) {
                e(r, s) = cplx(n(rng), n(rng));
            }
        }
        e = e + e.adjoint();
        e -= e.trace().real() / 4 * Eigen::Matrix4cd::Identity();
        e *= 1e-6 / e.norm();
        // Keep the perturbed state physical by mixing towards I/4.
        const DensityMatrix q = (1 - 1e-5) * (rho + e) + 1e-5 * DensityMatrix::Identity() / 4.0;
        if (!is_physical(q)) {
            continue;
        }
        const double cq = concurrence(q);
        EXPECT_TRUE(std::isfinite(cq));
        EXPECT_GE(cq, 0.0);
        EXPECT_LE(cq, 1.0);
        EXPECT_LT(std::abs(cq - c), 1e-3);
    }
}

TEST(tomography, purity_fidelity_bell) {
    const DensityMatrix psi = pure(oracle::psi_minus());
    EXPECT_NEAR(purity(psi), 1.0, 1e-15);
    EXPECT_NEAR(purity(DensityMatrix::Identity() / 4.0), 0.25, 1e-15);
    EXPECT_NEAR(fidelity(psi, psi), 1.0, 1e-12);
    EXPECT_NEAR(fidelity(psi, DensityMatrix::Identity() / 4.0), 0.25, 1e-12);
    EXPECT_NEAR(fidelity(oracle::werner(0.7), psi), 0.7 + 0.3 / 4, 1e-10);

    const auto phi_plus = pure(Eigen::Vector4cd(1, 0, 0, 1));
    const auto b = bell_decomposition(phi_plus);
    EXPECT_NEAR(b.phi_plus, 1.0, 1e-15);
    EXPECT_NEAR(b.phi_minus + b.psi_plus + b.psi_minus, 0.0, 1e-15);
    const auto m = bell_decomposition(DensityMatrix::Identity() / 4.0);
    for (auto s : kBellStates) {
        EXPECT_NEAR(m[s], 0.25, 1e-15);
    }
    std::mt19937_64 rng(9);
    EXPECT_NEAR(bell_decomposition(oracle::random_density(rng)).sum(), 1.0, 1e-12);
}

TEST(tomography, weighted_mean) {
    const std::vector<double> x = {1.0, 2.0, 4.0};
    const std::vector<double> w = {1.0, 1.0, 2.0};
    const auto [mean, se] = weighted_mean_stderr(x, w);
    EXPECT_DOUBLE_EQ(mean, 11.0 / 4);
    const double want = std::sqrt(std::pow(1 - 2.75, 2) + std::pow(2 - 2.75, 2) + 4 * std::pow(4 - 2.75, 2)) / 4;
    EXPECT_NEAR(se, want, 1e-15);
}

TEST(tomography, angular_tomography_errors) {
    const auto& set = standard_set();
    PolarBinning b;
    std::vector<CoincidenceHistogram> hs;
    for (const auto& s : set.settings()) {
        hs.push_back(CoincidenceHistogram::empty(s.label(), b));
    }
    auto missing = hs;
    missing.erase(missing.begin() + 6);
    try {
        angular_tomography(missing, set);
        FAIL();
    } catch (const ConfigurationError& e) {
        EXPECT_NE(std::string(e.what()).find("VA"), std::string::npos);
    }
    auto mismatched = hs;
    PolarBinning other = b;
    other.n_theta = 8;
    mismatched[3] = CoincidenceHistogram::empty(mismatched[3].label, other);
    EXPECT_THROW(angular_tomography(mismatched, set), ConfigurationError);
    TomographyOptions sub;
    sub.subtract_accidentals = true;
    EXPECT_THROW(angular_tomography(hs, set, sub), ConfigurationError);

    // Empty histograms: every bin is low-statistics and nothing is averaged.
    const auto t = angular_tomography(hs, set);
    EXPECT_EQ(t.bins_used, 0u);
    EXPECT_TRUE(t.at(3, 3).low_statistics);
}

TEST(tomography, single_bin_reconstruction) {
    const auto r = analyse_single(oracle::werner(0.7), 1e6);
    EXPECT_FALSE(r.low_statistics);
    EXPECT_NEAR(r.concurrence, 0.55, 1e-5);
    EXPECT_EQ(r.bin_s, 1u);
    EXPECT_EQ(r.bin_i, 2u);
    const auto low = analyse_single(oracle::werner(0.7), 40);
    EXPECT_TRUE(low.low_statistics);
}

TEST(tomography, ideal_epr_pipeline_is_pure) {
    RunManifest m;
    m.qplate_s = QPlateParams::make(0.5, 0.0);
    m.qplate_i = QPlateParams::make(1.0, 0.0);
    m.pair_rate = 2e5 / m.duration;
    const auto t = pipeline(m, 4, true);
    EXPECT_EQ(t.bins_used, 16u);
    EXPECT_EQ(t.mle_unconverged, 0u);
    for (const auto& b : t.bins) {
        EXPECT_NEAR(b.purity, 1.0, 0.01);
        EXPECT_GT(b.bell.psi_minus, 0.99);
    }
    EXPECT_GT(t.average_concurrence, 0.99);
}

TEST(tomography, tuned_half_half_diagonal_is_psi_minus) {
    RunManifest m;
    m.qplate_s = QPlateParams::tuned(0.5);
    m.qplate_i = QPlateParams::tuned(0.5);
    m.pair_rate = 2e5 / m.duration;
    const auto t = pipeline(m, 8);
    for (std::size_t a = 0; a < 8; ++a) {
        const auto& b = t.at(a, a).bell;
        EXPECT_GT(b.psi_minus, 0.8) << a;
        EXPECT_LT(b.phi_minus, 0.05);
        EXPECT_LT(b.psi_plus, 0.05);
    }
}

TEST(tomography, werner_pipeline_matches_mixed_ideal_run) {
    // White noise with the signal's spatial profile mixes every bin towards I/4
    // by the same fraction.
    RunManifest m;
    m.pair_rate = 1e5 / m.duration;
    const auto ideal = pipeline(m, 8);
    m.noise.werner_p = 0.7;
    m.rng_seed = 2;
    const auto noisy = pipeline(m, 8);
    ASSERT_EQ(noisy.bins_used, ideal.bins_used);
    std::vector<double> values;
    std::vector<double> weights;
    for (const auto& b : ideal.bins) {
        const DensityMatrix mixed = 0.7 * b.rho + 0.3 * DensityMatrix::Identity() / 4.0;
        values.push_back(concurrence(mixed));
        weights.push_back(b.counts_used);
    }
    const double expected = weighted_mean_stderr(values, weights).first;
    EXPECT_NEAR(noisy.average_concurrence, expected,
                4 * std::hypot(noisy.concurrence_stderr, ideal.concurrence_stderr) + 0.01);
    EXPECT_LT(noisy.average_concurrence, ideal.average_concurrence);
    EXPECT_GT(noisy.concurrence_stderr, 0.0);
}
