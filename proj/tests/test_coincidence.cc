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

#include "evblab/coincidence.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <tuple>

#include "evblab/error.h"
#include "evblab/eventsim.h"
#include "evblab/polarimetry.h"
#include "gtest/gtest.h"
#include "test_support.h"

using namespace evblab;
namespace oracle = evblab::testing;

namespace {

using IndexPairs = std::vector<std::pair<std::size_t, std::size_t>>;

const CameraGeometry kGeom{};

EventRecord at(int x, int y, std::uint64_t t) {
    return {static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t, 100};
}

EventRecord sig(std::uint64_t t) { return at(20, 20, t); }
EventRecord idl(std::uint64_t t) { return at(220, 220, t); }

// Bursty stream: clusters of events a few ns apart so that windows overlap.
EventStream random_stream(std::mt19937_64& rng, std::size_t n) {
    EventStream out;
    std::uniform_int_distribution<int> region(0, 9);
    std::uniform_int_distribution<int> px(0, 39);
    std::geometric_distribution<int> gap(0.05);
    std::uniform_int_distribution<int> burst(0, 3);
    std::uint64_t t = 0;
    while (out.size() < n) {
        t += static_cast<std::uint64_t>(burst(rng) == 0 ? 50 * gap(rng) : gap(rng) % 7);
        const int r = region(rng);
        if (r < 4) {
            out.push_back(at(8 + px(rng), 8 + px(rng), t));
        } else if (r < 8) {
            out.push_back(at(208 + px(rng), 208 + px(rng), t));
        } else {
            out.push_back(at(120 + px(rng), 20 + px(rng), t));
        }
    }
    return out;
}

IndexPairs sorted(IndexPairs v) {
    std::sort(v.begin(), v.end());
    return v;
}

EventStream dark_stream(std::mt19937_64& rng, std::size_t per_roi, std::uint64_t span_ns) {
    std::uniform_int_distribution<std::uint64_t> t(0, span_ns - 1);
    std::uniform_int_distribution<int> px(0, 39);
    EventStream out;
    for (std::size_t k = 0; k < per_roi; ++k) {
        out.push_back(at(8 + px(rng), 8 + px(rng), t(rng)));
        out.push_back(at(208 + px(rng), 208 + px(rng), t(rng)));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    return out;
}

}  // namespace

TEST(coincidence, spec_examples) {
    const CoincidenceConfig cfg;
    {
        const EventStream s = {sig(100), idl(105), sig(500), idl(900)};
        const auto p = find_coincidences(s, kGeom, cfg);
        ASSERT_EQ(p.size(), 1u);
        EXPECT_EQ(p[0].first.t, 100u);
        EXPECT_EQ(p[0].second.t, 105u);
    }
    EXPECT_TRUE(find_coincidences({}, kGeom, cfg).empty());
    {
        const EventStream s = {idl(95), sig(100), idl(104)};
        const auto p = find_coincidences(s, kGeom, cfg);
        ASSERT_EQ(p.size(), 1u);
        EXPECT_EQ(p[0].second.t, 104u);
    }
    {
        // Equal distance: the earlier idler wins.
        const EventStream s = {idl(95), sig(100), idl(105)};
        const auto p = find_coincidences(s, kGeom, cfg);
        ASSERT_EQ(p.size(), 1u);
        EXPECT_EQ(p[0].second.t, 95u);
    }
    {
        CoincidenceConfig multi = cfg;
        multi.allow_multi_match = true;
        const EventStream s = {idl(95), sig(100), idl(105)};
        EXPECT_EQ(find_coincidences(s, kGeom, multi).size(), 2u);
    }
}

TEST(coincidence, window_is_inclusive_and_floored) {
    CoincidenceConfig cfg;
    cfg.window_ns = 10.7;
    EXPECT_EQ(find_coincidences(EventStream{sig(100), idl(110)}, kGeom, cfg).size(), 1u);
    EXPECT_EQ(find_coincidences(EventStream{sig(100), idl(111)}, kGeom, cfg).size(), 0u);
    cfg.window_ns = 0;
    EXPECT_THROW(find_coincidences(EventStream{}, kGeom, cfg), std::invalid_argument);
}

TEST(coincidence, unsorted_stream_is_rejected) {
    const EventStream s = {sig(100), idl(90)};
    EXPECT_THROW(find_coincidences(s, kGeom, {}), FormatError);
    EXPECT_THROW(find_coincidence_indices_chunked(s, kGeom, {}, 10), FormatError);
}

TEST(coincidence, matches_brute_force) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> size(0, 1500);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t n = trial % 40 == 0 ? 10000 : size(rng);
        const auto stream = random_stream(rng, n);
        for (double w : {1.0, 10.0, 100.0}) {
            for (bool multi : {false, true}) {
                const CoincidenceConfig cfg{w, multi};
                const auto got = find_coincidence_indices(stream, kGeom, cfg);
                const auto want = oracle::brute_force_coincidences(stream, kGeom, w, multi);
                ASSERT_EQ(sorted(got.pairs), sorted(want)) << "trial " << trial << " w " << w << " multi " << multi;
            }
        }
    }
}

TEST(coincidence, shifted_matching_matches_brute_force) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto stream = random_stream(rng, 800);
        for (std::int64_t offset : {-300, 40, 1000}) {
            const CoincidenceConfig cfg{10.0, false};
            const auto got = find_coincidence_indices(stream, kGeom, cfg, offset);
            EXPECT_EQ(sorted(got.pairs), sorted(oracle::brute_force_coincidences(stream, kGeom, 10.0, false, offset)));
        }
    }
}

TEST(coincidence, chunking_does_not_change_the_result) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto stream = random_stream(rng, 5000);
        for (bool multi : {false, true}) {
            const CoincidenceConfig cfg{10.0, multi};
            const auto ref = find_coincidence_indices(stream, kGeom, cfg);
            for (std::size_t chunk : {1u, 13u, 500u, 100000u}) {
                for (std::size_t threads : {1u, 3u}) {
                    const auto got = find_coincidence_indices_chunked(stream, kGeom, cfg, chunk, threads);
                    EXPECT_EQ(got.pairs, ref.pairs) << chunk;
                    EXPECT_EQ(got.singles, ref.singles);
                    EXPECT_EQ(got.signal_events, ref.signal_events);
                    EXPECT_EQ(got.outside_events, ref.outside_events);
                }
            }
        }
    }
    EXPECT_THROW(find_coincidence_indices_chunked(EventStream{}, kGeom, {}, 0), std::invalid_argument);
}

TEST(coincidence, bin_polar_example) {
    PolarBinning b;
    auto h = CoincidenceHistogram::empty("HH", b);
    EXPECT_TRUE(h.add(b, {5.0, 0.1}, {5.0, 3.2}));
    EXPECT_EQ(h.counts_theta(0, 8), 1u);
    EXPECT_EQ(h.counts_theta.sum(), 1u);
    EXPECT_EQ(h.counts_r(1, 1), 1u);
    EXPECT_FALSE(h.add(b, {25.0, 0.1}, {5.0, 3.2}));
    EXPECT_EQ(h.dropped_by_radius, 1u);
    EXPECT_EQ(h.total_pairs, 1u);

    // The same through pixel coordinates: (37, 28) and (217, 227) about the default centroids.
    const std::vector<std::pair<EventRecord, EventRecord>> pairs = {{at(37, 28, 0), at(217, 227, 0)}};
    const auto hp = bin_polar(pairs, b, "HH");
    EXPECT_EQ(hp.counts_theta(0, 8), 1u);
    EXPECT_EQ(hp.counts_r(2, 2), 1u);

    const auto empty = bin_polar({}, b);
    EXPECT_EQ(empty.counts_theta.sum(), 0u);
    EXPECT_EQ(empty.counts_r.sum(), 0u);
}

TEST(coincidence, polar_geometry) {
    const auto p = to_polar(27.5, 37.5, {27.5, 27.5});
    EXPECT_DOUBLE_EQ(p.r, 10.0);
    EXPECT_DOUBLE_EQ(p.theta, std::numbers::pi / 2);
    EXPECT_NEAR(to_polar(27.5, 17.5, {27.5, 27.5}).theta, 1.5 * std::numbers::pi, 1e-15);
    PolarBinning b;
    EXPECT_EQ(b.theta_bin(2 * std::numbers::pi - 1e-16), 15u);
    EXPECT_EQ(b.r_bin(20.0), 4u);
    EXPECT_FALSE(b.r_bin(20.0001).has_value());
    b.n_theta = 0;
    EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(coincidence, full_histogram_indexing) {
    PolarBinning b;
    b.n_r = 2;
    b.n_theta = 4;
    auto h = CoincidenceHistogram::empty("x", b, true);
    ASSERT_TRUE(h.counts_full.has_value());
    EXPECT_EQ(h.counts_full->rows(), 8);
    h.add(b, {15.0, 4.0}, {1.0, 0.5});
    // r bin 1, theta bin 2 -> 6; r bin 0, theta bin 0 -> 0
    EXPECT_EQ((*h.counts_full)(6, 0), 1u);
    EXPECT_EQ(h.counts_full->sum(), 1u);
}

TEST(coincidence, conservation_identity) {
    RunManifest m;
    m.duration = 0.05;
    m.pair_rate = 4e5;
    m.noise.efficiency = 0.7;
    m.noise.dark_rate = 5.0;
    const auto run = RunSimulator(m).simulate(2);
    PolarBinning b;
    b.r_max = 15.0;
    const auto h = histogram_stream(run.events, m.geometry, {}, b, "HA");
    EXPECT_EQ(h.counts_theta.sum(), h.total_pairs);
    EXPECT_EQ(h.counts_r.sum(), h.total_pairs);
    EXPECT_GT(h.dropped_by_radius, 0u);
    EXPECT_EQ(2 * h.total_pairs + 2 * h.dropped_by_radius + h.total_singles + h.outside_roi, h.total_events);
    EXPECT_EQ(h.total_events, run.events.size());
}

TEST(coincidence, ideal_run_matches_expected_histogram) {
    RunManifest m;
    m.qplate_s = QPlateParams::tuned(0.5);
    m.qplate_i = QPlateParams::tuned(0.5);
    m.duration = 480.0;
    m.pair_rate = 1e5 / 480.0;
    const auto run = RunSimulator(m).simulate(0);
    ASSERT_EQ(run.report.label, "HH");
    PolarBinning b;
    const auto h = histogram_stream(run.events, m.geometry, {}, b, "HH");
    EXPECT_GT(h.total_pairs, 22000u);  // HH passes a quarter of the pairs
    const double n = static_cast<double>(m.pairs_per_setting());
    const auto e = expected_histogram(m.state(), MeasurementSetting::parse("HH"), b, n);

    // The camera bins positions into pixels and the analysis uses pixel
    // centres, so the oracle integrates N F^2 sin^2(ts - ti) / 2 over each
    // pixel and assigns it to the bin of the pixel centre. The density splits
    // into F_s^2 F_i^2 [1 - cos 2ts cos 2ti - sin 2ts sin 2ti] / 4.
    auto per_bin = [&](const PixelRect& roi, const Point2& c) {
        Eigen::MatrixXd acs = Eigen::MatrixXd::Zero(16, 3);
        const int sub = 6;
        for (int py = roi.y0; py < roi.y0 + roi.height; ++py) {
            for (int px = roi.x0; px < roi.x0 + roi.width; ++px) {
                const auto pc = to_polar(px, py, c);
                const auto bin = b.r_bin(pc.r);
                if (!bin) {
                    continue;
                }
                double w0 = 0, wc = 0, ws = 0;
                for (int u = 0; u < sub; ++u) {
                    for (int v = 0; v < sub; ++v) {
                        const double dx = px - 0.5 + (u + 0.5) / sub - c.x;
                        const double dy = py - 0.5 + (v + 0.5) / sub - c.y;
                        const double f = std::pow(oracle::lg_radial(1, 10.0, std::hypot(dx, dy)), 2) / (sub * sub);
                        const double th = std::atan2(dy, dx);
                        w0 += f;
                        wc += f * std::cos(2 * th);
                        ws += f * std::sin(2 * th);
                    }
                }
                const auto t = static_cast<Eigen::Index>(b.theta_bin(pc.theta));
                acs(t, 0) += w0;
                acs(t, 1) += wc;
                acs(t, 2) += ws;
            }
        }
        return acs;
    };
    const auto ps = per_bin(m.geometry.roi_signal, b.centroid_s);
    const auto pi = per_bin(m.geometry.roi_idler, b.centroid_i);
    const Eigen::MatrixXd pixel_oracle =
        n / 4 * (ps.col(0) * pi.col(0).transpose() - ps.col(1) * pi.col(1).transpose() -
                 ps.col(2) * pi.col(2).transpose());

    int outside = 0;
    for (Eigen::Index a = 0; a < 16; ++a) {
        for (Eigen::Index c = 0; c < 16; ++c) {
            const double mu = pixel_oracle(a, c);
            const double z = (static_cast<double>(h.counts_theta(a, c)) - mu) / std::sqrt(std::max(mu, 1.0));
            outside += std::abs(z) > 4;
        }
        // sin^2(theta_s - theta_i) vanishes on the diagonal
        EXPECT_LT(e.counts_theta(a, a), 0.04 * e.counts_theta.maxCoeff());
    }
    EXPECT_LE(outside, 2);  // 99 % of 256 bins
    // The continuous prediction keeps the total; single bins move by up to about a fifth of the peak.
    EXPECT_NEAR(pixel_oracle.sum(), e.total, 0.01 * e.total);
    EXPECT_LT((pixel_oracle - e.counts_theta).cwiseAbs().maxCoeff(), 0.25 * e.counts_theta.maxCoeff());
}

TEST(coincidence, accidentals_on_ideal_run_are_negligible) {
    RunManifest m;
    m.pair_rate = 1e5 / 480.0;
    const auto run = RunSimulator(m).simulate(1);
    EXPECT_LE(accidental_estimate(run.events, m.geometry, {}, 1'000'000), 3.0);
    EXPECT_THROW(accidental_estimate(run.events, m.geometry, {}, 5), std::invalid_argument);
}

TEST(coincidence, accidentals_of_dark_streams) {
    std::mt19937_64 rng(99);
    const CoincidenceConfig cfg{100.0, false};
    const auto low = dark_stream(rng, 50000, 1'000'000'000);
    const double true_low = static_cast<double>(find_coincidences(low, kGeom, cfg).size());
    const double acc_low = accidental_estimate(low, kGeom, cfg, 1'000'000);
    EXPECT_GT(true_low, 200.0);
    EXPECT_LT(std::abs(acc_low - true_low), 3 * std::sqrt(acc_low + true_low));

    const auto high = dark_stream(rng, 100000, 1'000'000'000);
    const double acc_high = accidental_estimate(high, kGeom, cfg, 1'000'000);
    const double ratio = acc_high / acc_low;
    const double sigma = ratio * std::sqrt(1 / acc_high + 1 / acc_low);
    EXPECT_LT(std::abs(ratio - 4.0), 3 * sigma) << ratio;
}

TEST(coincidence, accidental_histogram_in_stream_analysis) {
    std::mt19937_64 rng(3);
    const auto s = dark_stream(rng, 20000, 100'000'000);
    HistogramOptions opt;
    opt.accidental_offset_ns = 1'000'000;
    const auto h = histogram_stream(s, kGeom, {}, PolarBinning{}, "HV", opt);
    ASSERT_EQ(h.accidentals_theta.rows(), 16);
    EXPECT_GT(h.accidentals_theta.sum(), 0u);
    const auto plain = histogram_stream(s, kGeom, {}, PolarBinning{}, "HV");
    EXPECT_EQ(plain.accidentals_theta.size(), 0);
    EXPECT_EQ(plain.counts_theta, h.counts_theta);
}

TEST(coincidence, centroid) {
    CentroidAccumulator acc(kGeom.roi_signal);
    EXPECT_EQ(acc.centroid(), kGeom.roi_signal.center());
    const EventStream a = {at(10, 10, 0), at(20, 30, 1), at(220, 220, 2)};
    acc.add(a);
    EXPECT_EQ(acc.count(), 2u);
    EXPECT_EQ(acc.centroid(), (Point2{15, 20}));
    const std::vector<EventStream> streams = {a, {at(30, 20, 0)}};
    EXPECT_EQ(intensity_centroid(streams, kGeom.roi_signal), (Point2{20, 20}));
}

TEST(coincidence, pixel_pair_histogram) {
    PixelPairHistogram h(kGeom);
    EXPECT_EQ(h.addressable_pairs(), 2'560'000u);
    std::map<std::tuple<int, int, int, int>, std::uint64_t> ref;
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> px(0, 39);
    for (int k = 0; k < 100000; ++k) {
        const auto s = at(8 + px(rng), 8 + px(rng) % 3, 0);
        const auto i = at(208 + px(rng), 208 + px(rng), 0);
        ASSERT_TRUE(h.add(s, i));
        ++ref[{s.x, s.y, i.x, i.y}];
    }
    for (const auto& [k, n] : ref) {
        ASSERT_EQ(h.count(std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k)), n);
    }
    EXPECT_EQ(h.count(8, 47, 208, 208), 0u);
    EXPECT_THROW(h.count(0, 0, 208, 208), std::out_of_range);
    EXPECT_FALSE(h.add(at(0, 0, 0), at(210, 210, 0)));
    EXPECT_EQ(h.total(), 100000u);
}
