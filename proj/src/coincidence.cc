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
#include <numbers>
#include <stdexcept>
#include <string>

#include "evblab/error.h"
#include "evblab/parallel.h"

namespace evblab {

namespace {

struct Tagged {
    std::int64_t t;
    std::size_t index;
};

std::int64_t window_ticks(const CoincidenceConfig& config) {
    return static_cast<std::int64_t>(std::floor(config.window_ns));
}

void require_sorted(std::span<const EventRecord> stream) {
    if (!is_time_sorted(stream)) {
        throw FormatError("event stream is not sorted by time");
    }
}

// Matches one time-ordered slice; `signal` and `idler` hold times in
// nondecreasing order. Emits pairs of stream indices.
void sweep(std::span<const Tagged> signal, std::span<const Tagged> idler, std::int64_t window, bool multi,
           std::vector<std::pair<std::size_t, std::size_t>>& out) {
    std::vector<char> matched(idler.size(), 0);
    std::size_t lo = 0;
    for (const auto& s : signal) {
        while (lo < idler.size() && (idler[lo].t < s.t - window || (!multi && matched[lo]))) {
            ++lo;
        }
        if (multi) {
            for (std::size_t j = lo; j < idler.size() && idler[j].t <= s.t + window; ++j) {
                out.emplace_back(s.index, idler[j].index);
            }
            continue;
        }
        std::size_t best = idler.size();
        std::int64_t best_dt = 0;
        for (std::size_t j = lo; j < idler.size() && idler[j].t <= s.t + window; ++j) {
            if (matched[j]) {
                continue;
            }
            const std::int64_t dt = idler[j].t > s.t ? idler[j].t - s.t : s.t - idler[j].t;
            if (best == idler.size() || dt < best_dt) {
                best = j;
                best_dt = dt;
            }
        }
        if (best != idler.size()) {
            matched[best] = 1;
            out.emplace_back(s.index, idler[best].index);
        }
    }
}

struct Partition {
    std::vector<Tagged> signal;
    std::vector<Tagged> idler;
    std::size_t outside = 0;
};

Partition partition(std::span<const EventRecord> stream, const CameraGeometry& geometry, std::int64_t idler_offset) {
    Partition p;
    for (std::size_t k = 0; k < stream.size(); ++k) {
        const auto& e = stream[k];
        switch (classify(geometry, e.x, e.y)) {
            case Region::Signal:
                p.signal.push_back({static_cast<std::int64_t>(e.t), k});
                break;
            case Region::Idler:
                p.idler.push_back({static_cast<std::int64_t>(e.t) + idler_offset, k});
                break;
            case Region::Outside:
                ++p.outside;
                break;
        }
    }
    return p;
}

std::size_t count_singles(const CoincidenceResult& r, std::size_t stream_size) {
    std::vector<char> used(stream_size, 0);
    for (const auto& [s, i] : r.pairs) {
        used[s] = 1;
        used[i] = 1;
    }
    std::size_t in_pairs = 0;
    for (char u : used) {
        in_pairs += static_cast<std::size_t>(u);
    }
    return r.signal_events + r.idler_events - in_pairs;
}

}  // namespace

void CameraGeometry::validate() const {
    if (width <= 0 || height <= 0 || width > 65536 || height > 65536) {
        throw std::invalid_argument("camera size must be within 1..65536 pixels");
    }
    for (const auto* roi : {&roi_signal, &roi_idler}) {
        if (roi->width <= 0 || roi->height <= 0 || roi->x0 < 0 || roi->y0 < 0 || roi->x0 + roi->width > width ||
            roi->y0 + roi->height > height) {
            throw std::invalid_argument("ROI must lie inside the camera");
        }
    }
    if (roi_signal.overlaps(roi_idler)) {
        throw std::invalid_argument("signal and idler ROIs overlap");
    }
    if (!std::isfinite(waist_px) || waist_px <= 0.0) {
        throw std::invalid_argument("waist_px must be positive");
    }
}

void CoincidenceConfig::validate() const {
    if (!std::isfinite(window_ns) || window_ns <= 0.0) {
        throw std::invalid_argument("coincidence window must be positive");
    }
}

CoincidenceResult find_coincidence_indices(std::span<const EventRecord> stream, const CameraGeometry& geometry,
                                           const CoincidenceConfig& config, std::int64_t idler_offset_ns) {
    config.validate();
    require_sorted(stream);
    const Partition p = partition(stream, geometry, idler_offset_ns);
    CoincidenceResult r;
    r.signal_events = p.signal.size();
    r.idler_events = p.idler.size();
    r.outside_events = p.outside;
    sweep(p.signal, p.idler, window_ticks(config), config.allow_multi_match, r.pairs);
    r.singles = count_singles(r, stream.size());
    return r;
}

std::vector<std::pair<EventRecord, EventRecord>> find_coincidences(std::span<const EventRecord> stream,
                                                                   const CameraGeometry& geometry,
                                                                   const CoincidenceConfig& config) {
    const auto r = find_coincidence_indices(stream, geometry, config);
    std::vector<std::pair<EventRecord, EventRecord>> out;
    out.reserve(r.pairs.size());
    for (const auto& [s, i] : r.pairs) {
        out.emplace_back(stream[s], stream[i]);
    }
    return out;
}

CoincidenceResult find_coincidence_indices_chunked(std::span<const EventRecord> stream, const CameraGeometry& geometry,
                                                   const CoincidenceConfig& config, std::size_t chunk_events,
                                                   std::size_t threads) {
    config.validate();
    require_sorted(stream);
    if (chunk_events == 0) {
        throw std::invalid_argument("chunk size must be positive");
    }
    const std::int64_t window = window_ticks(config);

    // Chunk edges sit where consecutive events are more than a window apart,
    // so no pair and no greedy decision can straddle an edge.
    std::vector<std::size_t> edges{0};
    std::size_t next = chunk_events;
    while (next < stream.size()) {
        std::size_t k = next;
        while (k < stream.size() &&
               static_cast<std::int64_t>(stream[k].t) - static_cast<std::int64_t>(stream[k - 1].t) <= window) {
            ++k;
        }
        if (k >= stream.size()) {
            break;
        }
        edges.push_back(k);
        next = k + chunk_events;
    }
    edges.push_back(stream.size());

    const std::size_t n_chunks = edges.size() - 1;
    std::vector<CoincidenceResult> parts(n_chunks);
    parallel_for(n_chunks, threads, [&](std::size_t c) {
        const auto slice = stream.subspan(edges[c], edges[c + 1] - edges[c]);
        const Partition p = partition(slice, geometry, 0);
        auto& r = parts[c];
        r.signal_events = p.signal.size();
        r.idler_events = p.idler.size();
        r.outside_events = p.outside;
        sweep(p.signal, p.idler, window, config.allow_multi_match, r.pairs);
        for (auto& [s, i] : r.pairs) {
            s += edges[c];
            i += edges[c];
        }
    });

    CoincidenceResult out;
    for (auto& r : parts) {
        out.signal_events += r.signal_events;
        out.idler_events += r.idler_events;
        out.outside_events += r.outside_events;
        out.pairs.insert(out.pairs.end(), r.pairs.begin(), r.pairs.end());
    }
    out.singles = count_singles(out, stream.size());
    return out;
}

double accidental_estimate(std::span<const EventRecord> stream, const CameraGeometry& geometry,
                           const CoincidenceConfig& config, std::int64_t offset_ns) {
    if (static_cast<double>(std::llabs(offset_ns)) <= config.window_ns) {
        throw std::invalid_argument("accidental offset must exceed the coincidence window");
    }
    return static_cast<double>(find_coincidence_indices(stream, geometry, config, offset_ns).pairs.size());
}

void PolarBinning::validate() const {
    if (n_r == 0 || n_theta == 0) {
        throw std::invalid_argument("polar binning needs at least one bin per axis");
    }
    if (!std::isfinite(r_max) || r_max <= 0.0) {
        throw std::invalid_argument("r_max must be positive");
    }
}

std::optional<std::size_t> PolarBinning::r_bin(double r) const {
    if (!(r <= r_max)) {
        return std::nullopt;
    }
    const auto b = static_cast<std::size_t>(r / r_max * static_cast<double>(n_r));
    return std::min(b, n_r - 1);
}

std::size_t PolarBinning::theta_bin(double theta) const {
    const auto b = static_cast<std::size_t>(theta / (2.0 * std::numbers::pi) * static_cast<double>(n_theta));
    return std::min(b, n_theta - 1);
}

PolarCoordinate to_polar(double x, double y, const Point2& centroid) {
    const double dx = x - centroid.x;
    const double dy = y - centroid.y;
    double theta = std::atan2(dy, dx);
    if (theta < 0.0) {
        theta += 2.0 * std::numbers::pi;
    }
    if (theta >= 2.0 * std::numbers::pi) {
        theta = 0.0;
    }
    return {std::hypot(dx, dy), theta};
}

CoincidenceHistogram CoincidenceHistogram::empty(std::string label, const PolarBinning& binning, bool full) {
    binning.validate();
    CoincidenceHistogram h;
    h.label = std::move(label);
    h.n_r = binning.n_r;
    h.n_theta = binning.n_theta;
    const auto nt = static_cast<Eigen::Index>(binning.n_theta);
    const auto nr = static_cast<Eigen::Index>(binning.n_r);
    h.counts_theta = CountMatrix::Zero(nt, nt);
    h.counts_r = CountMatrix::Zero(nr, nr);
    if (full) {
        h.counts_full = CountMatrix::Zero(nt * nr, nt * nr);
    }
    return h;
}

bool CoincidenceHistogram::add(const PolarBinning& binning, const PolarCoordinate& s, const PolarCoordinate& i) {
    const auto rs = binning.r_bin(s.r);
    const auto ri = binning.r_bin(i.r);
    if (!rs || !ri) {
        ++dropped_by_radius;
        return false;
    }
    const auto ts = static_cast<Eigen::Index>(binning.theta_bin(s.theta));
    const auto ti = static_cast<Eigen::Index>(binning.theta_bin(i.theta));
    counts_theta(ts, ti) += 1;
    counts_r(static_cast<Eigen::Index>(*rs), static_cast<Eigen::Index>(*ri)) += 1;
    if (counts_full) {
        const auto nt = static_cast<Eigen::Index>(n_theta);
        (*counts_full)(static_cast<Eigen::Index>(*rs) * nt + ts, static_cast<Eigen::Index>(*ri) * nt + ti) += 1;
    }
    ++total_pairs;
    return true;
}

CoincidenceHistogram bin_polar(std::span<const std::pair<EventRecord, EventRecord>> pairs, const PolarBinning& binning,
                               std::string label, bool full) {
    auto h = CoincidenceHistogram::empty(std::move(label), binning, full);
    for (const auto& [s, i] : pairs) {
        h.add(binning, to_polar(s.x, s.y, binning.centroid_s), to_polar(i.x, i.y, binning.centroid_i));
    }
    return h;
}

CoincidenceHistogram histogram_stream(std::span<const EventRecord> stream, const CameraGeometry& geometry,
                                      const CoincidenceConfig& config, const PolarBinning& binning, std::string label,
                                      const HistogramOptions& options) {
    const auto r = find_coincidence_indices_chunked(stream, geometry, config, options.chunk_events, options.threads);
    auto h = CoincidenceHistogram::empty(std::move(label), binning, options.full);
    for (const auto& [s, i] : r.pairs) {
        const auto& es = stream[s];
        const auto& ei = stream[i];
        h.add(binning, to_polar(es.x, es.y, binning.centroid_s), to_polar(ei.x, ei.y, binning.centroid_i));
    }
    h.total_singles = r.singles;
    h.outside_roi = r.outside_events;
    h.total_events = stream.size();
    if (options.accidental_offset_ns != 0) {
        const auto acc = find_coincidence_indices(stream, geometry, config, options.accidental_offset_ns);
        auto scratch = CoincidenceHistogram::empty({}, binning);
        for (const auto& [s, i] : acc.pairs) {
            const auto& es = stream[s];
            const auto& ei = stream[i];
            scratch.add(binning, to_polar(es.x, es.y, binning.centroid_s), to_polar(ei.x, ei.y, binning.centroid_i));
        }
        h.accidentals_theta = std::move(scratch.counts_theta);
    }
    return h;
}

void CentroidAccumulator::add(std::span<const EventRecord> events) {
    for (const auto& e : events) {
        if (roi_.contains(e.x, e.y)) {
            sx_ += e.x;
            sy_ += e.y;
            ++n_;
        }
    }
}

Point2 CentroidAccumulator::centroid() const {
    if (n_ == 0) {
        return roi_.center();
    }
    return {sx_ / static_cast<double>(n_), sy_ / static_cast<double>(n_)};
}

Point2 intensity_centroid(std::span<const EventStream> streams, const PixelRect& roi) {
    CentroidAccumulator acc(roi);
    for (const auto& stream : streams) {
        acc.add(stream);
    }
    return acc.centroid();
}

PixelPairHistogram::PixelPairHistogram(const CameraGeometry& geometry)
    : roi_s_(geometry.roi_signal),
      roi_i_(geometry.roi_idler),
      counts_(static_cast<std::size_t>(geometry.roi_signal.area()) * static_cast<std::size_t>(geometry.roi_idler.area()),
              0) {}

std::optional<std::size_t> PixelPairHistogram::index(int sx, int sy, int ix, int iy) const {
    if (!roi_s_.contains(sx, sy) || !roi_i_.contains(ix, iy)) {
        return std::nullopt;
    }
    const auto s = static_cast<std::size_t>((sy - roi_s_.y0) * roi_s_.width + (sx - roi_s_.x0));
    const auto i = static_cast<std::size_t>((iy - roi_i_.y0) * roi_i_.width + (ix - roi_i_.x0));
    return s * static_cast<std::size_t>(roi_i_.area()) + i;
}

bool PixelPairHistogram::add(const EventRecord& s, const EventRecord& i) {
    const auto k = index(s.x, s.y, i.x, i.y);
    if (!k) {
        return false;
    }
    ++counts_[*k];
    ++total_;
    return true;
}

std::uint64_t PixelPairHistogram::count(int sx, int sy, int ix, int iy) const {
    const auto k = index(sx, sy, ix, iy);
    if (!k) {
        throw std::out_of_range("pixel pair outside the ROIs");
    }
    return counts_[*k];
}

}  // namespace evblab
