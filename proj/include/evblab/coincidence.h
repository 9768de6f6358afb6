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

#ifndef EVBLAB_COINCIDENCE_H
#define EVBLAB_COINCIDENCE_H

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evblab/camera.h"
#include "evblab/event_io.h"

namespace evblab {

struct CoincidenceConfig {
    double window_ns = 10.0;
    bool allow_multi_match = false;

    void validate() const;
};

using CountMatrix = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Index pairs (signal, idler) into the analysed stream plus region bookkeeping.
struct CoincidenceResult {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t signal_events = 0;
    std::size_t idler_events = 0;
    std::size_t outside_events = 0;
    std::size_t singles = 0;  // ROI events that joined no pair
};

/// Two-pointer sweep. Single-match mode pairs each signal event (in stream
/// order) with the nearest-in-time unmatched idler event inside the window,
/// ties going to the earlier idler. Multi-match mode emits every in-window
/// pair. Idler times are shifted by `idler_offset_ns` before matching.
/// Throws FormatError for a stream not sorted by time.
CoincidenceResult find_coincidence_indices(std::span<const EventRecord> stream, const CameraGeometry& geometry,
                                           const CoincidenceConfig& config, std::int64_t idler_offset_ns = 0);

std::vector<std::pair<EventRecord, EventRecord>> find_coincidences(std::span<const EventRecord> stream,
                                                                   const CameraGeometry& geometry,
                                                                   const CoincidenceConfig& config);

/// Same result as find_coincidence_indices, computed over time chunks of about
/// `chunk_events` events in parallel. Chunk edges are moved to quiet gaps
/// longer than the window, so the output does not depend on the chunk size.
CoincidenceResult find_coincidence_indices_chunked(std::span<const EventRecord> stream, const CameraGeometry& geometry,
                                                   const CoincidenceConfig& config, std::size_t chunk_events,
                                                   std::size_t threads = 0);

/// Coincidences counted with idler times shifted by `offset_ns` (>> window);
/// an estimate of the accidental count in the unshifted data.
double accidental_estimate(std::span<const EventRecord> stream, const CameraGeometry& geometry,
                           const CoincidenceConfig& config, std::int64_t offset_ns);

struct PolarBinning {
    std::size_t n_r = 5;
    std::size_t n_theta = 16;
    double r_max = 20.0;  // pixels
    Point2 centroid_s{27.5, 27.5};
    Point2 centroid_i{227.5, 227.5};

    void validate() const;
    /// Bin of a polar coordinate; nullopt beyond r_max.
    std::optional<std::size_t> r_bin(double r) const;
    std::size_t theta_bin(double theta) const;
};

struct PolarCoordinate {
    double r = 0.0;
    double theta = 0.0;  // [0, 2 pi)
};

PolarCoordinate to_polar(double x, double y, const Point2& centroid);

/// Pair counts over polar bins for one measurement setting.
struct CoincidenceHistogram {
    std::string label;
    std::size_t n_r = 0;
    std::size_t n_theta = 0;
    CountMatrix counts_theta;  // n_theta x n_theta, row = signal bin, summed over r
    CountMatrix counts_r;      // n_r x n_r, summed over theta
    std::optional<CountMatrix> counts_full;  // (r * n_theta + theta) indexed, dense
    CountMatrix accidentals_theta;           // empty unless estimated

    std::uint64_t total_pairs = 0;        // coincidences inside r_max
    std::uint64_t dropped_by_radius = 0;  // coincidences with either photon beyond r_max
    std::uint64_t total_singles = 0;
    std::uint64_t outside_roi = 0;
    std::uint64_t total_events = 0;

    static CoincidenceHistogram empty(std::string label, const PolarBinning& binning, bool full = false);

    /// Adds one pair by polar coordinates; returns false (and counts the drop)
    /// when either radius exceeds r_max.
    bool add(const PolarBinning& binning, const PolarCoordinate& s, const PolarCoordinate& i);
    bool same_shape(const CoincidenceHistogram& o) const { return n_r == o.n_r && n_theta == o.n_theta; }
};

CoincidenceHistogram bin_polar(std::span<const std::pair<EventRecord, EventRecord>> pairs, const PolarBinning& binning,
                               std::string label = {}, bool full = false);

struct HistogramOptions {
    bool full = false;
    // Shifted-window accidental histogram; 0 disables.
    std::int64_t accidental_offset_ns = 0;
    std::size_t chunk_events = 1 << 20;
    std::size_t threads = 0;
};

/// find_coincidences + bin_polar with complete event bookkeeping.
CoincidenceHistogram histogram_stream(std::span<const EventRecord> stream, const CameraGeometry& geometry,
                                      const CoincidenceConfig& config, const PolarBinning& binning, std::string label,
                                      const HistogramOptions& options = {});

/// Running mean pixel position of the events falling in one ROI.
class CentroidAccumulator {
   public:
    explicit CentroidAccumulator(const PixelRect& roi) : roi_(roi) {}
    void add(std::span<const EventRecord> events);
    /// The ROI centre while no event has been seen.
    Point2 centroid() const;
    std::uint64_t count() const { return n_; }

   private:
    PixelRect roi_;
    double sx_ = 0.0;
    double sy_ = 0.0;
    std::uint64_t n_ = 0;
};

/// Mean pixel position of the events falling in `roi`, over all streams.
/// Returns the ROI centre when it holds no events.
Point2 intensity_centroid(std::span<const EventStream> streams, const PixelRect& roi);

/// Full-resolution pair counts indexed by (signal pixel, idler pixel) inside the ROIs.
class PixelPairHistogram {
   public:
    explicit PixelPairHistogram(const CameraGeometry& geometry);

    std::size_t addressable_pairs() const { return counts_.size(); }
    /// Returns false when either event lies outside its ROI.
    bool add(const EventRecord& s, const EventRecord& i);
    /// Throws std::out_of_range for pixels outside the ROIs.
    std::uint64_t count(int sx, int sy, int ix, int iy) const;
    std::uint64_t total() const { return total_; }

   private:
    std::optional<std::size_t> index(int sx, int sy, int ix, int iy) const;

    PixelRect roi_s_;
    PixelRect roi_i_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

}  // namespace evblab

#endif
