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

#ifndef EVBLAB_EVENTSIM_H
#define EVBLAB_EVENTSIM_H

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "evblab/camera.h"
#include "evblab/event_io.h"
#include "evblab/polarimetry.h"
#include "evblab/qplate_state.h"

namespace evblab {

using Rng = std::mt19937_64;

struct NoiseModel {
    double efficiency = 1.0;       // per-photon detection probability
    double dark_rate = 0.0;        // events / s / pixel
    double jitter_sigma_ns = 1.0;  // Gaussian, per photon
    double werner_p = 1.0;         // weight of the pure state; the rest is white polarization noise

    void validate() const;
};

/// Draws two-photon transverse positions from |local_spinor|^2.
///
/// Envelope: pick one of the distinct (ell_s, ell_i) pairs of the state
/// uniformly, radii from the matching LG intensity (u ~ Gamma(|ell| + 1),
/// r = w sqrt(u / 2)), angles uniform. The envelope bound follows from
/// Cauchy-Schwarz over the terms of each circular sector.
class PairSampler {
   public:
    static constexpr int kMaxAttempts = 10000;

    explicit PairSampler(const ModeSuperposition& state);

    /// Throws SamplingError after kMaxAttempts rejections.
    TransversePoint sample_position(Rng& rng) const;
    const LocalSpinorField& field() const { return field_; }
    double envelope_bound() const { return bound_; }

   private:
    double envelope_density(const TransversePoint& x) const;

    LocalSpinorField field_;
    std::vector<std::pair<int, int>> ell_pairs_;
    double waist_s_;
    double waist_i_;
    double bound_;
};

/// One incident pair after the analyzers and detectors.
struct PairOutcome {
    TransversePoint x;
    bool white = false;  // drawn from the white-noise branch
    bool passed_s = false;
    bool passed_i = false;
    bool detected_s = false;  // passed and not lost to detector inefficiency
    bool detected_i = false;
    std::optional<EventRecord> signal;  // absent if blocked, lost or off-camera
    std::optional<EventRecord> idler;
};

/// Samples a position, resolves both analyzer outcomes for `setting` (pure
/// branch with probability werner_p, otherwise each photon passes with
/// probability 1/2), thins by efficiency, and maps survivors to pixels with a
/// common uniform emission time plus independent jitter.
PairOutcome sample_pair(const PairSampler& sampler, const MeasurementSetting& setting, const NoiseModel& noise,
                        const CameraGeometry& geometry, double duration_s, Rng& rng);

struct SettingFile {
    std::string label;
    std::string filename;

    friend bool operator==(const SettingFile&, const SettingFile&) = default;
};

/// The standard 16 settings, each stored as "<label>.evb".
std::vector<SettingFile> standard_setting_files();

struct RunManifest {
    CameraGeometry geometry{};
    std::vector<SettingFile> settings = standard_setting_files();
    double pair_rate = 1e5 / 480.0;     // incident pairs / s, per setting
    double duration = 480.0;            // s per setting
    NoiseModel noise{};
    std::uint64_t rng_seed = 1;
    QPlateParams qplate_s = QPlateParams::tuned(0.5);
    QPlateParams qplate_i = QPlateParams::tuned(1.0);
    double window_ns = 10.0;  // carried for the analysis stage

    /// Throws std::invalid_argument (ranges) or ConfigurationError (settings).
    void validate() const;
    std::uint64_t pairs_per_setting() const;
    TomographySet tomography_set() const;
    ModeSuperposition state() const { return evb_state(qplate_s, qplate_i); }
};

std::string manifest_to_json(const RunManifest& manifest);
/// Throws FormatError naming `source` on malformed JSON or missing fields.
RunManifest manifest_from_json(std::string_view text, std::string_view source = "<memory>");
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

struct SettingReport {
    std::string label;
    std::uint64_t incident_pairs = 0;
    std::uint64_t white_pairs = 0;
    std::uint64_t detected_pairs = 0;  // both photons recorded
    std::uint64_t singles = 0;         // pair photons recorded without their partner
    std::uint64_t dark_events = 0;
    std::uint64_t off_camera = 0;      // photons that passed but missed the sensor
    std::uint64_t total_events = 0;
};

struct SettingRun {
    EventStream events;  // sorted by t
    SettingReport report;
};

/// Per-setting generation with a per-setting RNG derived from the master
/// seed, so settings may be generated in any order or in parallel.
class RunSimulator {
   public:
    explicit RunSimulator(RunManifest manifest);

    const RunManifest& manifest() const { return manifest_; }
    std::size_t size() const { return manifest_.settings.size(); }
    SettingRun simulate(std::size_t index) const;

   private:
    RunManifest manifest_;
    ModeSuperposition state_;
    PairSampler sampler_;
};

Rng setting_rng(std::uint64_t seed, std::size_t index);

/// Writes one event file per setting plus manifest.json into `dir`.
std::vector<SettingReport> generate_run(const RunManifest& manifest, const std::filesystem::path& dir,
                                        std::size_t threads = 0);

}  // namespace evblab

#endif
