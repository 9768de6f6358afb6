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

#include "evblab/eventsim.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "evblab/error.h"
#include "evblab/lgmodes.h"
#include "evblab/parallel.h"
#include "json.hpp"

namespace evblab {

namespace {

using json = nlohmann::ordered_json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool in_unit_interval(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

std::uint16_t draw_tot(Rng& rng) {
    // 25, 50, ..., 400
    std::uniform_int_distribution<int> d(1, 16);
    return static_cast<std::uint16_t>(25 * d(rng));
}

double sector_intensity(const TwoQubit& circ) { return circ.squaredNorm(); }

}  // namespace

void NoiseModel::validate() const {
    if (!in_unit_interval(efficiency)) {
        throw std::invalid_argument("efficiency must lie in [0, 1]");
    }
    if (!std::isfinite(dark_rate) || dark_rate < 0.0) {
        throw std::invalid_argument("dark_rate must be finite and >= 0");
    }
    if (!std::isfinite(jitter_sigma_ns) || jitter_sigma_ns < 0.0) {
        throw std::invalid_argument("jitter_sigma_ns must be finite and >= 0");
    }
    if (!in_unit_interval(werner_p)) {
        throw std::invalid_argument("werner_p must lie in [0, 1]");
    }
}

PairSampler::PairSampler(const ModeSuperposition& state)
    : field_(state), waist_s_(state.waist_s()), waist_i_(state.waist_i()) {
    std::set<std::pair<int, int>> pairs;
    std::array<int, 4> per_sector{};
    std::map<std::pair<int, int>, int> multiplicity;
    double max_amp2 = 0.0;
    for (const auto& t : state.terms()) {
        pairs.insert({t.ell_s, t.ell_i});
        ++multiplicity[{t.ell_s, t.ell_i}];
        const int sector = 2 * (t.pol_s == PolBasis::R) + (t.pol_i == PolBasis::R);
        ++per_sector[static_cast<std::size_t>(sector)];
        max_amp2 = std::max(max_amp2, std::norm(t.amp));
    }
    ell_pairs_.assign(pairs.begin(), pairs.end());
    int mult = 0;
    for (const auto& [k, m] : multiplicity) {
        mult = std::max(mult, m);
    }
    const int n_max = *std::max_element(per_sector.begin(), per_sector.end());
    bound_ = n_max * max_amp2 * mult * static_cast<double>(ell_pairs_.size());
}

double PairSampler::envelope_density(const TransversePoint& x) const {
    double g = 0.0;
    for (const auto& [ls, li] : ell_pairs_) {
        const double fs = lg::evaluate(lg::RadialProfile(lg::LGIndex(ls), waist_s_), x.r_s);
        const double fi = lg::evaluate(lg::RadialProfile(lg::LGIndex(li), waist_i_), x.r_i);
        g += fs * fs * fi * fi;
    }
    return g / static_cast<double>(ell_pairs_.size());
}

TransversePoint PairSampler::sample_position(Rng& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, ell_pairs_.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const auto& [ls, li] = ell_pairs_[pick(rng)];
        std::gamma_distribution<double> gs(std::abs(ls) + 1.0, 1.0);
        std::gamma_distribution<double> gi(std::abs(li) + 1.0, 1.0);
        TransversePoint x;
        x.r_s = waist_s_ * std::sqrt(gs(rng) / 2.0);
        x.theta_s = kTwoPi * unit(rng);
        x.r_i = waist_i_ * std::sqrt(gi(rng) / 2.0);
        x.theta_i = kTwoPi * unit(rng);
        const double f = sector_intensity(field_.circular(x));
        if (unit(rng) * bound_ * envelope_density(x) < f) {
            return x;
        }
    }
    throw SamplingError(fmt::format("rejection sampler gave up after {} attempts", kMaxAttempts));
}

PairOutcome sample_pair(const PairSampler& sampler, const MeasurementSetting& setting, const NoiseModel& noise,
                        const CameraGeometry& geometry, double duration_s, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PairOutcome out;
    out.x = sampler.sample_position(rng);
    out.white = unit(rng) >= noise.werner_p;
    if (out.white) {
        out.passed_s = unit(rng) < 0.5;
        out.passed_i = unit(rng) < 0.5;
    } else {
        const TwoQubit psi = sampler.field().linear(out.x);
        const double norm2 = psi.squaredNorm();
        const MeasurementSetting s_only(setting.pol_s(), orthogonal(setting.pol_i()));
        const MeasurementSetting i_only(orthogonal(setting.pol_s()), setting.pol_i());
        const double p_both = std::norm(setting.projector().dot(psi)) / norm2;
        const double p_s = std::norm(s_only.projector().dot(psi)) / norm2;
        const double p_i = std::norm(i_only.projector().dot(psi)) / norm2;
        const double u = unit(rng);
        if (u < p_both) {
            out.passed_s = out.passed_i = true;
        } else if (u < p_both + p_s) {
            out.passed_s = true;
        } else if (u < p_both + p_s + p_i) {
            out.passed_i = true;
        }
    }
    out.detected_s = out.passed_s && unit(rng) < noise.efficiency;
    out.detected_i = out.passed_i && unit(rng) < noise.efficiency;
    if (!out.detected_s && !out.detected_i) {
        return out;
    }

    const double t0 = unit(rng) * duration_s * 1e9;
    std::normal_distribution<double> jitter(0.0, 1.0);
    auto make_event = [&](double r, double theta, const Point2& c) -> std::optional<EventRecord> {
        const double t = t0 + noise.jitter_sigma_ns * jitter(rng);
        const std::uint16_t tot = draw_tot(rng);
        const long px = std::lround(c.x + r * std::cos(theta));
        const long py = std::lround(c.y + r * std::sin(theta));
        if (px < 0 || py < 0 || px >= geometry.width || py >= geometry.height) {
            return std::nullopt;
        }
        EventRecord e;
        e.x = static_cast<std::uint16_t>(px);
        e.y = static_cast<std::uint16_t>(py);
        e.t = static_cast<std::uint64_t>(std::max(0.0, std::round(t)));
        e.tot = tot;
        return e;
    };
    if (out.detected_s) {
        out.signal = make_event(out.x.r_s, out.x.theta_s, geometry.centroid_s);
    }
    if (out.detected_i) {
        out.idler = make_event(out.x.r_i, out.x.theta_i, geometry.centroid_i);
    }
    return out;
}

std::vector<SettingFile> standard_setting_files() {
    std::vector<SettingFile> v;
    for (const auto& s : standard_set().settings()) {
        v.push_back({s.label(), s.label() + ".evb"});
    }
    return v;
}

void RunManifest::validate() const {
    geometry.validate();
    noise.validate();
    if (!std::isfinite(duration) || duration <= 0.0) {
        throw std::invalid_argument("duration must be positive");
    }
    if (!std::isfinite(pair_rate) || pair_rate < 0.0) {
        throw std::invalid_argument("pair_rate must be finite and >= 0");
    }
    if (!std::isfinite(window_ns) || window_ns <= 0.0) {
        throw std::invalid_argument("coincidence window must be positive");
    }
    std::set<std::string> names;
    for (const auto& s : settings) {
        if (s.filename.empty() || s.filename.find('/') != std::string::npos) {
            throw ConfigurationError("bad event filename for setting " + s.label);
        }
        if (!names.insert(s.filename).second) {
            throw ConfigurationError("duplicate event filename " + s.filename);
        }
    }
    tomography_set();
    state();
}

std::uint64_t RunManifest::pairs_per_setting() const {
    return static_cast<std::uint64_t>(std::llround(pair_rate * duration));
}

TomographySet RunManifest::tomography_set() const {
    std::vector<MeasurementSetting> v;
    for (const auto& s : settings) {
        v.push_back(MeasurementSetting::parse(s.label));
    }
    return TomographySet(std::move(v));
}

namespace {

json rect_json(const PixelRect& r) { return {{"x0", r.x0}, {"y0", r.y0}, {"width", r.width}, {"height", r.height}}; }

PixelRect rect_from(const json& j) {
    return {j.at("x0").get<int>(), j.at("y0").get<int>(), j.at("width").get<int>(), j.at("height").get<int>()};
}

json plate_json(const QPlateParams& p) { return {{"q", p.q.value()}, {"delta", p.delta}, {"waist_px", p.waist}}; }

QPlateParams plate_from(const json& j) {
    return QPlateParams::make(j.at("q").get<double>(), j.at("delta").get<double>(), j.at("waist_px").get<double>());
}

}  // namespace

std::string manifest_to_json(const RunManifest& m) {
    json settings = json::object();
    for (const auto& s : m.settings) {
        settings[s.label] = s.filename;
    }
    json j = {
        {"format", "evblab-run"},
        {"version", 1},
        {"geometry",
         {{"width", m.geometry.width},
          {"height", m.geometry.height},
          {"roi_signal", rect_json(m.geometry.roi_signal)},
          {"roi_idler", rect_json(m.geometry.roi_idler)},
          {"centroid_s", {m.geometry.centroid_s.x, m.geometry.centroid_s.y}},
          {"centroid_i", {m.geometry.centroid_i.x, m.geometry.centroid_i.y}},
          {"waist_px", m.geometry.waist_px}}},
        {"settings", settings},
        {"pair_rate", m.pair_rate},
        {"duration", m.duration},
        {"noise",
         {{"efficiency", m.noise.efficiency},
          {"dark_rate", m.noise.dark_rate},
          {"jitter_sigma_ns", m.noise.jitter_sigma_ns},
          {"werner_p", m.noise.werner_p}}},
        {"rng_seed", m.rng_seed},
        {"qplate_s", plate_json(m.qplate_s)},
        {"qplate_i", plate_json(m.qplate_i)},
        {"coincidence", {{"window_ns", m.window_ns}}},
        // Neither value comes from a measurement; both are tool defaults unless overridden.
        {"assumed_defaults", {"noise.jitter_sigma_ns", "coincidence.window_ns"}},
    };
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text, std::string_view source) {
    try {
        const json j = json::parse(text);
        RunManifest m;
        const auto& g = j.at("geometry");
        m.geometry.width = g.at("width").get<int>();
        m.geometry.height = g.at("height").get<int>();
        m.geometry.roi_signal = rect_from(g.at("roi_signal"));
        m.geometry.roi_idler = rect_from(g.at("roi_idler"));
        m.geometry.centroid_s = {g.at("centroid_s").at(0).get<double>(), g.at("centroid_s").at(1).get<double>()};
        m.geometry.centroid_i = {g.at("centroid_i").at(0).get<double>(), g.at("centroid_i").at(1).get<double>()};
        m.geometry.waist_px = g.at("waist_px").get<double>();
        m.settings.clear();
        for (const auto& [label, file] : j.at("settings").items()) {
            m.settings.push_back({label, file.get<std::string>()});
        }
        m.pair_rate = j.at("pair_rate").get<double>();
        m.duration = j.at("duration").get<double>();
        const auto& n = j.at("noise");
        m.noise.efficiency = n.at("efficiency").get<double>();
        m.noise.dark_rate = n.at("dark_rate").get<double>();
        m.noise.jitter_sigma_ns = n.at("jitter_sigma_ns").get<double>();
        m.noise.werner_p = n.at("werner_p").get<double>();
        m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        m.qplate_s = plate_from(j.at("qplate_s"));
        m.qplate_i = plate_from(j.at("qplate_i"));
        if (j.contains("coincidence")) {
            m.window_ns = j.at("coincidence").value("window_ns", m.window_ns);
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError(fmt::format("{}: malformed manifest: {}", source, e.what()));
    } catch (const std::invalid_argument& e) {
        throw FormatError(fmt::format("{}: invalid manifest value: {}", source, e.what()));
    }
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    out << manifest_to_json(manifest);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open manifest " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str(), path.string());
}

Rng setting_rng(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    return Rng(seq);
}

RunSimulator::RunSimulator(RunManifest manifest)
    : manifest_(std::move(manifest)), state_(manifest_.state()), sampler_(state_) {
    manifest_.validate();
}

SettingRun RunSimulator::simulate(std::size_t index) const {
    const auto& m = manifest_;
    const auto setting = MeasurementSetting::parse(m.settings.at(index).label);
    Rng rng = setting_rng(m.rng_seed, index);
    SettingRun run;
    auto& rep = run.report;
    rep.label = setting.label();
    rep.incident_pairs = m.pairs_per_setting();
    for (std::uint64_t k = 0; k < rep.incident_pairs; ++k) {
        const PairOutcome o = sample_pair(sampler_, setting, m.noise, m.geometry, m.duration, rng);
        rep.white_pairs += o.white;
        rep.off_camera += (o.detected_s && !o.signal) + (o.detected_i && !o.idler);
        if (o.signal) {
            run.events.push_back(*o.signal);
        }
        if (o.idler) {
            run.events.push_back(*o.idler);
        }
        if (o.signal && o.idler) {
            ++rep.detected_pairs;
        } else if (o.signal || o.idler) {
            ++rep.singles;
        }
    }

    const double mean_dark = m.noise.dark_rate * m.duration * m.geometry.width * m.geometry.height;
    if (mean_dark > 0.0) {
        std::poisson_distribution<std::uint64_t> poisson(mean_dark);
        rep.dark_events = poisson(rng);
        std::uniform_int_distribution<int> dx(0, m.geometry.width - 1);
        std::uniform_int_distribution<int> dy(0, m.geometry.height - 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::uint64_t k = 0; k < rep.dark_events; ++k) {
            EventRecord e;
            e.x = static_cast<std::uint16_t>(dx(rng));
            e.y = static_cast<std::uint16_t>(dy(rng));
            e.t = static_cast<std::uint64_t>(std::floor(unit(rng) * m.duration * 1e9));
            e.tot = draw_tot(rng);
            run.events.push_back(e);
        }
    }
    std::stable_sort(run.events.begin(), run.events.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.t < b.t; });
    rep.total_events = run.events.size();
    return run;
}

std::vector<SettingReport> generate_run(const RunManifest& manifest, const std::filesystem::path& dir,
                                        std::size_t threads) {
    const RunSimulator sim(manifest);
    std::filesystem::create_directories(dir);
    std::vector<SettingReport> reports(sim.size());
    parallel_for(sim.size(), threads, [&](std::size_t k) {
        SettingRun run = sim.simulate(k);
        write_event_file(dir / manifest.settings[k].filename, run.events);
        reports[k] = std::move(run.report);
    });
    write_manifest(dir / "manifest.json", sim.manifest());
    return reports;
}

}  // namespace evblab
