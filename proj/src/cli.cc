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

#include "evblab/cli.h"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evblab/coincidence.h"
#include "evblab/error.h"
#include "evblab/eventsim.h"
#include "evblab/export.h"
#include "evblab/polarimetry.h"
#include "evblab/qplate_state.h"
#include "evblab/tomography.h"

namespace evblab::cli {

namespace {

namespace fs = std::filesystem;
using io::Json;

class UsageError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

constexpr std::int64_t kAccidentalOffsetNs = 1'000'000;
constexpr std::size_t kAnalyticAngularSamples = 8;
constexpr double kBandLow = 0.517;
constexpr double kBandHigh = 0.575;

const char* const kBundleFile = "histograms.json";
const char* const kAnalyticFile = "bell_maps.json";
const char* const kTomographyFile = "tomography.json";

void print(std::ostream& os, const std::string& s) { os << s << '\n'; }

struct PlateFlags {
    std::optional<double> qs;
    std::optional<double> qi;
    double delta_s = std::numbers::pi;
    double delta_i = std::numbers::pi;
    double waist = kDefaultWaistPx;
};

void add_plate_flags(CLI::App* cmd, PlateFlags& f, bool required) {
    auto* qs = cmd->add_option("--qs", f.qs, "signal q-plate topological charge (half-integer)");
    auto* qi = cmd->add_option("--qi", f.qi, "idler q-plate topological charge (half-integer)");
    if (required) {
        qs->required();
        qi->required();
    }
    cmd->add_option("--delta-s", f.delta_s, "signal q-plate retardation, radians")->capture_default_str();
    cmd->add_option("--delta-i", f.delta_i, "idler q-plate retardation, radians")->capture_default_str();
    cmd->add_option("--waist-px", f.waist, "beam waist in pixels")->capture_default_str();
}

// Builds validated plates, turning bad values into usage errors.
std::pair<QPlateParams, QPlateParams> make_plates(const PlateFlags& f, double default_qs, double default_qi) {
    try {
        return {QPlateParams::make(f.qs.value_or(default_qs), f.delta_s, f.waist),
                QPlateParams::make(f.qi.value_or(default_qi), f.delta_i, f.waist)};
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

Json plate_json(const QPlateParams& p) { return {{"q", p.q.value()}, {"delta", p.delta}, {"waist_px", p.waist}}; }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
    }
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    PlateFlags plates;
    std::size_t n_theta = 16;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const auto [qs, qi] = make_plates(a.plates, 0.0, 0.0);
    if (a.n_theta < 4) {
        throw UsageError("--ntheta must be at least 4");
    }
    const ModeSuperposition state = evb_state(qs, qi);
    BellMapOptions opt;
    opt.n_theta = a.n_theta;
    opt.angular_samples = kAnalyticAngularSamples;
    const BellMaps raw = bell_probability_map(state, opt);
    const BellMaps maps = raw.conditional();
    const Eigen::MatrixXd marginal = raw.marginal();

    const fs::path dir(a.out);
    ensure_dir(dir);
    std::vector<std::pair<std::string, Eigen::MatrixXd>> named;
    for (auto b : kBellStates) {
        const std::string name = bell_name(b);
        io::write_text(dir / ("bell_" + name + ".csv"), io::matrix_csv(maps[b]));
        io::write_text(dir / ("bell_" + name + ".pgm"), io::pgm_image(maps[b], 0.0, 1.0));
        named.emplace_back(name, maps[b]);
    }
    io::write_text(dir / "marginal.csv", io::matrix_csv(marginal));
    io::write_text(dir / "bell_torus.csv", io::torus_csv(named));

    const Json config = {{"subcommand", "simulate"},
                         {"qplate_s", plate_json(qs)},
                         {"qplate_i", plate_json(qi)},
                         {"n_theta", a.n_theta},
                         {"angular_samples", kAnalyticAngularSamples},
                         {"radial_points", opt.radial.points},
                         {"radial_extent_waists", opt.radial.r_max_in_waists}};
    io::write_json(dir / kAnalyticFile, {{"kind", "analytic-bell-maps"},
                                         {"config", config},
                                         {"bell_maps", io::bell_maps_to_json(maps)},
                                         {"marginal", io::matrix_to_json(marginal)}});
    print(out, fmt::format("analytic Bell maps ({0}x{0}) written to {1}", a.n_theta, dir.string()));
    for (auto b : kBellStates) {
        print(out, fmt::format("  {:<10} mean {:.4f}  max {:.4f}", bell_name(b), maps[b].mean(), maps[b].maxCoeff()));
    }
    return kSuccess;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    PlateFlags plates;
    double efficiency = 1.0;
    double dark_rate = 0.0;
    double jitter_ns = 1.0;
    double werner_p = 1.0;
    double pairs = 1e5;
    double duration = 480.0;
    std::uint64_t seed = 1;
    double window_ns = 10.0;
    std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    const auto [qs, qi] = make_plates(a.plates, 0.5, 1.0);
    if (!(a.duration > 0.0) || !std::isfinite(a.duration)) {
        throw UsageError("--duration must be positive");
    }
    if (!(a.pairs >= 0.0) || a.pairs != std::floor(a.pairs) || a.pairs > 1e12) {
        throw UsageError("--pairs must be a non-negative integer");
    }
    RunManifest m;
    m.geometry.waist_px = a.plates.waist;
    m.qplate_s = qs;
    m.qplate_i = qi;
    m.noise = {a.efficiency, a.dark_rate, a.jitter_ns, a.werner_p};
    m.duration = a.duration;
    m.pair_rate = a.pairs / a.duration;
    m.rng_seed = a.seed;
    m.window_ns = a.window_ns;
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const fs::path dir(a.out);
    const auto reports = generate_run(m, dir);
    print(out, fmt::format("run written to {} ({} settings, {} incident pairs each)", dir.string(), reports.size(),
                           m.pairs_per_setting()));
    print(out, fmt::format("  {:<4} {:>10} {:>10} {:>10} {:>10} {:>11}", "set", "pairs", "singles", "dark", "white",
                           "events"));
    for (const auto& r : reports) {
        print(out, fmt::format("  {:<4} {:>10} {:>10} {:>10} {:>10} {:>11}", r.label, r.detected_pairs, r.singles,
                               r.dark_events, r.white_pairs, r.total_events));
    }
    return kSuccess;
}

// ---------------------------------------------------------------- coincide

struct CoincideArgs {
    std::string in;
    std::string out;
    std::size_t n_theta = 16;
    std::size_t n_r = 5;
    std::optional<double> window_ns;
};

int cmd_coincide(const CoincideArgs& a, std::ostream& out) {
    const fs::path run_dir(a.in);
    const fs::path manifest_path = run_dir / "manifest.json";
    const RunManifest m = read_manifest(manifest_path);
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(fmt::format("{}: {}", manifest_path.string(), e.what()));
    }

    CoincidenceConfig cfg;
    cfg.window_ns = a.window_ns.value_or(m.window_ns);
    PolarBinning binning;
    binning.n_theta = a.n_theta;
    binning.n_r = a.n_r;
    binning.r_max = 2.0 * m.geometry.waist_px;
    try {
        cfg.validate();
        binning.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    // First pass: beam centres from every event in each ROI.
    CentroidAccumulator acc_s(m.geometry.roi_signal);
    CentroidAccumulator acc_i(m.geometry.roi_idler);
    for (const auto& s : m.settings) {
        const EventStream events = read_event_file(run_dir / s.filename);
        acc_s.add(events);
        acc_i.add(events);
    }
    binning.centroid_s = acc_s.centroid();
    binning.centroid_i = acc_i.centroid();

    const Json config = {
        {"subcommand", "coincide"},
        {"run", Json::parse(manifest_to_json(m))},
        {"window_ns", cfg.window_ns},
        {"allow_multi_match", cfg.allow_multi_match},
        {"n_theta", binning.n_theta},
        {"n_r", binning.n_r},
        {"r_max_px", binning.r_max},
        {"centroid_s", {binning.centroid_s.x, binning.centroid_s.y}},
        {"centroid_i", {binning.centroid_i.x, binning.centroid_i.y}},
        {"accidental_offset_ns", kAccidentalOffsetNs},
    };

    const fs::path dir = a.out.empty() ? run_dir / "histograms" : fs::path(a.out);
    ensure_dir(dir);
    HistogramOptions hopt;
    hopt.accidental_offset_ns = kAccidentalOffsetNs;
    Json labels = Json::array();
    Json files = Json::object();
    Json all = Json::array();
    print(out, fmt::format("  {:<4} {:>10} {:>10} {:>10} {:>10}", "set", "pairs", "dropped", "singles", "accid."));
    for (const auto& s : m.settings) {
        const EventStream events = read_event_file(run_dir / s.filename);
        const CoincidenceHistogram h = histogram_stream(events, m.geometry, cfg, binning, s.label, hopt);
        const std::string name = "hist_" + s.label + ".json";
        const Json hj = io::histogram_to_json(h);
        io::write_json(dir / name, {{"config", config}, {"histogram", hj}});
        labels.push_back(s.label);
        files[s.label] = name;
        all.push_back(hj);
        print(out, fmt::format("  {:<4} {:>10} {:>10} {:>10} {:>10}", s.label, h.total_pairs, h.dropped_by_radius,
                               h.total_singles, h.accidentals_theta.sum()));
    }
    io::write_json(dir / kBundleFile, {{"config", config}, {"settings", labels}, {"files", files}, {"histograms", all}});
    print(out, fmt::format("histograms written to {}", dir.string()));
    return kSuccess;
}

// ---------------------------------------------------------------- tomo

struct TomoArgs {
    std::string in;
    std::string out;
    bool mle = false;
    bool subtract_accidentals = false;
};

int cmd_tomo(const TomoArgs& a, std::ostream& out) {
    const fs::path dir(a.in);
    const Json bundle = io::read_json(dir / kBundleFile);
    std::vector<std::string> labels;
    std::vector<CoincidenceHistogram> hists;
    std::vector<std::string> missing;
    try {
        for (const auto& l : bundle.at("settings")) {
            labels.push_back(l.get<std::string>());
        }
        for (const auto& l : labels) {
            const fs::path path = dir / bundle.at("files").at(l).get<std::string>();
            if (!fs::exists(path)) {
                missing.push_back(l);
                continue;
            }
            const Json j = io::read_json(path);
            hists.push_back(io::histogram_from_json(j.at("histogram"), path.string()));
        }
    } catch (const Json::exception& e) {
        throw FormatError(fmt::format("{}: {}", (dir / kBundleFile).string(), e.what()));
    }
    if (!missing.empty()) {
        throw ConfigurationError(fmt::format("missing histogram files for settings: {}", fmt::join(missing, ", ")));
    }
    const TomographySet set = TomographySet::from_labels(labels);
    TomographyOptions opt;
    opt.mle = a.mle;
    opt.subtract_accidentals = a.subtract_accidentals;
    const AngularTomography t = angular_tomography(hists, set, opt);

    Json config = {{"subcommand", "tomo"},
                   {"histograms", bundle.at("config")},
                   {"mle", opt.mle},
                   {"mle_tol", opt.mle_options.tol},
                   {"mle_max_iterations", opt.mle_options.max_iterations},
                   {"subtract_accidentals", opt.subtract_accidentals},
                   {"min_counts", opt.min_counts},
                   {"flux_normalisation", Json::array()}};
    for (std::size_t k : set.flux_subset()) {
        config["flux_normalisation"].push_back(set.settings()[k].label());
    }

    const fs::path odir = a.out.empty() ? dir / "tomography" : fs::path(a.out);
    ensure_dir(odir);
    const BellMaps maps = t.bell_maps();
    io::write_text(odir / "concurrence.csv", io::matrix_csv(t.concurrence_map()));
    io::write_text(odir / "purity.csv", io::matrix_csv(t.purity_map()));
    io::write_text(odir / "concurrence.pgm", io::pgm_image(t.concurrence_map(), 0.0, 1.0));
    for (auto b : kBellStates) {
        const std::string name = bell_name(b);
        io::write_text(odir / ("bell_" + name + ".csv"), io::matrix_csv(maps[b]));
        io::write_text(odir / ("bell_" + name + ".pgm"), io::pgm_image(maps[b], 0.0, 1.0));
    }
    io::write_json(odir / kTomographyFile, {{"config", config}, {"tomography", io::tomography_to_json(t)}});
    print(out, fmt::format("average concurrence: {:.4f} +- {:.4f} ({} of {} bins, count-weighted)",
                           t.average_concurrence, t.concurrence_stderr, t.bins_used, t.bins.size()));
    if (t.mle_unconverged > 0) {
        print(out, fmt::format("warning: mle stopped before convergence in {} bins", t.mle_unconverged));
    }
    print(out, fmt::format("tomography written to {}", odir.string()));
    return kSuccess;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
    std::string analytic;
    std::string in;
    std::string out;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
    const fs::path apath = fs::path(a.analytic) / kAnalyticFile;
    const fs::path tpath = fs::path(a.in) / kTomographyFile;
    const Json aj = io::read_json(apath);
    const Json tj = io::read_json(tpath);
    BellMaps reference;
    BellMaps measured;
    double c_avg = 0.0;
    double c_se = 0.0;
    try {
        reference = io::bell_maps_from_json(aj.at("bell_maps"), apath.string());
        measured = io::bell_maps_from_json(tj.at("tomography").at("bell_maps"), tpath.string());
        c_avg = tj.at("tomography").at("average_concurrence").get<double>();
        c_se = tj.at("tomography").at("concurrence_stderr").get<double>();
    } catch (const Json::exception& e) {
        throw FormatError(fmt::format("report inputs malformed: {}", e.what()));
    }
    if (reference.n_theta != measured.n_theta) {
        throw ConfigurationError(fmt::format("grid mismatch: analytic maps are {0}x{0}, reconstructed maps are {1}x{1}",
                                             reference.n_theta, measured.n_theta));
    }

    const bool in_band = c_avg >= kBandLow && c_avg <= kBandHigh;
    const std::string band_note = fmt::format(
        "reference band {:.3f}-{:.3f} (band match, not a single-value reproduction): {}", kBandLow, kBandHigh,
        in_band ? "inside" : "outside");
    Json per_map = Json::object();
    print(out, fmt::format("  {:<10} {:>9} {:>9} {:>9}", "state", "rms", "max", "corr"));
    for (auto b : kBellStates) {
        const MapComparison c = compare_maps(reference[b], measured[b]);
        per_map[bell_name(b)] = {{"rms", c.rms},
                                 {"max_abs", c.max_abs},
                                 {"correlation", c.correlation ? Json(*c.correlation) : Json(nullptr)}};
        print(out, fmt::format("  {:<10} {:>9.4f} {:>9.4f} {:>9}", bell_name(b), c.rms, c.max_abs,
                               c.correlation ? fmt::format("{:.4f}", *c.correlation) : std::string("n/a")));
    }
    print(out, fmt::format("average concurrence {:.4f} +- {:.4f}; {}", c_avg, c_se, band_note));

    const Json config = {{"subcommand", "report"},
                         {"analytic", aj.at("config")},
                         {"tomography", tj.at("config")},
                         {"concurrence_band", {kBandLow, kBandHigh}}};
    const fs::path odir = a.out.empty() ? fs::path(a.in) : fs::path(a.out);
    ensure_dir(odir);
    io::write_json(odir / "report.json", {{"config", config},
                                          {"maps", per_map},
                                          {"average_concurrence", c_avg},
                                          {"concurrence_stderr", c_se},
                                          {"concurrence_in_band", in_band},
                                          {"note", band_note}});
    return kSuccess;
}

}  // namespace

MapComparison compare_maps(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& measured) {
    if (reference.rows() != measured.rows() || reference.cols() != measured.cols()) {
        throw ConfigurationError(fmt::format("map shapes differ: {}x{} vs {}x{}", reference.rows(), reference.cols(),
                                             measured.rows(), measured.cols()));
    }
    MapComparison c;
    if (reference.size() == 0) {
        return c;
    }
    const Eigen::ArrayXXd d = (measured - reference).array();
    c.rms = std::sqrt(d.square().mean());
    c.max_abs = d.abs().maxCoeff();
    const Eigen::ArrayXXd x = reference.array() - reference.mean();
    const Eigen::ArrayXXd y = measured.array() - measured.mean();
    const double sxx = x.square().sum();
    const double syy = y.square().sum();
    if (sxx > 1e-300 && syy > 1e-300) {
        c.correlation = (x * y).sum() / std::sqrt(sxx * syy);
    }
    return c;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"evblab: entangled vector beam simulation and tomography"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "analytic Bell-state probability maps");
    add_plate_flags(simulate, sim.plates, true);
    simulate->add_option("--ntheta", sim.n_theta, "azimuthal bins per photon")->capture_default_str();
    simulate->add_option("--out", sim.out, "output directory")->required();

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "synthetic event files for the 16 settings");
    add_plate_flags(generate, gen.plates, false);
    generate->add_option("--efficiency", gen.efficiency, "per-photon detection efficiency")->capture_default_str();
    generate->add_option("--dark-rate", gen.dark_rate, "dark counts per second per pixel")->capture_default_str();
    generate->add_option("--jitter-ns", gen.jitter_ns, "timing jitter sigma, ns")->capture_default_str();
    generate->add_option("--werner-p", gen.werner_p, "pure-state weight of the Werner mixture")->capture_default_str();
    generate->add_option("--pairs", gen.pairs, "incident pairs per setting")->capture_default_str();
    generate->add_option("--duration", gen.duration, "acquisition time per setting, s")->capture_default_str();
    generate->add_option("--seed", gen.seed, "master RNG seed")->capture_default_str();
    generate->add_option("--window-ns", gen.window_ns, "coincidence window stored in the manifest")
        ->capture_default_str();
    generate->add_option("--out", gen.out, "run directory")->required();

    CoincideArgs coi;
    auto* coincide = app.add_subcommand("coincide", "coincidence histograms from a run directory");
    coincide->add_option("--in", coi.in, "run directory")->required();
    coincide->add_option("--out", coi.out, "output directory (default <in>/histograms)");
    coincide->add_option("--ntheta", coi.n_theta, "azimuthal bins per photon")->capture_default_str();
    coincide->add_option("--nr", coi.n_r, "radial bins per photon")->capture_default_str();
    coincide->add_option("--window-ns", coi.window_ns, "coincidence window, ns (default from manifest)");

    TomoArgs tom;
    auto* tomo = app.add_subcommand("tomo", "per-bin polarization tomography");
    tomo->add_option("--in", tom.in, "histogram directory")->required();
    tomo->add_option("--out", tom.out, "output directory (default <in>/tomography)");
    tomo->add_flag("--mle", tom.mle, "refine each bin by maximum likelihood");
    tomo->add_flag("--subtract-accidentals", tom.subtract_accidentals, "subtract shifted-window accidentals");

    ReportArgs rep;
    auto* report = app.add_subcommand("report", "compare reconstructed and analytic Bell maps");
    report->add_option("--analytic", rep.analytic, "output directory of `simulate`")->required();
    report->add_option("--in", rep.in, "output directory of `tomo`")->required();
    report->add_option("--out", rep.out, "output directory (default --in)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    try {
        if (*simulate) {
            return cmd_simulate(sim, out);
        }
        if (*generate) {
            return cmd_generate(gen, out);
        }
        if (*coincide) {
            return cmd_coincide(coi, out);
        }
        if (*tomo) {
            return cmd_tomo(tom, out);
        }
        return cmd_report(rep, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

}  // namespace evblab::cli
