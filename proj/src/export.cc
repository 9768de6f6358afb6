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

#include "evblab/export.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "evblab/error.h"

namespace evblab::io {

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw FormatError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
    }
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string matrix_csv(const Eigen::MatrixXd& m) {
    std::string out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) {
                out += ',';
            }
            out += fmt::format("{}", m(r, c));
        }
        out += '\n';
    }
    return out;
}

std::string pgm_image(const Eigen::MatrixXd& m, double lo, double hi) {
    if (!(hi > lo)) {
        throw std::invalid_argument("pgm range must satisfy hi > lo");
    }
    std::string out = fmt::format("P5\n{} {}\n255\n", m.cols(), m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double v = (m(r, c) - lo) / (hi - lo);
            v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
            out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
        }
    }
    return out;
}

std::string torus_csv(std::span<const std::pair<std::string, Eigen::MatrixXd>> maps, double major, double minor) {
    if (maps.empty()) {
        throw std::invalid_argument("torus_csv needs at least one map");
    }
    const Eigen::Index n_s = maps.front().second.rows();
    const Eigen::Index n_i = maps.front().second.cols();
    std::string out = "theta_s,theta_i,x,y,z";
    for (const auto& [name, m] : maps) {
        if (m.rows() != n_s || m.cols() != n_i) {
            throw std::invalid_argument("torus_csv maps differ in shape");
        }
        out += "," + name;
    }
    out += '\n';
    const double two_pi = 2.0 * std::numbers::pi;
    for (Eigen::Index a = 0; a < n_s; ++a) {
        const double ts = two_pi * (a + 0.5) / static_cast<double>(n_s);
        for (Eigen::Index b = 0; b < n_i; ++b) {
            const double ti = two_pi * (b + 0.5) / static_cast<double>(n_i);
            const double ring = major + minor * std::cos(ti);
            out += fmt::format("{},{},{},{},{}", ts, ti, ring * std::cos(ts), ring * std::sin(ts), minor * std::sin(ti));
            for (const auto& [name, m] : maps) {
                out += fmt::format(",{}", m(a, b));
            }
            out += '\n';
        }
    }
    return out;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> nested_from_json(const Json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw std::invalid_argument("ragged matrix");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = row.at(static_cast<std::size_t>(c)).get<Scalar>();
        }
    }
    return m;
}

}  // namespace

Eigen::MatrixXd matrix_from_json(const Json& j) { return nested_from_json<double>(j); }

Json count_matrix_to_json(const CountMatrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

CountMatrix count_matrix_from_json(const Json& j) { return nested_from_json<std::uint64_t>(j); }

Json histogram_to_json(const CoincidenceHistogram& h) {
    Json j = {
        {"label", h.label},
        {"n_r", h.n_r},
        {"n_theta", h.n_theta},
        {"total_pairs", h.total_pairs},
        {"dropped_by_radius", h.dropped_by_radius},
        {"total_singles", h.total_singles},
        {"outside_roi", h.outside_roi},
        {"total_events", h.total_events},
        {"counts_theta", count_matrix_to_json(h.counts_theta)},
        {"counts_r", count_matrix_to_json(h.counts_r)},
    };
    if (h.accidentals_theta.size() > 0) {
        j["accidentals_theta"] = count_matrix_to_json(h.accidentals_theta);
    }
    if (h.counts_full) {
        j["counts_full"] = count_matrix_to_json(*h.counts_full);
    }
    return j;
}

CoincidenceHistogram histogram_from_json(const Json& j, std::string_view source) {
    try {
        CoincidenceHistogram h;
        h.label = j.at("label").get<std::string>();
        h.n_r = j.at("n_r").get<std::size_t>();
        h.n_theta = j.at("n_theta").get<std::size_t>();
        h.total_pairs = j.at("total_pairs").get<std::uint64_t>();
        h.dropped_by_radius = j.at("dropped_by_radius").get<std::uint64_t>();
        h.total_singles = j.at("total_singles").get<std::uint64_t>();
        h.outside_roi = j.at("outside_roi").get<std::uint64_t>();
        h.total_events = j.at("total_events").get<std::uint64_t>();
        h.counts_theta = count_matrix_from_json(j.at("counts_theta"));
        h.counts_r = count_matrix_from_json(j.at("counts_r"));
        if (j.contains("accidentals_theta")) {
            h.accidentals_theta = count_matrix_from_json(j.at("accidentals_theta"));
        }
        if (j.contains("counts_full")) {
            h.counts_full = count_matrix_from_json(j.at("counts_full"));
        }
        const auto nt = static_cast<Eigen::Index>(h.n_theta);
        const auto nr = static_cast<Eigen::Index>(h.n_r);
        if (h.counts_theta.rows() != nt || h.counts_theta.cols() != nt || h.counts_r.rows() != nr ||
            h.counts_r.cols() != nr) {
            throw std::invalid_argument("matrix shape disagrees with n_theta / n_r");
        }
        return h;
    } catch (const Json::exception& e) {
        throw FormatError(fmt::format("{}: malformed histogram: {}", source, e.what()));
    } catch (const std::invalid_argument& e) {
        throw FormatError(fmt::format("{}: malformed histogram: {}", source, e.what()));
    }
}

Json density_to_json(const DensityMatrix& rho) {
    Json re = Json::array();
    Json im = Json::array();
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            re.push_back(rho(r, c).real());
            im.push_back(rho(r, c).imag());
        }
    }
    return {{"re", re}, {"im", im}};
}

Json bell_to_json(const BellProbabilities& b) {
    Json j = Json::object();
    for (auto s : kBellStates) {
        j[bell_name(s)] = b[s];
    }
    return j;
}

Json bell_maps_to_json(const BellMaps& maps) {
    Json j = {{"n_theta", maps.n_theta}};
    for (auto s : kBellStates) {
        j[bell_name(s)] = matrix_to_json(maps[s]);
    }
    return j;
}

BellMaps bell_maps_from_json(const Json& j, std::string_view source) {
    try {
        BellMaps maps;
        maps.n_theta = j.at("n_theta").get<std::size_t>();
        for (auto s : kBellStates) {
            maps[s] = matrix_from_json(j.at(bell_name(s)));
            if (static_cast<std::size_t>(maps[s].rows()) != maps.n_theta ||
                static_cast<std::size_t>(maps[s].cols()) != maps.n_theta) {
                throw std::invalid_argument(std::string("map shape disagrees with n_theta: ") + bell_name(s));
            }
        }
        return maps;
    } catch (const Json::exception& e) {
        throw FormatError(fmt::format("{}: malformed Bell maps: {}", source, e.what()));
    } catch (const std::invalid_argument& e) {
        throw FormatError(fmt::format("{}: malformed Bell maps: {}", source, e.what()));
    }
}

Json tomography_to_json(const AngularTomography& t) {
    Json bins = Json::array();
    for (const auto& r : t.bins) {
        bins.push_back({
            {"bin_s", r.bin_s},
            {"bin_i", r.bin_i},
            {"counts_used", r.counts_used},
            {"low_statistics", r.low_statistics},
            {"mle_converged", r.mle_converged},
            {"concurrence", r.concurrence},
            {"purity", r.purity},
            {"bell", bell_to_json(r.bell)},
            {"rho", density_to_json(r.rho)},
        });
    }
    return {
        {"n_theta", t.n_theta},
        {"average_concurrence", t.average_concurrence},
        {"concurrence_stderr", t.concurrence_stderr},
        {"bins_used", t.bins_used},
        {"mle_unconverged", t.mle_unconverged},
        {"bell_maps", bell_maps_to_json(t.bell_maps())},
        {"bins", bins},
    };
}

}  // namespace evblab::io
