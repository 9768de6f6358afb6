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

#ifndef EVBLAB_TOMOGRAPHY_H
#define EVBLAB_TOMOGRAPHY_H

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "evblab/coincidence.h"
#include "evblab/error.h"
#include "evblab/polarimetry.h"
#include "evblab/qplate_state.h"

namespace evblab {

/// Two-qubit density matrix in the {HH, HV, VH, VV} basis.
using DensityMatrix = Eigen::Matrix4cd;
using SettingCounts = Eigen::Matrix<double, 16, 1>;

class ConvergenceError : public Error {
   public:
    ConvergenceError(const std::string& what, DensityMatrix best, int iterations)
        : Error(what), best_(std::move(best)), iterations_(iterations) {}

    const DensityMatrix& best() const { return best_; }
    int iterations() const { return iterations_; }

   private:
    DensityMatrix best_;
    int iterations_;
};

/// <pi_k|rho|pi_k> for every setting of `set`.
SettingCounts forward_probabilities(const DensityMatrix& rho, const TomographySet& set);

/// Flux-normalised linear reconstruction. Hermitian and unit trace, possibly
/// not positive. Throws InsufficientData when the flux subset holds no counts
/// and std::invalid_argument for negative or non-finite counts.
DensityMatrix linear_inversion(const SettingCounts& counts, const TomographySet& set);

/// Frobenius-nearest positive semidefinite unit-trace matrix. Throws
/// std::invalid_argument for a non-Hermitian input.
DensityMatrix project_physical(const DensityMatrix& m);

bool is_physical(const DensityMatrix& rho, double tol = 1e-10);

struct MleOptions {
    double tol = 1e-7;  // on the gradient norm per count
    int max_iterations = 20000;
};

struct MleResult {
    DensityMatrix rho;
    double log_likelihood = 0.0;  // per count
    double gradient_norm = 0.0;
    int iterations = 0;
    std::vector<double> history;  // log-likelihood of each accepted iterate
};

/// Poisson log-likelihood per count, with the overall flux profiled out:
/// sum_k n_k log(p_k / sum_j p_j) / sum_k n_k, for rho = T^dag T / tr(T^dag T).
double factorized_log_likelihood(const Eigen::Matrix4cd& t, const SettingCounts& counts, const TomographySet& set);
/// Gradient of factorized_log_likelihood: real part holds d/dRe T, imaginary part d/dIm T.
Eigen::Matrix4cd factorized_gradient(const Eigen::Matrix4cd& t, const SettingCounts& counts, const TomographySet& set);

/// Returns the linear estimate when it is already physical (it then attains the
/// likelihood bound); otherwise BFGS ascent over T with backtracking. Throws
/// ConvergenceError (carrying the best iterate) when the gradient norm stays
/// above tol.
MleResult mle_refine(const DensityMatrix& initial, const SettingCounts& counts, const TomographySet& set,
                     const MleOptions& options = {});

/// Wootters concurrence. Throws std::invalid_argument for an unphysical input.
double concurrence(const DensityMatrix& rho);
double purity(const DensityMatrix& rho);
/// Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);
BellProbabilities bell_decomposition(const DensityMatrix& rho);

struct TomographyResult {
    DensityMatrix rho = DensityMatrix::Identity() / 4.0;
    double concurrence = 0.0;
    double purity = 0.25;
    BellProbabilities bell{0.25, 0.25, 0.25, 0.25};
    double counts_used = 0.0;
    std::size_t bin_s = 0;
    std::size_t bin_i = 0;
    bool low_statistics = true;
    bool mle_converged = true;
};

struct TomographyOptions {
    bool mle = false;
    MleOptions mle_options{1e-7, 5000};
    double min_counts = 200.0;  // summed over the 16 settings
    bool subtract_accidentals = false;
    std::size_t threads = 0;
};

/// Per-(theta_s, theta_i) reconstructions.
struct AngularTomography {
    std::size_t n_theta = 0;
    std::vector<TomographyResult> bins;  // row-major, row = signal bin
    double average_concurrence = 0.0;    // count-weighted over bins with enough counts
    double concurrence_stderr = 0.0;
    std::size_t bins_used = 0;
    std::size_t mle_unconverged = 0;

    const TomographyResult& at(std::size_t a, std::size_t b) const { return bins[a * n_theta + b]; }
    Eigen::MatrixXd concurrence_map() const;
    Eigen::MatrixXd purity_map() const;
    /// Reconstructed <B|rho|B> per bin.
    BellMaps bell_maps() const;
};

/// Assembles the 16 counts of each angular bin (matched to `set` by label),
/// reconstructs, and averages. Throws ConfigurationError when a setting is
/// missing (naming it) or the histograms disagree on binning.
AngularTomography angular_tomography(std::span<const CoincidenceHistogram> histograms, const TomographySet& set,
                                     const TomographyOptions& options = {});

/// Count-weighted mean and its standard error sqrt(sum w^2 (x - mean)^2) / sum w.
std::pair<double, double> weighted_mean_stderr(std::span<const double> values, std::span<const double> weights);

}  // namespace evblab

#endif
