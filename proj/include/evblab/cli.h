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

#ifndef EVBLAB_CLI_H
#define EVBLAB_CLI_H

#include <Eigen/Core>
#include <optional>
#include <ostream>

namespace evblab::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeError = 1, kUsageError = 2 };

/// Entry point of the `evblab` tool: subcommands simulate, generate, coincide,
/// tomo and report. Returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct MapComparison {
    double rms = 0.0;
    double max_abs = 0.0;
    std::optional<double> correlation;  // undefined when either map is constant
};

/// Throws ConfigurationError when the shapes differ.
MapComparison compare_maps(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& measured);

}  // namespace evblab::cli

#endif
