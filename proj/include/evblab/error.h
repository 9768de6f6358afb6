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

#ifndef EVBLAB_ERROR_H
#define EVBLAB_ERROR_H

#include <stdexcept>
#include <string>

namespace evblab {

// Base for every library error that is not a plain std::invalid_argument.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// A second q-plate on a photon that already carries orbital angular momentum.
class UnsupportedComposition : public Error {
   public:
    using Error::Error;
};

// Rejection sampler exhausted its attempt budget.
class SamplingError : public Error {
   public:
    using Error::Error;
};

// Malformed or unsorted event data, corrupt files.
class FormatError : public Error {
   public:
    using Error::Error;
};

// Inconsistent setup: singular measurement design, mismatched binnings, missing settings.
class ConfigurationError : public Error {
   public:
    using Error::Error;
};

// Not enough counts to reconstruct anything.
class InsufficientData : public Error {
   public:
    using Error::Error;
};

}  // namespace evblab

#endif
