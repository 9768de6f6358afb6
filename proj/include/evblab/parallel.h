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

#ifndef EVBLAB_PARALLEL_H
#define EVBLAB_PARALLEL_H

#include <cstddef>
#include <functional>

namespace evblab {

/// Hardware concurrency, capped by the EVBLAB_THREADS environment variable.
std::size_t default_thread_count();

/// Runs fn(0) ... fn(n - 1) on up to `threads` workers (0 = default). Work
/// items must write disjoint outputs. The exception of the lowest failing
/// index is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace evblab

#endif
