// Copyright 2026 The qbreak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QBREAK_PARALLEL_HPP_
#define QBREAK_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace qbreak {

// Resolves a requested worker count; 0 means "use the hardware".
unsigned resolve_threads(unsigned requested);

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// visited exactly once; callers write results into slot i so the outcome
// does not depend on the schedule. The first exception thrown by any body is
// rethrown after all workers have joined.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace qbreak

#endif  // QBREAK_PARALLEL_HPP_
