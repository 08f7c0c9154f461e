// Copyright 2026 The arnn Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <functional>

namespace arnn {

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Each index runs exactly once; callers write results into
// per-index slots and reduce in index order, so results do not depend on the
// thread count. The first exception thrown by any worker is rethrown.
void parallel_for(size_t n, const std::function<void(size_t)>& fn, size_t threads = 0);

}  // namespace arnn
