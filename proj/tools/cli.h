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

// The `arnn` command line: one binary, one subcommand per pipeline stage.
//
// Every subcommand writes its artifacts atomically and then a JSON manifest
// (`<primary output>.manifest.json`, or `manifest.json` in an output
// directory) holding the resolved options, paths, seed and timestamps. The
// manifest's "argv" field replays the run.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace arnn::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// `args` excludes the program name. Normal output goes to `out`, diagnostics
// and training progress to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace arnn::cli
