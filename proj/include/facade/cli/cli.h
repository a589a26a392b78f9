/* Copyright 2026 The facadegen Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef FACADE_CLI_CLI_H_
#define FACADE_CLI_CLI_H_

#include <atomic>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace facade::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs one facadectl invocation. `args` excludes the program name. Every
// subcommand prints its resolved configuration (one JSON line prefixed with
// "config ") to `out` before doing any work. Runtime failures print a single
// JSON error line to `err`. `stop` is polled by long-running commands
// (train, serve) and may be null.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const std::atomic<bool>* stop = nullptr);

// Shared angle test vectors for the viewer port: `count` configurations
// from angle_test_cases(count, seed) as one JSON document.
nlohmann::json angle_vectors_json(int count, std::uint64_t seed);

}  // namespace facade::cli

#endif  // FACADE_CLI_CLI_H_
