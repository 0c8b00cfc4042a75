// Copyright 2026 The foresearch Authors
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

// Command-line front end. Every service capability is available as a
// subcommand operating on local files; exit codes are 0 on success, 1 on
// input errors and 2 when a backend is unavailable.

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

#include "foresearch/core/json.hpp"
#include "foresearch/service/service.hpp"

namespace foresearch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitBackend = 2;

using EnvFn = std::function<std::optional<std::string>(const std::string&)>;

// Process environment lookup.
std::optional<std::string> process_env(const std::string& name);

// Parses a YAML (or JSON) file into JSON. Throws InvalidArgument when the
// file is missing or malformed.
Json load_config_file(const std::filesystem::path& path);

// Overrides from FORESEARCH_* variables, e.g. FORESEARCH_DATA_DIR or
// FORESEARCH_VLM_ENDPOINT. Unknown variables are ignored.
void apply_env(Json& config, const EnvFn& env);

// File, then environment, then validation. encoder.vocabulary_file is read
// into encoder.vocabulary. Relative paths in the file resolve against it.
service::ServiceConfig resolve_config(const std::optional<std::filesystem::path>& file, const EnvFn& env);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const EnvFn& env = process_env);

}  // namespace foresearch::cli
