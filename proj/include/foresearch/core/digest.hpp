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

#include <cstdint>
#include <string>
#include <string_view>

namespace foresearch {

std::string base64_encode(std::string_view bytes);
// Throws InvalidArgument on malformed input.
std::string base64_decode(std::string_view text);

// Lowercase hex SHA-256, used for content-addressed ids and provenance.
std::string sha256_hex(std::string_view bytes);

// Stable 64-bit key derived from SHA-256; used to seed per-item RNG streams.
std::uint64_t stable_hash64(std::string_view bytes);

}  // namespace foresearch
