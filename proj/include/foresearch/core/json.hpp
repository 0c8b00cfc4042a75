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

// Canonical JSON encodings of the core types. Field names are part of the
// file formats and wire protocols and must not change.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "foresearch/core/types.hpp"

namespace foresearch {

using Json = nlohmann::json;

void to_json(Json& j, const TimeInterval& v);
void from_json(const Json& j, TimeInterval& v);
void to_json(Json& j, const IntervalSet& v);
void from_json(const Json& j, IntervalSet& v);
void to_json(Json& j, const BBox& v);
void from_json(const Json& j, BBox& v);
void to_json(Json& j, const Detection& v);
void from_json(const Json& j, Detection& v);
void to_json(Json& j, const Observation& v);
void from_json(const Json& j, Observation& v);
void to_json(Json& j, const Track& v);
void from_json(const Json& j, Track& v);
void to_json(Json& j, const FrameBox& v);
void from_json(const Json& j, FrameBox& v);
void to_json(Json& j, const Clip& v);
void from_json(const Json& j, Clip& v);
void to_json(Json& j, const EmbeddingRecord& v);
void from_json(const Json& j, EmbeddingRecord& v);
void to_json(Json& j, const ImageRef& v);
void from_json(const Json& j, ImageRef& v);
void to_json(Json& j, const Query& v);
void from_json(const Json& j, Query& v);
void to_json(Json& j, const QASample& v);
void from_json(const Json& j, QASample& v);
void to_json(Json& j, const Prediction& v);
void from_json(const Json& j, Prediction& v);

std::string_view clip_mode_name(ClipMode mode);
ClipMode parse_clip_mode(std::string_view name);

// JSON-lines helpers. The reader reports the 1-based line number of the first
// malformed line through Error(kInvalidArgument).
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::vector<Json> parse_jsonl(std::string_view text);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);
std::string dump_jsonl(const std::vector<Json>& rows);

template <typename T>
std::vector<T> read_jsonl_as(const std::filesystem::path& path) {
  std::vector<T> out;
  for (const auto& row : read_jsonl(path)) out.push_back(row.get<T>());
  return out;
}

template <typename T>
void write_jsonl_of(const std::filesystem::path& path, const std::vector<T>& items) {
  std::vector<Json> rows;
  rows.reserve(items.size());
  for (const auto& item : items) rows.emplace_back(item);
  write_jsonl(path, rows);
}

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace foresearch
