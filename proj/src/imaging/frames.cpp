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

#include "foresearch/imaging/frames.hpp"

#include <cmath>
#include <cstdio>

#include "foresearch/core/error.hpp"

namespace foresearch::imaging {

std::int64_t VideoManifest::frame_count() const {
  if (duration_seconds <= 0.0) return 0;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(duration_seconds * fps + 1e-9)));
}

void validate(const VideoManifest& m) {
  if (m.video_id.empty()) throw Error(ErrorCode::kInvalidArgument, "manifest video_id is empty");
  if (!(m.fps > 0.0) || !std::isfinite(m.fps)) {
    throw Error(ErrorCode::kInvalidArgument, "manifest fps must be positive");
  }
  if (!(m.duration_seconds >= 0.0) || !std::isfinite(m.duration_seconds)) {
    throw Error(ErrorCode::kInvalidArgument, "manifest duration must be non-negative");
  }
}

void to_json(Json& j, const VideoManifest& v) {
  j = Json{{"video_id", v.video_id},
           {"camera_id", v.camera_id},
           {"fps", v.fps},
           {"duration_seconds", v.duration_seconds}};
  if (!v.frame_dir.empty()) j["frame_dir"] = v.frame_dir;
  if (!v.source_uri.empty()) j["source_uri"] = v.source_uri;
  if (v.frame_pattern != "%06d.png") j["frame_pattern"] = v.frame_pattern;
}

void from_json(const Json& j, VideoManifest& v) {
  v.video_id = j.at("video_id").get<std::string>();
  v.camera_id = j.value("camera_id", std::string());
  v.fps = j.at("fps").get<double>();
  v.duration_seconds = j.at("duration_seconds").get<double>();
  v.frame_dir = j.value("frame_dir", std::string());
  v.source_uri = j.value("source_uri", std::string());
  v.frame_pattern = j.value("frame_pattern", std::string("%06d.png"));
  validate(v);
}

void DirectoryFrameProvider::add(VideoManifest manifest) {
  validate(manifest);
  std::lock_guard lock(mu_);
  manifests_[manifest.video_id] = std::move(manifest);
}

bool DirectoryFrameProvider::contains(const std::string& video_id) const {
  std::lock_guard lock(mu_);
  return manifests_.contains(video_id);
}

std::vector<std::string> DirectoryFrameProvider::video_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : manifests_) ids.push_back(id);
  return ids;
}

VideoManifest DirectoryFrameProvider::info(const std::string& video_id) const {
  std::lock_guard lock(mu_);
  auto it = manifests_.find(video_id);
  if (it == manifests_.end()) throw Error(ErrorCode::kMissingVideo, video_id);
  return it->second;
}

Image DirectoryFrameProvider::frame(const std::string& video_id,
                                    std::int64_t frame_index) const {
  const auto m = info(video_id);
  if (m.frame_dir.empty()) {
    throw Error(ErrorCode::kMissingFrames, video_id + " has no frame_dir");
  }
  char name[256];
  std::snprintf(name, sizeof(name), m.frame_pattern.c_str(), static_cast<int>(frame_index));
  const auto path = std::filesystem::path(m.frame_dir) / name;
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingFrames, path.string());
  }
  return decode(read_file(path));
}

void FrameRouter::route(const std::string& video_id,
                        std::shared_ptr<const FrameProvider> provider) {
  std::lock_guard lock(mu_);
  routes_[video_id] = std::move(provider);
}

bool FrameRouter::contains(const std::string& video_id) const {
  std::lock_guard lock(mu_);
  return routes_.contains(video_id);
}

std::shared_ptr<const FrameProvider> FrameRouter::find(const std::string& video_id) const {
  std::lock_guard lock(mu_);
  auto it = routes_.find(video_id);
  if (it == routes_.end()) throw Error(ErrorCode::kMissingVideo, video_id);
  return it->second;
}

VideoManifest FrameRouter::info(const std::string& video_id) const {
  return find(video_id)->info(video_id);
}

Image FrameRouter::frame(const std::string& video_id, std::int64_t frame_index) const {
  return find(video_id)->frame(video_id, frame_index);
}

}  // namespace foresearch::imaging
