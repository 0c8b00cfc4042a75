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
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "foresearch/core/json.hpp"
#include "foresearch/imaging/image.hpp"

namespace foresearch::imaging {

// Sidecar manifest shipped next to a detection file.
struct VideoManifest {
  std::string video_id;
  std::string camera_id;
  double fps = 30.0;
  double duration_seconds = 0.0;
  std::string frame_dir;
  std::string source_uri;
  // printf-style pattern applied to the frame index inside frame_dir.
  std::string frame_pattern = "%06d.png";

  std::int64_t frame_count() const;
  double timestamp_of(std::int64_t frame_index) const { return frame_index / fps; }

  bool operator==(const VideoManifest&) const = default;
};

void validate(const VideoManifest& manifest);
void to_json(Json& j, const VideoManifest& v);
void from_json(const Json& j, VideoManifest& v);

struct TimedFrame {
  double timestamp = 0.0;
  Image image;
};

class FrameProvider {
 public:
  virtual ~FrameProvider() = default;

  // Throws MissingVideo for unknown ids.
  virtual VideoManifest info(const std::string& video_id) const = 0;
  // Throws MissingFrames when the frame cannot be served.
  virtual Image frame(const std::string& video_id, std::int64_t frame_index) const = 0;
};

// Serves frames decoded from <frame_dir>/<frame_pattern> for registered manifests.
class DirectoryFrameProvider : public FrameProvider {
 public:
  void add(VideoManifest manifest);
  bool contains(const std::string& video_id) const;
  std::vector<std::string> video_ids() const;

  VideoManifest info(const std::string& video_id) const override;
  Image frame(const std::string& video_id, std::int64_t frame_index) const override;

 private:
  mutable std::mutex mu_;
  std::map<std::string, VideoManifest> manifests_;
};

// Routes each video id to the provider that registered it. Providers are shared.
class FrameRouter : public FrameProvider {
 public:
  void route(const std::string& video_id, std::shared_ptr<const FrameProvider> provider);
  bool contains(const std::string& video_id) const;

  VideoManifest info(const std::string& video_id) const override;
  Image frame(const std::string& video_id, std::int64_t frame_index) const override;

 private:
  std::shared_ptr<const FrameProvider> find(const std::string& video_id) const;

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const FrameProvider>> routes_;
};

}  // namespace foresearch::imaging
