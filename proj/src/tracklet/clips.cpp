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

#include "foresearch/tracklet/clips.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "foresearch/core/error.hpp"

namespace foresearch::tracklet {

void ClipPolicy::validate() const {
  if (!(split_gap_seconds > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split_gap_seconds must be positive");
  }
  if (!(max_clip_seconds > split_gap_seconds)) {
    throw Error(ErrorCode::kInvalidArgument, "max_clip_seconds must exceed split_gap_seconds");
  }
  if (!(full_frame_window_seconds > 0.0) || !(full_frame_fps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "full-frame window and fps must be positive");
  }
}

namespace {

std::string suffix(const char* fmt, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), fmt, n);
  return buf;
}

Clip make_person_clip(const Track& track, std::span<const Observation> obs, std::size_t n,
                      const CameraMap& cameras) {
  Clip clip;
  clip.clip_id = track.track_id + suffix("/c%02zu", n);
  clip.video_id = track.video_id;
  if (auto it = cameras.find(track.video_id); it != cameras.end()) clip.camera_id = it->second;
  clip.span = make_interval(obs.front().timestamp, obs.back().timestamp);
  clip.mode = ClipMode::kPersonCentric;
  for (const auto& o : obs) {
    clip.boxes.push_back({o.frame_index, o.box});
    clip.frame_indices.push_back(o.frame_index);
  }
  clip.frame_count = static_cast<std::int64_t>(obs.size());
  return clip;
}

}  // namespace

std::vector<Clip> tracks_to_clips(std::span<const Track> tracks, const ClipPolicy& policy,
                                  const CameraMap& cameras) {
  policy.validate();
  if (policy.mode != ClipMode::kPersonCentric) {
    throw Error(ErrorCode::kInvalidArgument, "tracks_to_clips requires person_centric mode");
  }
  std::vector<Clip> clips;
  for (const auto& track : tracks) {
    const auto& obs = track.observations;
    if (obs.empty()) continue;
    std::size_t begin = 0;
    std::size_t n = 0;
    for (std::size_t i = 1; i <= obs.size(); ++i) {
      const bool last = i == obs.size();
      const bool split =
          last || obs[i].timestamp - obs[i - 1].timestamp > policy.split_gap_seconds ||
          obs[i].timestamp - obs[begin].timestamp > policy.max_clip_seconds;
      if (!split) continue;
      clips.push_back(make_person_clip(
          track, std::span<const Observation>(obs).subspan(begin, i - begin), n++, cameras));
      begin = i;
    }
  }
  return clips;
}

std::vector<Clip> full_frame_clips(const imaging::VideoManifest& video, const ClipPolicy& policy) {
  policy.validate();
  std::vector<Clip> clips;
  const double duration = video.duration_seconds;
  const std::int64_t total_frames = video.frame_count();
  if (duration <= 0.0 || total_frames == 0) return clips;
  const double window = policy.full_frame_window_seconds;
  const auto windows = static_cast<std::size_t>(std::ceil(duration / window - 1e-9));
  for (std::size_t w = 0; w < windows; ++w) {
    const double start = static_cast<double>(w) * window;
    const double end = std::min(duration, start + window);
    Clip clip;
    clip.clip_id = video.video_id + suffix("/ff%04zu", w);
    clip.video_id = video.video_id;
    clip.camera_id = video.camera_id;
    clip.span = make_interval(start, end);
    clip.mode = ClipMode::kFullFrame;
    for (std::size_t i = 0;; ++i) {
      const double t = start + static_cast<double>(i) / policy.full_frame_fps;
      if (i > 0 && t >= end) break;
      const auto f = std::min(total_frames - 1,
                              static_cast<std::int64_t>(std::floor(t * video.fps + 1e-9)));
      if (clip.frame_indices.empty() || clip.frame_indices.back() != f) {
        clip.frame_indices.push_back(f);
      }
      if (t >= end) break;
    }
    clip.frame_count = static_cast<std::int64_t>(clip.frame_indices.size());
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace foresearch::tracklet
