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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "foresearch/core/types.hpp"
#include "foresearch/imaging/frames.hpp"

namespace foresearch::tracklet {

struct ClipPolicy {
  double split_gap_seconds = 2.0;
  double max_clip_seconds = 30.0;
  ClipMode mode = ClipMode::kPersonCentric;
  double full_frame_window_seconds = 10.0;
  double full_frame_fps = 1.0;

  void validate() const;
};

// video_id -> camera_id; missing entries leave camera_id empty.
using CameraMap = std::map<std::string, std::string>;

// Splits each track at observation gaps longer than split_gap_seconds and
// again so that no clip spans more than max_clip_seconds.
std::vector<Clip> tracks_to_clips(std::span<const Track> tracks, const ClipPolicy& policy,
                                  const CameraMap& cameras = {});

// Fixed windows over the whole video with frames sampled at full_frame_fps.
std::vector<Clip> full_frame_clips(const imaging::VideoManifest& video, const ClipPolicy& policy);

}  // namespace foresearch::tracklet
