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
#include <span>
#include <vector>

#include "foresearch/core/types.hpp"

namespace foresearch::tracklet {

enum class Motion { kNone, kConstantVelocity };
enum class Assignment { kGreedy, kOptimal };

struct TrackerConfig {
  double iou_gate = 0.3;
  double high_score = 0.6;
  double low_score = 0.1;
  std::int64_t max_gap_frames = 30;
  std::size_t min_track_len = 5;
  Motion motion = Motion::kConstantVelocity;
  Assignment assignment = Assignment::kGreedy;

  void validate() const;
};

// Two-tier association of person detections into tracks. Videos are tracked
// independently (in parallel when OpenMP is available); the result is ordered
// by video id, then by track creation order.
//
// Throws OutOfOrderFrames if frame indices or timestamps regress within a video.
std::vector<Track> associate(std::span<const Detection> detections,
                             const TrackerConfig& cfg = {});

// Matches rows to columns of an IoU matrix, keeping only pairs with IoU >= gate.
// Greedy mode walks pairs by descending IoU, ties to the lower row then column.
// Optimal mode maximises the total IoU of gated pairs.
struct Match {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const Match&) const = default;
};

std::vector<Match> assign(const std::vector<std::vector<double>>& iou, double gate,
                          Assignment mode);

// Box the track is expected to occupy at `frame_index`.
BBox predict_box(std::span<const Observation> observations, std::int64_t frame_index,
                 Motion motion);

}  // namespace foresearch::tracklet
