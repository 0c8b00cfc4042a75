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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "foresearch/encoder/gateway.hpp"
#include "foresearch/orchestrator/orchestrator.hpp"
#include "foresearch/tracklet/clips.hpp"
#include "foresearch/tracklet/tracker.hpp"
#include "foresearch/vecindex/index.hpp"

namespace foresearch::orchestrator {

struct StageTimings {
  double retrieval_ms = 0.0;
  double ttft_ms = 0.0;
  double generation_ms = 0.0;
  double total_ms = 0.0;
};

struct PipelineResult {
  std::vector<vecindex::SearchHit> hits;
  std::size_t frames_sent = 0;
  std::optional<VlmResponse> response;
  std::vector<std::string> warnings;
  StageTimings timings;
};

// Retrieve -> assemble -> answer over shared components. The index and frame
// provider are only read; every referenced object must outlive the pipeline.
class Pipeline {
 public:
  Pipeline(const encoder::EncoderGateway& gateway, const vecindex::VectorIndex& index,
           const imaging::FrameProvider& frames, std::shared_ptr<VlmBackend> vlm,
           GroundingMode mode = {}, VlmRetry retry = {});

  std::vector<vecindex::SearchHit> retrieve(const Query& query, const vecindex::SearchFilter& filter,
                                            std::size_t k) const;

  // With answer=false only retrieval runs. A VLM outage is reported as a
  // warning with no response instead of an exception.
  PipelineResult run(const Query& query, const QASample* sample,
                     const vecindex::SearchFilter& filter, bool answer = true) const;

  // Searches within the sample's video. Throws MissingVideo for unknown videos.
  PipelineResult run_sample(const QASample& sample) const;

  const GroundingMode& mode() const { return mode_; }

 private:
  const encoder::EncoderGateway& gateway_;
  const vecindex::VectorIndex& index_;
  const imaging::FrameProvider& frames_;
  std::shared_ptr<VlmBackend> vlm_;
  GroundingMode mode_;
  VlmRetry retry_;
};

// Indexing stage: associate -> tracks_to_clips -> embed_clip -> insert.
// Clips are embedded in parallel and inserted in clip order. Returns the clips.
std::vector<Clip> index_detections(std::span<const Detection> detections,
                                   const tracklet::CameraMap& cameras,
                                   const encoder::EncoderGateway& gateway,
                                   const imaging::FrameProvider& frames, vecindex::VectorIndex& index,
                                   const tracklet::TrackerConfig& tracker = {},
                                   const tracklet::ClipPolicy& policy = {});

// Full-frame variant: fixed windows over the whole video instead of tracks.
std::vector<Clip> index_full_frame(const imaging::VideoManifest& manifest,
                                   const encoder::EncoderGateway& gateway,
                                   const imaging::FrameProvider& frames, vecindex::VectorIndex& index,
                                   const tracklet::ClipPolicy& policy = {});

}  // namespace foresearch::orchestrator
