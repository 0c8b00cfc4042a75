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

#include "foresearch/orchestrator/pipeline.hpp"

#include <chrono>

#include <exception>

#include "foresearch/core/error.hpp"

namespace foresearch::orchestrator {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

Pipeline::Pipeline(const encoder::EncoderGateway& gateway, const vecindex::VectorIndex& index,
                   const imaging::FrameProvider& frames, std::shared_ptr<VlmBackend> vlm,
                   GroundingMode mode, VlmRetry retry)
    : gateway_(gateway), index_(index), frames_(frames), vlm_(std::move(vlm)), mode_(mode),
      retry_(retry) {
  mode_.validate();
}

std::vector<vecindex::SearchHit> Pipeline::retrieve(const Query& query,
                                                    const vecindex::SearchFilter& filter,
                                                    std::size_t k) const {
  const auto q = gateway_.embed_query(query);
  return index_.search(q, k, filter);
}

PipelineResult Pipeline::run(const Query& query, const QASample* sample,
                             const vecindex::SearchFilter& filter, bool answer_wanted) const {
  PipelineResult out;
  const auto t0 = Clock::now();
  out.hits = retrieve(query, filter, mode_.top_k);
  out.timings.retrieval_ms = ms_since(t0);
  if (answer_wanted) {
    const auto t1 = Clock::now();
    auto request = assemble(out.hits, query, sample, mode_, frames_);
    out.frames_sent = request.frames.size();
    out.warnings = request.warnings;
    if (!vlm_) {
      out.warnings.push_back("no VLM backend configured");
    } else {
      try {
        out.response = answer(request, *vlm_, retry_, sample ? sample->options.size() : 0);
        out.timings.ttft_ms = std::chrono::duration<double, std::milli>(out.response->ttft).count();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kVlmUnavailable) throw;
        out.warnings.push_back(std::string("VLM unavailable: ") + e.what());
      }
    }
    out.timings.generation_ms = ms_since(t1);
  }
  out.timings.total_ms = ms_since(t0);
  return out;
}

PipelineResult Pipeline::run_sample(const QASample& sample) const {
  (void)frames_.info(sample.video_id);
  vecindex::SearchFilter filter;
  filter.video_id = sample.video_id;
  return run(sample.query, &sample, filter, true);
}

namespace {

std::vector<Clip> embed_and_insert(std::vector<Clip> clips, const encoder::EncoderGateway& gateway,
                                   const imaging::FrameProvider& frames,
                                   vecindex::VectorIndex& index) {
  std::vector<EmbeddingRecord> records(clips.size());
  std::vector<std::exception_ptr> errors(clips.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < clips.size(); ++i) {
    try {
      records[i] = gateway.embed_clip(clips[i], frames);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < clips.size(); ++i) index.insert(records[i], clips[i]);
  return clips;
}

}  // namespace

std::vector<Clip> index_detections(std::span<const Detection> detections,
                                   const tracklet::CameraMap& cameras,
                                   const encoder::EncoderGateway& gateway,
                                   const imaging::FrameProvider& frames, vecindex::VectorIndex& index,
                                   const tracklet::TrackerConfig& tracker,
                                   const tracklet::ClipPolicy& policy) {
  const auto tracks = tracklet::associate(detections, tracker);
  return embed_and_insert(tracklet::tracks_to_clips(tracks, policy, cameras), gateway, frames, index);
}

std::vector<Clip> index_full_frame(const imaging::VideoManifest& manifest,
                                   const encoder::EncoderGateway& gateway,
                                   const imaging::FrameProvider& frames, vecindex::VectorIndex& index,
                                   const tracklet::ClipPolicy& policy) {
  return embed_and_insert(tracklet::full_frame_clips(manifest, policy), gateway, frames, index);
}

}  // namespace foresearch::orchestrator
