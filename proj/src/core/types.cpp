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

#include "foresearch/core/types.hpp"

#include <algorithm>
#include <cmath>

#include "foresearch/core/error.hpp"

namespace foresearch {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kOutOfOrderFrames: return "OutOfOrderFrames";
    case ErrorCode::kEncoderUnavailable: return "EncoderUnavailable";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidQuery: return "InvalidQuery";
    case ErrorCode::kDuplicateClipId: return "DuplicateClipId";
    case ErrorCode::kCorruptIndex: return "CorruptIndex";
    case ErrorCode::kMissingFrames: return "MissingFrames";
    case ErrorCode::kVlmUnavailable: return "VlmUnavailable";
    case ErrorCode::kSampleMismatch: return "SampleMismatch";
    case ErrorCode::kMissingVideo: return "MissingVideo";
    case ErrorCode::kMalformedSample: return "MalformedSample";
    case ErrorCode::kLlmUnavailable: return "LlmUnavailable";
    case ErrorCode::kLmmUnavailable: return "LmmUnavailable";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

bool Error::retriable() const noexcept {
  switch (code_) {
    case ErrorCode::kEncoderUnavailable:
    case ErrorCode::kVlmUnavailable:
    case ErrorCode::kLlmUnavailable:
    case ErrorCode::kLmmUnavailable:
      return true;
    default:
      return false;
  }
}

void validate(const BBox& box) {
  if (!std::isfinite(box.x) || !std::isfinite(box.y) || !std::isfinite(box.w) ||
      !std::isfinite(box.h) || box.w <= 0.0 || box.h <= 0.0 || box.x < 0.0 ||
      box.y < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "bounding box must have positive size");
  }
}

double box_iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

void validate(const Clip& clip) {
  validate(clip.span);
  if (clip.frame_count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "clip " + clip.clip_id + " has no frames");
  }
  if (clip.mode == ClipMode::kPersonCentric && clip.boxes.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "person-centric clip " + clip.clip_id + " has no boxes");
  }
  if (clip.mode == ClipMode::kFullFrame && !clip.boxes.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "full-frame clip " + clip.clip_id + " carries boxes");
  }
}

void validate(const Query& query) {
  if (query.text.empty()) {
    throw Error(ErrorCode::kInvalidQuery, "query text must be non-empty");
  }
  if (query.image && query.image->empty()) {
    throw Error(ErrorCode::kInvalidQuery, "query image reference is empty");
  }
}

std::string_view subtask_name(Subtask s) {
  switch (s) {
    case Subtask::kSE: return "SE";
    case Subtask::kAC: return "AC";
    case Subtask::kEV: return "EV";
    case Subtask::kTM: return "TM";
    case Subtask::kCT: return "CT";
    case Subtask::kAN: return "AN";
  }
  return "?";
}

Subtask parse_subtask(std::string_view name) {
  for (Subtask s : kAllSubtasks) {
    if (subtask_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown subtask '" + std::string(name) + "'");
}

bool is_person_specific(Subtask s) {
  return s == Subtask::kSE || s == Subtask::kAC || s == Subtask::kEV ||
         s == Subtask::kTM;
}

void validate(const QASample& sample) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kMalformedSample, sample.sample_id + ": " + what);
  };
  if (sample.sample_id.empty()) fail("empty sample_id");
  if (sample.video_id.empty()) fail("empty video_id");
  if (sample.query.text.empty()) fail("empty question text");
  if (sample.query.image && sample.query.image->empty()) fail("empty query image");
  const auto n = static_cast<int>(sample.options.size());
  if (n < 2 || n > 4) fail("option count must be 2..4");
  if (sample.answer_index < 0 || sample.answer_index >= n) fail("answer_index out of range");
  if (sample.is_negative && !sample.ground_truth.empty()) {
    fail("negative sample carries ground truth");
  }
  if (sample.is_negative && sample.subtask != Subtask::kSE) {
    fail("only search samples may be negative");
  }
  if (sample.is_negative && sample.options[sample.answer_index] != kNo) {
    fail("negative samples must answer \"No\"");
  }
  if (sample.subtask != Subtask::kSE && n < 3) {
    fail("multiple-choice samples need at least 3 options");
  }
}

}  // namespace foresearch
