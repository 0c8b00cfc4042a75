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
#include <optional>
#include <string>
#include <vector>

#include "foresearch/core/interval.hpp"

namespace foresearch {

struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  double area() const { return w * h; }
  bool operator==(const BBox&) const = default;
};

// Throws InvalidArgument unless w > 0, h > 0 and x, y non-negative.
void validate(const BBox& box);

// Spatial overlap used by the tracker. Not a prediction metric.
double box_iou(const BBox& a, const BBox& b);

struct Detection {
  std::string video_id;
  std::int64_t frame_index = 0;
  double timestamp = 0.0;
  BBox box;
  double score = 0.0;
  std::string class_label = "person";

  bool operator==(const Detection&) const = default;
};

struct Observation {
  std::int64_t frame_index = 0;
  double timestamp = 0.0;
  BBox box;

  bool operator==(const Observation&) const = default;
};

struct Track {
  std::string track_id;
  std::string video_id;
  std::vector<Observation> observations;

  bool operator==(const Track&) const = default;
};

enum class ClipMode { kPersonCentric, kFullFrame };

struct FrameBox {
  std::int64_t frame_index = 0;
  BBox box;

  bool operator==(const FrameBox&) const = default;
};

struct Clip {
  std::string clip_id;
  std::string camera_id;
  std::string video_id;
  TimeInterval span;
  // Per-frame boxes for person-centric clips; empty for full-frame clips.
  std::vector<FrameBox> boxes;
  // Source frame references. Mirrors boxes for person-centric clips.
  std::vector<std::int64_t> frame_indices;
  ClipMode mode = ClipMode::kPersonCentric;
  std::int64_t frame_count = 0;

  bool operator==(const Clip&) const = default;
};

void validate(const Clip& clip);

struct EmbeddingRecord {
  std::string clip_id;
  std::vector<float> vector;
  double norm = 1.0;

  bool operator==(const EmbeddingRecord&) const = default;
};

// Encoded image bytes (PNG/JPEG) or a URI / local path resolved by the reader.
struct ImageRef {
  std::string uri;
  std::string bytes;

  bool empty() const { return uri.empty() && bytes.empty(); }
  bool operator==(const ImageRef&) const = default;
};

enum class Modality { kTextOnly, kImageText };

struct Query {
  std::string text;
  std::optional<ImageRef> image;

  Modality modality() const {
    return image ? Modality::kImageText : Modality::kTextOnly;
  }
  bool operator==(const Query&) const = default;
};

// Throws InvalidQuery on empty text or an empty image reference.
void validate(const Query& query);

enum class Subtask { kSE, kAC, kEV, kTM, kCT, kAN };

inline constexpr Subtask kAllSubtasks[] = {Subtask::kSE, Subtask::kAC,
                                           Subtask::kEV, Subtask::kTM,
                                           Subtask::kCT, Subtask::kAN};

std::string_view subtask_name(Subtask s);
Subtask parse_subtask(std::string_view name);
bool is_person_specific(Subtask s);

struct QASample {
  std::string sample_id;
  std::string video_id;
  Subtask subtask = Subtask::kSE;
  Query query;
  std::vector<std::string> options;
  int answer_index = 0;
  IntervalSet ground_truth;
  bool is_negative = false;

  bool operator==(const QASample&) const = default;
};

// Throws MalformedSample when any QASample invariant is broken.
void validate(const QASample& sample);

struct Prediction {
  std::string sample_id;
  std::optional<int> chosen_index;
  IntervalSet predicted_intervals;
  std::string raw_response;

  bool operator==(const Prediction&) const = default;
};

// Option strings used for binary search questions.
inline constexpr std::string_view kYes = "Yes";
inline constexpr std::string_view kNo = "No";

}  // namespace foresearch
