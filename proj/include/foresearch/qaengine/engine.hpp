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

// Four-stage QA data engine: entity extraction from dense captions, visual
// grounding of each entity, template-driven QA generation, and automated
// validation with a human review queue for whatever fails.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "foresearch/core/json.hpp"
#include "foresearch/core/types.hpp"
#include "foresearch/imaging/frames.hpp"
#include "foresearch/qaengine/client.hpp"

namespace foresearch::qaengine {

struct Caption {
  double start = 0.0;
  double end = 0.0;
  std::string text;

  bool operator==(const Caption&) const = default;
};

struct CaptionTrack {
  std::string video_id;
  std::vector<Caption> captions;

  bool operator==(const CaptionTrack&) const = default;
};

// Sorted by start, well-formed spans, non-empty text. Throws InvalidArgument.
void validate(const CaptionTrack& track);
IntervalSet caption_support(const CaptionTrack& track);

struct PersonEntity {
  std::string entity_id;
  std::string video_id;
  std::string reference;
  IntervalSet mentions;
  std::vector<ImageRef> query_crops;
  // Set by grounding. False means no crop survived verification and the
  // entity must not back a photo query.
  bool multimodal_usable = false;

  bool operator==(const PersonEntity&) const = default;
};

struct Provenance {
  std::string stage;
  std::string prompt_id;
  std::string model_id;
  std::string response_sha256;

  bool operator==(const Provenance&) const = default;
};

struct CandidateQA {
  std::string candidate_id;
  std::string video_id;
  std::optional<std::string> entity_id;
  Subtask subtask = Subtask::kAC;
  std::string question;
  std::optional<std::string> question_indirect;
  std::string answer;
  std::vector<std::string> distractors;
  std::optional<std::string> person;
  IntervalSet timestamps;
  Provenance provenance;

  bool operator==(const CandidateQA&) const = default;
};

// Content hash over everything except the id itself and the provenance.
std::string candidate_id(const CandidateQA& candidate);

struct ReviewItem {
  std::string item_id;
  std::string status = "pending";  // pending | accepted | rejected
  std::vector<std::string> reasons;
  CandidateQA candidate;
  // The sample that acceptance would publish, when one could be built.
  std::optional<QASample> proposed;

  bool operator==(const ReviewItem&) const = default;
};

void to_json(Json& j, const Caption& v);
void from_json(const Json& j, Caption& v);
void to_json(Json& j, const CaptionTrack& v);
void from_json(const Json& j, CaptionTrack& v);
void to_json(Json& j, const PersonEntity& v);
void from_json(const Json& j, PersonEntity& v);
void to_json(Json& j, const Provenance& v);
void from_json(const Json& j, Provenance& v);
void to_json(Json& j, const CandidateQA& v);
void from_json(const Json& j, CandidateQA& v);
void to_json(Json& j, const ReviewItem& v);
void from_json(const Json& j, ReviewItem& v);

struct LogEntry {
  std::string stage;
  std::string video_id;
  std::string code;
  std::string message;

  bool operator==(const LogEntry&) const = default;
};

void to_json(Json& j, const LogEntry& v);

class StageLog {
 public:
  void add(LogEntry entry);
  // Sorted, so concurrent stages log deterministically.
  std::vector<LogEntry> entries() const;
  std::size_t count(std::string_view code) const;

 private:
  mutable std::mutex mu_;
  std::vector<LogEntry> entries_;
};

// Maps template-driven subtasks onto their prompt assets.
std::string_view template_asset(Subtask subtask);
inline constexpr std::size_t kMaxCandidatesPerCall = 3;
inline constexpr std::int64_t kGroundingFrames = 8;

// Stage 1. A response that is not a JSON array of well-formed entities is
// retried once; a second failure drops the track's entities and logs
// SchemaViolation. Mentions are clipped to the caption spans.
std::vector<PersonEntity> extract_entities(const CaptionTrack& captions, ModelClient& llm,
                                           StageLog* log = nullptr);

// Writes verified crops to <root>/crops/<entity_id>/ and hands back references
// relative to root. Without a root, crops stay inline as PNG bytes.
class CropStore {
 public:
  CropStore() = default;
  explicit CropStore(std::filesystem::path root) : root_(std::move(root)) {}

  ImageRef put(const std::string& entity_id, const std::string& name, const imaging::Image& crop) const;
  std::string bytes(const ImageRef& ref) const;

 private:
  std::optional<std::filesystem::path> root_;
};

// Stage 2. Eight frames per mention; a box per frame, then a presence check
// on the crop. Only verified crops are kept.
PersonEntity ground_entity(PersonEntity entity, const imaging::FrameProvider& frames,
                           ModelClient& lmm, const CropStore& crops = {},
                           StageLog* log = nullptr);

// Stage 3. Person-specific subtasks need an entity; global ones take none.
// At most three candidates per call. Timestamps are clipped to the entity's
// mentions (or the caption spans for global subtasks); an element left with no
// time is dropped.
std::vector<CandidateQA> generate_qa(const CaptionTrack& captions, const PersonEntity* entity,
                                     Subtask subtask, ModelClient& llm, StageLog* log = nullptr);

struct PackagePolicy {
  // Per-video duration bound on intervals; falls back to the last caption end.
  std::map<std::string, double> durations;
  bool multimodal = true;
  // Donor videos must not hold an entity sharing this share of the target's tokens.
  double donor_overlap = 0.5;
};

struct Package {
  std::vector<QASample> accepted;
  std::vector<ReviewItem> review;
};

// Token overlap |T ∩ D| / |T| over lowercase word tokens minus stopwords.
double reference_overlap(const std::string& target, const std::string& other);

// Stage 4, automated half. Never throws on bad candidates; they go to review.
Package validate_and_package(const std::vector<CandidateQA>& candidates,
                             const std::vector<PersonEntity>& entities,
                             const std::vector<CaptionTrack>& captions,
                             const PackagePolicy& policy, const CropStore& crops = {},
                             StageLog* log = nullptr);

// File-level driver. Every stage reads its inputs from and writes its output
// to out_dir, so stages can be re-run independently.
struct EngineConfig {
  std::filesystem::path captions;
  std::filesystem::path out_dir;
  std::size_t workers = 4;
  std::vector<Subtask> subtasks{std::begin(kAllSubtasks), std::end(kAllSubtasks)};
  PackagePolicy policy;
};

inline constexpr std::string_view kEntitiesFile = "entities.jsonl";
inline constexpr std::string_view kGroundedFile = "grounded_entities.jsonl";
inline constexpr std::string_view kCandidatesFile = "candidates.jsonl";
inline constexpr std::string_view kReviewFile = "review_queue.jsonl";
inline constexpr std::string_view kBenchmarkFile = "benchmark.jsonl";

enum class Stage { kExtract, kGround, kGenerate, kPackage };

Stage parse_stage(std::string_view name);
std::string_view stage_name(Stage stage);

std::vector<CaptionTrack> load_captions(const std::filesystem::path& path);

struct EngineClients {
  ModelClient* llm = nullptr;
  ModelClient* lmm = nullptr;
  const imaging::FrameProvider* frames = nullptr;
};

void run_stage(Stage stage, const EngineConfig& cfg, const EngineClients& clients);
void run_all(const EngineConfig& cfg, const EngineClients& clients);

}  // namespace foresearch::qaengine
