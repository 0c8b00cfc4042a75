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

#include "foresearch/qaengine/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <set>
#include <thread>
#include <tuple>

#include "foresearch/core/digest.hpp"
#include "foresearch/core/prompts.hpp"
#include "foresearch/encoder/sampling.hpp"

namespace foresearch::qaengine {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string norm_option(const std::string& s) { return lower(trim(s)); }

// Runs fn(i) for i < n on up to `workers` threads. Rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const auto i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Model output often wraps JSON in prose or code fences; take the outermost
// bracketed span when the whole text does not parse.
std::optional<Json> extract_json(const std::string& text, char open, char close) {
  auto j = Json::parse(text, nullptr, false);
  if (!j.is_discarded()) return j;
  const auto b = text.find(open);
  const auto e = text.rfind(close);
  if (b == std::string::npos || e == std::string::npos || e < b) return std::nullopt;
  j = Json::parse(text.substr(b, e - b + 1), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::kSchemaViolation, what); }

std::string req_string(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
    schema(std::string("missing string field \"") + key + "\"");
  }
  auto s = trim(j[key].get<std::string>());
  if (s.empty()) schema(std::string("empty field \"") + key + "\"");
  return s;
}

TimeInterval req_interval(const Json& j) {
  if (!j.is_object() || !j.contains("start") || !j.contains("end") || !j["start"].is_number() ||
      !j["end"].is_number()) {
    schema("timestamp must be {\"start\": number, \"end\": number}");
  }
  try {
    return make_interval(j["start"].get<double>(), j["end"].get<double>());
  } catch (const Error& e) {
    schema(e.what());
  }
}

// Keeps only time the source material vouches for. Points survive when the
// support contains them; pieces that merely touch the support do not.
IntervalSet clip_to(const IntervalSet& wanted, const IntervalSet& support) {
  std::vector<TimeInterval> keep;
  for (const auto& iv : wanted) {
    for (const auto& piece : intersect(IntervalSet{iv}, support)) {
      if (piece.length() > 0.0 || iv.length() == 0.0) keep.push_back(piece);
    }
  }
  return canonicalize(keep);
}

bool within(const IntervalSet& inner, const IntervalSet& outer) {
  for (const auto& iv : inner) {
    if (iv.length() == 0.0) {
      const bool hit = std::any_of(outer.begin(), outer.end(), [&](const TimeInterval& o) {
        return o.start <= iv.start && iv.end <= o.end;
      });
      if (!hit) return false;
    } else if (intersection_measure(IntervalSet{iv}, outer) < iv.length() - 1e-9) {
      return false;
    }
  }
  return true;
}

std::string short_hash(std::string_view prefix, const std::string& content) {
  return std::string(prefix) + sha256_hex(content).substr(0, 16);
}

Json caption_input(const CaptionTrack& track) {
  Json arr = Json::array();
  for (const auto& c : track.captions) arr.push_back(c);
  return arr;
}

std::string entity_key(const std::string& video_id, const std::string& reference) {
  return short_hash("ent-", video_id + "\n" + lower(reference));
}

}  // namespace

// ---------------------------------------------------------------- encodings

void to_json(Json& j, const Caption& v) { j = Json{{"start", v.start}, {"end", v.end}, {"text", v.text}}; }

void from_json(const Json& j, Caption& v) {
  v.start = j.at("start").get<double>();
  v.end = j.at("end").get<double>();
  v.text = j.at("text").get<std::string>();
}

void to_json(Json& j, const CaptionTrack& v) { j = Json{{"video_id", v.video_id}, {"captions", v.captions}}; }

void from_json(const Json& j, CaptionTrack& v) {
  v.video_id = j.at("video_id").get<std::string>();
  v.captions = j.at("captions").get<std::vector<Caption>>();
}

void to_json(Json& j, const PersonEntity& v) {
  j = Json{{"entity_id", v.entity_id},   {"video_id", v.video_id},
           {"reference", v.reference},   {"mentions", v.mentions},
           {"query_crops", v.query_crops}, {"multimodal_usable", v.multimodal_usable}};
}

void from_json(const Json& j, PersonEntity& v) {
  v.entity_id = j.at("entity_id").get<std::string>();
  v.video_id = j.at("video_id").get<std::string>();
  v.reference = j.at("reference").get<std::string>();
  v.mentions = j.at("mentions").get<IntervalSet>();
  v.query_crops = j.value("query_crops", std::vector<ImageRef>{});
  v.multimodal_usable = j.value("multimodal_usable", false);
}

void to_json(Json& j, const Provenance& v) {
  j = Json{{"stage", v.stage}, {"prompt_id", v.prompt_id}, {"model_id", v.model_id},
           {"response_sha256", v.response_sha256}};
}

void from_json(const Json& j, Provenance& v) {
  v.stage = j.value("stage", std::string());
  v.prompt_id = j.value("prompt_id", std::string());
  v.model_id = j.value("model_id", std::string());
  v.response_sha256 = j.value("response_sha256", std::string());
}

namespace {

Json candidate_body(const CandidateQA& v) {
  Json j{{"video_id", v.video_id},
         {"subtask", subtask_name(v.subtask)},
         {"question", v.question},
         {"answer", v.answer},
         {"distractors", v.distractors},
         {"timestamps", v.timestamps}};
  j["entity_id"] = v.entity_id ? Json(*v.entity_id) : Json(nullptr);
  j["question_indirect"] = v.question_indirect ? Json(*v.question_indirect) : Json(nullptr);
  j["person"] = v.person ? Json(*v.person) : Json(nullptr);
  return j;
}

template <typename T>
std::optional<T> opt(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

std::string candidate_id(const CandidateQA& candidate) {
  return short_hash("cand-", candidate_body(candidate).dump());
}

void to_json(Json& j, const CandidateQA& v) {
  j = candidate_body(v);
  j["candidate_id"] = v.candidate_id;
  j["provenance"] = v.provenance;
}

void from_json(const Json& j, CandidateQA& v) {
  v.candidate_id = j.value("candidate_id", std::string());
  v.video_id = j.at("video_id").get<std::string>();
  v.entity_id = opt<std::string>(j, "entity_id");
  v.subtask = parse_subtask(j.at("subtask").get<std::string>());
  v.question = j.at("question").get<std::string>();
  v.question_indirect = opt<std::string>(j, "question_indirect");
  v.answer = j.at("answer").get<std::string>();
  v.distractors = j.value("distractors", std::vector<std::string>{});
  v.person = opt<std::string>(j, "person");
  v.timestamps = j.at("timestamps").get<IntervalSet>();
  if (j.contains("provenance")) v.provenance = j.at("provenance").get<Provenance>();
  if (v.candidate_id.empty()) v.candidate_id = candidate_id(v);
}

void to_json(Json& j, const ReviewItem& v) {
  j = Json{{"item_id", v.item_id}, {"status", v.status}, {"reasons", v.reasons}, {"candidate", v.candidate}};
  j["proposed"] = v.proposed ? Json(*v.proposed) : Json(nullptr);
}

void from_json(const Json& j, ReviewItem& v) {
  v.item_id = j.at("item_id").get<std::string>();
  v.status = j.value("status", std::string("pending"));
  if (v.status != "pending" && v.status != "accepted" && v.status != "rejected") {
    throw Error(ErrorCode::kSchemaViolation, "unknown review status '" + v.status + "'");
  }
  v.reasons = j.value("reasons", std::vector<std::string>{});
  v.candidate = j.at("candidate").get<CandidateQA>();
  v.proposed = opt<QASample>(j, "proposed");
}

void to_json(Json& j, const LogEntry& v) {
  j = Json{{"stage", v.stage}, {"video_id", v.video_id}, {"code", v.code}, {"message", v.message}};
}

void StageLog::add(LogEntry entry) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(entry));
}

std::vector<LogEntry> StageLog::entries() const {
  std::lock_guard lock(mu_);
  auto out = entries_;
  std::sort(out.begin(), out.end(), [](const LogEntry& a, const LogEntry& b) {
    return std::tie(a.stage, a.video_id, a.code, a.message) <
           std::tie(b.stage, b.video_id, b.code, b.message);
  });
  return out;
}

std::size_t StageLog::count(std::string_view code) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                [&](const LogEntry& e) { return e.code == code; }));
}

namespace {

void note(StageLog* log, std::string stage, std::string video, std::string code, std::string message) {
  if (log) log->add({std::move(stage), std::move(video), std::move(code), std::move(message)});
}

}  // namespace

void validate(const CaptionTrack& track) {
  if (track.video_id.empty()) throw Error(ErrorCode::kInvalidArgument, "caption track without video_id");
  double prev = 0.0;
  for (std::size_t i = 0; i < track.captions.size(); ++i) {
    const auto& c = track.captions[i];
    try {
      make_interval(c.start, c.end);
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidArgument, track.video_id + " caption " + std::to_string(i) + ": " + e.what());
    }
    if (trim(c.text).empty()) {
      throw Error(ErrorCode::kInvalidArgument, track.video_id + " caption " + std::to_string(i) + " has no text");
    }
    if (i > 0 && c.start < prev) {
      throw Error(ErrorCode::kInvalidArgument, track.video_id + " captions are not sorted by start");
    }
    prev = c.start;
  }
}

IntervalSet caption_support(const CaptionTrack& track) {
  std::vector<TimeInterval> spans;
  for (const auto& c : track.captions) spans.push_back({c.start, c.end});
  return canonicalize(spans);
}

std::string_view template_asset(Subtask subtask) {
  switch (subtask) {
    case Subtask::kAC: return "qa_template1_activity_v1";
    case Subtask::kAN: return "qa_template2_anomaly_v1";
    case Subtask::kCT: return "qa_template3_counting_v1";
    case Subtask::kEV: return "qa_template4_event_v1";
    case Subtask::kSE: return "qa_template5_search_v1";
    case Subtask::kTM: return "qa_template6_temporal_v1";
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown subtask");
}

// ------------------------------------------------------------ stage 1

namespace {

constexpr std::string_view kEntityPrompt = "qa_entities_v1";

struct RawEntity {
  std::string reference;
  std::vector<TimeInterval> mentions;
};

std::vector<RawEntity> parse_entities(const std::string& text) {
  const auto j = extract_json(text, '[', ']');
  if (!j || !j->is_array()) schema("entity response is not a JSON array");
  std::vector<RawEntity> out;
  for (const auto& e : *j) {
    RawEntity r;
    r.reference = req_string(e, "reference");
    if (!e.contains("mentions") || !e["mentions"].is_array() || e["mentions"].empty()) {
      schema("entity \"" + r.reference + "\" has no mentions");
    }
    for (const auto& m : e["mentions"]) r.mentions.push_back(req_interval(m));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<PersonEntity> extract_entities(const CaptionTrack& captions, ModelClient& llm, StageLog* log) {
  validate(captions);
  ModelRequest req;
  req.prompt_id = std::string(kEntityPrompt);
  req.text = fill_template(prompt_asset(kEntityPrompt), {{"input", Json{{"captions", caption_input(captions)}}.dump()}});

  std::vector<RawEntity> raw;
  bool ok = false;
  for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
    try {
      raw = parse_entities(llm.complete(req));
      ok = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSchemaViolation) throw;
      note(log, "extract", captions.video_id, attempt == 0 ? "SchemaRetry" : "SchemaViolation", e.what());
    }
  }
  if (!ok) return {};

  const auto support = caption_support(captions);
  std::map<std::string, PersonEntity> grouped;
  for (const auto& r : raw) {
    const auto mentions = clip_to(canonicalize(r.mentions), support);
    if (mentions.empty()) {
      note(log, "extract", captions.video_id, "MentionsOutsideCaptions", r.reference);
      continue;
    }
    const auto id = entity_key(captions.video_id, r.reference);
    auto& ent = grouped[id];
    if (ent.entity_id.empty()) {
      ent.entity_id = id;
      ent.video_id = captions.video_id;
      ent.reference = r.reference;
      ent.mentions = mentions;
    } else {
      auto all = ent.mentions.intervals();
      all.insert(all.end(), mentions.begin(), mentions.end());
      ent.mentions = canonicalize(all);
    }
  }
  std::vector<PersonEntity> out;
  for (auto& [id, e] : grouped) out.push_back(std::move(e));
  return out;
}

// ------------------------------------------------------------ stage 2

namespace {

constexpr std::string_view kBoxPrompt = "qa_ground_box_v1";
constexpr std::string_view kVerifyPrompt = "qa_verify_v1";

// Frames covered by an interval; an interval shorter than a frame period still
// yields the nearest frame.
std::vector<std::int64_t> frames_in(const imaging::VideoManifest& m, const TimeInterval& iv) {
  const auto count = m.frame_count();
  if (count <= 0) return {};
  auto first = static_cast<std::int64_t>(std::ceil(iv.start * m.fps - 1e-9));
  auto last = static_cast<std::int64_t>(std::floor(iv.end * m.fps + 1e-9));
  first = std::clamp<std::int64_t>(first, 0, count - 1);
  last = std::clamp<std::int64_t>(last, 0, count - 1);
  if (last < first) {
    const auto mid = static_cast<std::int64_t>(std::llround((iv.start + iv.end) / 2.0 * m.fps));
    return {std::clamp<std::int64_t>(mid, 0, count - 1)};
  }
  std::vector<std::int64_t> out;
  for (auto p : encoder::sample_frames(last - first + 1, kGroundingFrames)) out.push_back(first + p);
  return out;
}

std::optional<BBox> parse_box(const std::string& text) {
  const auto j = extract_json(text, '{', '}');
  if (!j || !j->is_object() || !j->contains("box")) schema("box response lacks a \"box\" field");
  const auto& b = (*j)["box"];
  if (b.is_null()) return std::nullopt;
  if (!b.is_array() || b.size() != 4) schema("box must be [x, y, w, h] or null");
  for (const auto& v : b) {
    if (!v.is_number()) schema("box coordinates must be numbers");
  }
  BBox box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
  if (!(box.w > 0.0) || !(box.h > 0.0)) schema("box has no area");
  return box;
}

bool parse_presence(const std::string& text) {
  const auto j = extract_json(text, '{', '}');
  if (j && j->is_object() && j->contains("present") && (*j)["present"].is_boolean()) {
    return (*j)["present"].get<bool>();
  }
  const auto t = lower(trim(text));
  if (t.rfind("yes", 0) == 0) return true;
  if (t.rfind("no", 0) == 0) return false;
  schema("verification response is neither {\"present\": bool} nor yes/no");
}

}  // namespace

ImageRef CropStore::put(const std::string& entity_id, const std::string& name, const imaging::Image& crop) const {
  const auto bytes = imaging::encode(crop);
  if (!root_) return ImageRef{"", bytes};
  const auto rel = std::filesystem::path("crops") / entity_id / (name + ".png");
  std::filesystem::create_directories((*root_ / rel).parent_path());
  write_file(*root_ / rel, bytes);
  return ImageRef{rel.generic_string(), ""};
}

std::string CropStore::bytes(const ImageRef& ref) const {
  if (!ref.bytes.empty()) return ref.bytes;
  std::filesystem::path p(ref.uri);
  if (p.is_relative() && root_) p = *root_ / p;
  return read_file(p);
}

PersonEntity ground_entity(PersonEntity entity, const imaging::FrameProvider& frames, ModelClient& lmm,
                           const CropStore& crops, StageLog* log) {
  const auto manifest = frames.info(entity.video_id);
  entity.query_crops.clear();
  std::size_t m = 0;
  for (const auto& mention : entity.mentions) {
    for (const auto f : frames_in(manifest, mention)) {
      const auto image = frames.frame(entity.video_id, f);
      ModelRequest box_req{std::string(kBoxPrompt),
                           fill_template(prompt_asset(kBoxPrompt), {{"reference", entity.reference}}),
                           {image}};
      std::optional<BBox> box;
      try {
        box = parse_box(lmm.complete(box_req));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kSchemaViolation) throw;
        note(log, "ground", entity.video_id, "SchemaViolation", entity.entity_id + " frame " + std::to_string(f) + ": " + e.what());
        continue;
      }
      if (!box) continue;
      if (imaging::clamp_box(image, *box).empty()) {
        note(log, "ground", entity.video_id, "BoxOutsideFrame", entity.entity_id + " frame " + std::to_string(f));
        continue;
      }
      const auto crop = imaging::crop(image, *box);
      ModelRequest verify_req{std::string(kVerifyPrompt),
                              fill_template(prompt_asset(kVerifyPrompt), {{"reference", entity.reference}}),
                              {crop}};
      bool present = false;
      try {
        present = parse_presence(lmm.complete(verify_req));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kSchemaViolation) throw;
        note(log, "ground", entity.video_id, "SchemaViolation", entity.entity_id + " frame " + std::to_string(f) + ": " + e.what());
      }
      if (!present) continue;
      char name[48];
      std::snprintf(name, sizeof(name), "m%02zu_f%06lld", m, static_cast<long long>(f));
      entity.query_crops.push_back(crops.put(entity.entity_id, name, crop));
    }
    ++m;
  }
  entity.multimodal_usable = !entity.query_crops.empty();
  if (!entity.multimodal_usable) {
    note(log, "ground", entity.video_id, "NoVerifiedCrop", entity.entity_id + " (" + entity.reference + ")");
  }
  return entity;
}

// ------------------------------------------------------------ stage 3

namespace {

std::vector<std::string> req_strings(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) schema(std::string("missing array field \"") + key + "\"");
  std::vector<std::string> out;
  for (const auto& s : j[key]) {
    if (!s.is_string()) schema(std::string("\"") + key + "\" must hold strings");
    out.push_back(trim(s.get<std::string>()));
  }
  return out;
}

// Field requirements follow each template's output format.
CandidateQA parse_element(Subtask subtask, const Json& e) {
  if (!e.is_object()) schema("element is not an object");
  CandidateQA c;
  c.subtask = subtask;
  c.question = req_string(e, "question");
  c.answer = req_string(e, "answer");
  if (subtask != Subtask::kSE) c.distractors = req_strings(e, "distractors");
  if (is_person_specific(subtask)) c.person = req_string(e, "person");
  if (subtask == Subtask::kSE) c.question_indirect = req_string(e, "question_indirect");
  std::vector<TimeInterval> ts;
  if (subtask == Subtask::kCT) {
    if (!e.contains("timestamps") || !e["timestamps"].is_array() || e["timestamps"].empty()) {
      schema("counting element needs a non-empty \"timestamps\" list");
    }
    for (const auto& t : e["timestamps"]) ts.push_back(req_interval(t));
  } else {
    if (!e.contains("timestamp")) schema("missing \"timestamp\"");
    ts.push_back(req_interval(e["timestamp"]));
  }
  c.timestamps = canonicalize(ts);
  return c;
}

}  // namespace

std::vector<CandidateQA> generate_qa(const CaptionTrack& captions, const PersonEntity* entity, Subtask subtask,
                                     ModelClient& llm, StageLog* log) {
  validate(captions);
  if (is_person_specific(subtask) && !entity) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(subtask_name(subtask)) + " candidates need a person entity");
  }
  if (!is_person_specific(subtask)) entity = nullptr;
  if (entity && entity->video_id != captions.video_id) {
    throw Error(ErrorCode::kInvalidArgument, "entity belongs to another video");
  }
  Json input{{"captions", caption_input(captions)}};
  if (entity) input["person_reference"] = entity->reference;
  const auto asset = template_asset(subtask);
  std::string text(prompt_asset(asset));
  const std::string slot = "{{ input_dict | tojson }}";
  if (const auto pos = text.find(slot); pos != std::string::npos) text.replace(pos, slot.size(), input.dump());
  ModelRequest req{std::string(asset), text, {}};

  const std::string stage = "generate";
  const std::string tag = entity ? entity->entity_id + " " : std::string();
  std::optional<Json> arr;
  std::string response;
  for (int attempt = 0; attempt < 2 && !arr; ++attempt) {
    response = llm.complete(req);
    auto j = extract_json(response, '[', ']');
    if (j && j->is_array()) {
      arr = std::move(j);
    } else {
      note(log, stage, captions.video_id, attempt == 0 ? "SchemaRetry" : "SchemaViolation",
           tag + std::string(subtask_name(subtask)) + ": response is not a JSON array");
    }
  }
  if (!arr) return {};
  if (arr->size() > kMaxCandidatesPerCall) {
    note(log, stage, captions.video_id, "CapExceeded",
         tag + std::string(subtask_name(subtask)) + ": kept 3 of " + std::to_string(arr->size()));
  }

  const auto support = entity ? entity->mentions : caption_support(captions);
  const Provenance prov{stage, std::string(asset), llm.model_id(), sha256_hex(response)};
  std::vector<CandidateQA> out;
  for (std::size_t i = 0; i < arr->size() && i < kMaxCandidatesPerCall; ++i) {
    CandidateQA c;
    try {
      c = parse_element(subtask, (*arr)[i]);
    } catch (const Error& e) {
      note(log, stage, captions.video_id, "SchemaViolation",
           tag + std::string(subtask_name(subtask)) + "[" + std::to_string(i) + "]: " + e.what());
      continue;
    }
    c.timestamps = clip_to(c.timestamps, support);
    if (c.timestamps.empty()) {
      note(log, stage, captions.video_id, "TimestampOutsideSource",
           tag + std::string(subtask_name(subtask)) + "[" + std::to_string(i) + "]");
      continue;
    }
    c.video_id = captions.video_id;
    if (entity) c.entity_id = entity->entity_id;
    c.provenance = prov;
    c.candidate_id = candidate_id(c);
    out.push_back(std::move(c));
  }
  return out;
}

// ------------------------------------------------------------ stage 4

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words{"a",  "an", "the",  "in",      "on", "with",
                                           "of", "and", "at", "wearing", "is", "to"};
  return words;
}

std::set<std::string> tokens(const std::string& text) {
  std::set<std::string> out;
  std::string cur;
  for (char ch : text + " ") {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      if (!stopwords().count(cur)) out.insert(cur);
      cur.clear();
    }
  }
  return out;
}

bool replace_ci(std::string& text, const std::string& needle, const std::string& with) {
  if (needle.empty()) return false;
  const auto pos = lower(text).find(lower(needle));
  if (pos == std::string::npos) return false;
  text.replace(pos, needle.size(), with);
  return true;
}

std::string sample_id(QASample s) {
  s.sample_id.clear();
  return short_hash("fsqa-", Json(s).dump());
}

constexpr std::string_view kPhoto = "the person in the photo";

struct Context {
  std::map<std::string, const PersonEntity*> entities;
  std::map<std::string, std::vector<const PersonEntity*>> by_video;
  std::map<std::string, IntervalSet> support;
  std::map<std::string, double> durations;
};

std::vector<std::string> check(const CandidateQA& c, const Context& ctx) {
  std::vector<std::string> reasons;
  if (trim(c.question).empty()) reasons.push_back("empty question");
  if (trim(c.answer).empty()) reasons.push_back("empty answer");
  if (!ctx.support.count(c.video_id)) reasons.push_back("video has no captions");
  if (is_person_specific(c.subtask) && (!c.entity_id || !ctx.entities.count(*c.entity_id))) {
    reasons.push_back("unknown person entity");
  }
  if (c.timestamps.empty()) {
    reasons.push_back("no timestamps");
  } else {
    const auto d = ctx.durations.find(c.video_id);
    if (d != ctx.durations.end() && c.timestamps.hull().end > d->second + 1e-9) {
      reasons.push_back("interval beyond video duration");
    }
    const auto s = ctx.support.find(c.video_id);
    if (s != ctx.support.end() && !within(c.timestamps, s->second)) {
      reasons.push_back("timestamps not found in source captions");
    }
    if (c.entity_id && ctx.entities.count(*c.entity_id) &&
        !within(c.timestamps, ctx.entities.at(*c.entity_id)->mentions)) {
      reasons.push_back("timestamps outside the person's mentions");
    }
  }
  if (c.subtask == Subtask::kSE) {
    if (norm_option(c.answer) != "yes") reasons.push_back("search answer must be Yes");
    if (!c.question_indirect || trim(*c.question_indirect).empty()) reasons.push_back("missing indirect question");
    return reasons;
  }
  if (c.distractors.size() < 2 || c.distractors.size() > 3) reasons.push_back("needs 2 or 3 distractors");
  std::set<std::string> seen{norm_option(c.answer)};
  for (const auto& d : c.distractors) {
    const auto n = norm_option(d);
    if (n.empty()) {
      reasons.push_back("empty distractor");
    } else if (n == norm_option(c.answer)) {
      reasons.push_back("distractor repeats the answer");
    } else if (!seen.insert(n).second) {
      reasons.push_back("duplicate distractor");
    }
  }
  if (c.subtask == Subtask::kCT &&
      std::none_of(c.answer.begin(), c.answer.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
    reasons.push_back("count answer lacks a number");
  }
  return reasons;
}

QASample build(const CandidateQA& c, std::string text, std::optional<ImageRef> image) {
  QASample s;
  s.video_id = c.video_id;
  s.subtask = c.subtask;
  s.query.text = std::move(text);
  s.query.image = std::move(image);
  s.ground_truth = c.timestamps;
  if (c.subtask == Subtask::kSE) {
    s.options = {std::string(kYes), std::string(kNo)};
    s.answer_index = 0;
  } else {
    s.options = c.distractors;
    const auto pos = stable_hash64(c.candidate_id) % (s.options.size() + 1);
    s.options.insert(s.options.begin() + static_cast<std::ptrdiff_t>(pos), c.answer);
    s.answer_index = static_cast<int>(pos);
  }
  s.sample_id = sample_id(s);
  return s;
}

QASample negative_of(const QASample& positive, const std::string& donor) {
  QASample n = positive;
  n.video_id = donor;
  n.ground_truth = {};
  n.is_negative = true;
  n.answer_index = 1;
  n.sample_id = sample_id(n);
  return n;
}

// Eligible donors in a stable per-candidate order.
std::vector<std::string> donors(const CandidateQA& c, const std::string& reference, const Context& ctx,
                                double max_overlap) {
  std::vector<std::pair<std::string, std::string>> keyed;
  for (const auto& [video, span] : ctx.support) {
    if (video == c.video_id) continue;
    bool clash = false;
    if (const auto it = ctx.by_video.find(video); it != ctx.by_video.end()) {
      for (const auto* e : it->second) clash = clash || reference_overlap(reference, e->reference) >= max_overlap;
    }
    if (!clash) keyed.emplace_back(sha256_hex(c.candidate_id + ":" + video), video);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  for (auto& [k, v] : keyed) out.push_back(std::move(v));
  return out;
}

std::optional<std::string> photo_text(const CandidateQA& c, const PersonEntity& e) {
  if (c.subtask == Subtask::kSE) {
    auto q = c.question_indirect.value_or(c.question);
    if (!replace_ci(q, "this person", std::string(kPhoto))) q = "Look at " + std::string(kPhoto) + ". " + q;
    return q;
  }
  auto q = c.question;
  for (const auto& needle : {"the " + e.reference, "a " + e.reference, e.reference}) {
    if (replace_ci(q, needle, std::string(kPhoto))) return q;
  }
  if (c.person && replace_ci(q, *c.person, std::string(kPhoto))) return q;
  return std::nullopt;
}

// Prefers a crop taken inside the candidate's evidence.
const ImageRef* pick_crop(const CandidateQA& c, const PersonEntity& e) {
  if (e.query_crops.empty()) return nullptr;
  for (std::size_t i = 0; i < e.query_crops.size(); ++i) {
    const auto& uri = e.query_crops[i].uri;
    const auto mpos = uri.rfind("/m");
    if (mpos == std::string::npos) break;
    const auto m = static_cast<std::size_t>(std::strtoul(uri.c_str() + mpos + 2, nullptr, 10));
    if (m < e.mentions.size() && intersection_measure(IntervalSet{e.mentions.intervals()[m]}, c.timestamps) > 0.0) {
      return &e.query_crops[i];
    }
  }
  return &e.query_crops.front();
}

}  // namespace

double reference_overlap(const std::string& target, const std::string& other) {
  const auto t = tokens(target);
  if (t.empty()) return 0.0;
  const auto o = tokens(other);
  std::size_t shared = 0;
  for (const auto& w : t) shared += o.count(w);
  return static_cast<double>(shared) / static_cast<double>(t.size());
}

Package validate_and_package(const std::vector<CandidateQA>& candidates, const std::vector<PersonEntity>& entities,
                             const std::vector<CaptionTrack>& captions, const PackagePolicy& policy,
                             const CropStore& crops, StageLog* log) {
  Context ctx;
  for (const auto& e : entities) {
    ctx.entities[e.entity_id] = &e;
    ctx.by_video[e.video_id].push_back(&e);
  }
  for (const auto& t : captions) {
    ctx.support[t.video_id] = caption_support(t);
    double last = 0.0;
    for (const auto& c : t.captions) last = std::max(last, c.end);
    ctx.durations[t.video_id] = last;
  }
  for (const auto& [v, d] : policy.durations) ctx.durations[v] = d;

  std::map<std::string, CandidateQA> unique;
  for (const auto& c : candidates) {
    auto copy = c;
    if (copy.candidate_id.empty()) copy.candidate_id = candidate_id(copy);
    unique.emplace(copy.candidate_id, std::move(copy));
  }

  const std::string stage = "package";
  std::map<std::string, QASample> accepted;
  std::vector<ReviewItem> review;
  auto to_review = [&](const CandidateQA& c, std::vector<std::string> reasons, std::optional<QASample> proposed) {
    ReviewItem item;
    item.item_id = "rev-" + c.candidate_id.substr(c.candidate_id.find('-') + 1);
    item.reasons = std::move(reasons);
    item.candidate = c;
    item.proposed = std::move(proposed);
    review.push_back(std::move(item));
  };

  for (const auto& [id, c] : unique) {
    auto reasons = check(c, ctx);
    const bool buildable = c.subtask == Subtask::kSE || !c.distractors.empty();
    std::optional<QASample> text_sample;
    if (buildable && !trim(c.question).empty()) text_sample = build(c, c.question, std::nullopt);
    if (!reasons.empty()) {
      to_review(c, std::move(reasons), text_sample);
      continue;
    }
    const PersonEntity* entity = c.entity_id ? ctx.entities.at(*c.entity_id) : nullptr;
    std::vector<QASample> emit{*text_sample};
    if (entity && policy.multimodal) {
      const auto text = photo_text(c, *entity);
      const auto* crop = entity->multimodal_usable ? pick_crop(c, *entity) : nullptr;
      if (!crop) {
        note(log, stage, c.video_id, "MultimodalSkipped", c.candidate_id + ": no verified crop");
      } else if (!text) {
        note(log, stage, c.video_id, "MultimodalSkipped", c.candidate_id + ": question does not name the person");
      } else {
        emit.push_back(build(c, *text, ImageRef{"", crops.bytes(*crop)}));
      }
    }
    if (c.subtask == Subtask::kSE) {
      // The same question asked in two videos must not share a negative.
      bool paired = false;
      for (const auto& donor : donors(c, c.person.value_or(entity ? entity->reference : c.question), ctx,
                                      policy.donor_overlap)) {
        std::vector<QASample> negs;
        for (const auto& s : emit) negs.push_back(negative_of(s, donor));
        if (std::any_of(negs.begin(), negs.end(), [&](const QASample& n) { return accepted.count(n.sample_id) > 0; })) {
          continue;
        }
        emit.insert(emit.end(), negs.begin(), negs.end());
        paired = true;
        break;
      }
      if (!paired) {
        to_review(c, {"no donor video for the paired negative"}, text_sample);
        continue;
      }
    }
    for (auto& s : emit) {
      try {
        validate(s);
      } catch (const Error& e) {
        note(log, stage, c.video_id, "MalformedSample", e.what());
        continue;
      }
      accepted.emplace(s.sample_id, std::move(s));
    }
  }

  Package out;
  for (auto& [id, s] : accepted) out.accepted.push_back(std::move(s));
  std::sort(review.begin(), review.end(),
            [](const ReviewItem& a, const ReviewItem& b) { return a.item_id < b.item_id; });
  out.review = std::move(review);
  return out;
}

// ------------------------------------------------------------ driver

Stage parse_stage(std::string_view name) {
  if (name == "extract" || name == "entities") return Stage::kExtract;
  if (name == "ground") return Stage::kGround;
  if (name == "generate") return Stage::kGenerate;
  if (name == "package" || name == "validate") return Stage::kPackage;
  throw Error(ErrorCode::kInvalidArgument, "unknown qa-engine stage '" + std::string(name) + "'");
}

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kExtract: return "extract";
    case Stage::kGround: return "ground";
    case Stage::kGenerate: return "generate";
    case Stage::kPackage: return "package";
  }
  return "?";
}

std::vector<CaptionTrack> load_captions(const std::filesystem::path& path) {
  std::vector<CaptionTrack> out;
  std::set<std::string> seen;
  for (const auto& row : read_jsonl(path)) {
    CaptionTrack t;
    try {
      t = row.get<CaptionTrack>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("caption track: ") + e.what());
    }
    validate(t);
    if (!seen.insert(t.video_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate caption track for " + t.video_id);
    }
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(), [](const CaptionTrack& a, const CaptionTrack& b) { return a.video_id < b.video_id; });
  return out;
}

namespace {

std::filesystem::path at(const EngineConfig& cfg, std::string_view name) { return cfg.out_dir / std::string(name); }

void write_log(const EngineConfig& cfg, Stage stage, const StageLog& log) {
  std::vector<Json> rows;
  for (const auto& e : log.entries()) rows.emplace_back(e);
  write_jsonl(cfg.out_dir / (std::string(stage_name(stage)) + ".log.jsonl"), rows);
}

template <typename T>
std::vector<T> read_if_exists(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return read_jsonl_as<T>(path);
}

void sort_entities(std::vector<PersonEntity>& v) {
  std::sort(v.begin(), v.end(), [](const PersonEntity& a, const PersonEntity& b) {
    return std::tie(a.video_id, a.entity_id) < std::tie(b.video_id, b.entity_id);
  });
}

ModelClient& need(ModelClient* c, const char* what) {
  if (!c) throw Error(ErrorCode::kInvalidArgument, std::string("stage needs a ") + what + " client");
  return *c;
}

}  // namespace

void run_stage(Stage stage, const EngineConfig& cfg, const EngineClients& clients) {
  std::filesystem::create_directories(cfg.out_dir);
  const auto tracks = load_captions(cfg.captions);
  StageLog log;

  switch (stage) {
    case Stage::kExtract: {
      auto& llm = need(clients.llm, "text LLM");
      std::vector<std::vector<PersonEntity>> per(tracks.size());
      parallel_for(tracks.size(), cfg.workers, [&](std::size_t i) { per[i] = extract_entities(tracks[i], llm, &log); });
      std::vector<PersonEntity> all;
      for (auto& v : per) all.insert(all.end(), v.begin(), v.end());
      sort_entities(all);
      write_jsonl_of(at(cfg, kEntitiesFile), all);
      break;
    }
    case Stage::kGround: {
      auto& lmm = need(clients.lmm, "multimodal LMM");
      if (!clients.frames) throw Error(ErrorCode::kInvalidArgument, "grounding needs a frame provider");
      auto entities = read_jsonl_as<PersonEntity>(at(cfg, kEntitiesFile));
      const CropStore store(cfg.out_dir);
      parallel_for(entities.size(), cfg.workers, [&](std::size_t i) {
        try {
          entities[i] = ground_entity(entities[i], *clients.frames, lmm, store, &log);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kMissingVideo && e.code() != ErrorCode::kMissingFrames) throw;
          entities[i].query_crops.clear();
          entities[i].multimodal_usable = false;
          log.add({"ground", entities[i].video_id, std::string(error_code_name(e.code())), e.what()});
        }
      });
      sort_entities(entities);
      write_jsonl_of(at(cfg, kGroundedFile), entities);
      break;
    }
    case Stage::kGenerate: {
      auto& llm = need(clients.llm, "text LLM");
      const auto entities = read_jsonl_as<PersonEntity>(at(cfg, kGroundedFile));
      std::vector<std::vector<CandidateQA>> per(tracks.size());
      parallel_for(tracks.size(), cfg.workers, [&](std::size_t i) {
        const auto& track = tracks[i];
        for (auto st : cfg.subtasks) {
          if (is_person_specific(st)) {
            for (const auto& e : entities) {
              if (e.video_id != track.video_id) continue;
              auto got = generate_qa(track, &e, st, llm, &log);
              per[i].insert(per[i].end(), got.begin(), got.end());
            }
          } else {
            auto got = generate_qa(track, nullptr, st, llm, &log);
            per[i].insert(per[i].end(), got.begin(), got.end());
          }
        }
      });
      // Existing candidates win, so re-running a stage never duplicates work.
      std::map<std::string, CandidateQA> merged;
      for (auto& c : read_if_exists<CandidateQA>(at(cfg, kCandidatesFile))) merged.emplace(c.candidate_id, c);
      for (auto& v : per) {
        for (auto& c : v) merged.emplace(c.candidate_id, c);
      }
      std::vector<CandidateQA> all;
      for (auto& [id, c] : merged) all.push_back(std::move(c));
      write_jsonl_of(at(cfg, kCandidatesFile), all);
      break;
    }
    case Stage::kPackage: {
      const auto candidates = read_jsonl_as<CandidateQA>(at(cfg, kCandidatesFile));
      const auto entities = read_jsonl_as<PersonEntity>(at(cfg, kGroundedFile));
      auto policy = cfg.policy;
      if (clients.frames) {
        for (const auto& t : tracks) {
          if (policy.durations.count(t.video_id)) continue;
          try {
            policy.durations[t.video_id] = clients.frames->info(t.video_id).duration_seconds;
          } catch (const Error&) {
          }
        }
      }
      auto pkg = validate_and_package(candidates, entities, tracks, policy, CropStore(cfg.out_dir), &log);
      // Reviewer decisions survive a re-run.
      std::map<std::string, ReviewItem> previous;
      for (auto& r : read_if_exists<ReviewItem>(at(cfg, kReviewFile))) previous.emplace(r.item_id, r);
      for (auto& r : pkg.review) {
        if (const auto it = previous.find(r.item_id); it != previous.end()) r.status = it->second.status;
      }
      // Samples a reviewer accepted earlier stay in the benchmark.
      std::map<std::string, QASample> bench;
      for (auto& s : pkg.accepted) bench.emplace(s.sample_id, s);
      for (const auto& r : pkg.review) {
        if (r.status == "accepted" && r.proposed) bench.emplace(r.proposed->sample_id, *r.proposed);
      }
      std::vector<QASample> samples;
      for (auto& [id, s] : bench) samples.push_back(std::move(s));
      write_jsonl_of(at(cfg, kBenchmarkFile), samples);
      write_jsonl_of(at(cfg, kReviewFile), pkg.review);
      break;
    }
  }
  write_log(cfg, stage, log);
}

void run_all(const EngineConfig& cfg, const EngineClients& clients) {
  for (auto s : {Stage::kExtract, Stage::kGround, Stage::kGenerate, Stage::kPackage}) run_stage(s, cfg, clients);
}

}  // namespace foresearch::qaengine
