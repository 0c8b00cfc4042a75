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

#include "foresearch/orchestrator/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <regex>
#include <thread>

#include "foresearch/core/digest.hpp"
#include "foresearch/core/error.hpp"
#include "foresearch/core/http.hpp"
#include "foresearch/core/prompts.hpp"
#include "foresearch/encoder/sampling.hpp"

namespace foresearch::orchestrator {

void GroundingMode::validate() const {
  if (crop && overlay) {
    throw Error(ErrorCode::kInvalidArgument, "grounding mode cannot both crop and overlay");
  }
  if (top_k < 1) throw Error(ErrorCode::kInvalidArgument, "top_k must be positive");
  if (frames_per_clip < 1) throw Error(ErrorCode::kInvalidArgument, "frames_per_clip must be positive");
  if (extra_uniform_frames < 0) {
    throw Error(ErrorCode::kInvalidArgument, "extra_uniform_frames must be non-negative");
  }
}

void to_json(Json& j, const GroundingMode& v) {
  j = Json{{"crop", v.crop},
           {"overlay", v.overlay},
           {"coords", v.coords},
           {"top_k", v.top_k},
           {"frames_per_clip", v.frames_per_clip},
           {"extra_uniform_frames", v.extra_uniform_frames},
           {"chronological", v.chronological}};
}

void from_json(const Json& j, GroundingMode& v) {
  GroundingMode d;
  v.crop = j.value("crop", d.crop);
  v.overlay = j.value("overlay", d.overlay);
  v.coords = j.value("coords", d.coords);
  v.top_k = j.value("top_k", d.top_k);
  v.frames_per_clip = j.value("frames_per_clip", d.frames_per_clip);
  v.extra_uniform_frames = j.value("extra_uniform_frames", d.extra_uniform_frames);
  v.chronological = j.value("chronological", d.chronological);
}

namespace {

std::string fmt_seconds(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

std::string fmt_box(const BBox& b) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "[%.0f,%.0f,%.0f,%.0f]", b.x, b.y, b.w, b.h);
  return buf;
}

char option_letter(std::size_t i) { return static_cast<char>('A' + i); }

}  // namespace

VlmRequest assemble(std::span<const vecindex::SearchHit> hits, const Query& query,
                    const QASample* sample, const GroundingMode& mode,
                    const imaging::FrameProvider& frames) {
  mode.validate();
  VlmRequest req;
  req.sample_id = sample ? sample->sample_id : std::string();
  req.system_prompt = std::string(prompt_asset(kSystemPromptAsset));
  if (query.image) req.query_image = imaging::load(*query.image);

  const std::size_t n = std::min(hits.size(), mode.top_k);
  std::vector<std::string> clip_lines;
  std::map<std::string, imaging::VideoManifest> manifests;
  auto manifest_of = [&](const std::string& video_id) -> const imaging::VideoManifest& {
    auto it = manifests.find(video_id);
    if (it == manifests.end()) it = manifests.emplace(video_id, frames.info(video_id)).first;
    return it->second;
  };

  for (std::size_t rank = 0; rank < n; ++rank) {
    const Clip& clip = hits[rank].clip;
    const auto& refs = clip.frame_indices;
    if (refs.empty()) throw Error(ErrorCode::kMissingFrames, clip.clip_id + " has no frames");
    const auto& manifest = manifest_of(clip.video_id);
    const bool has_boxes = clip.mode == ClipMode::kPersonCentric && clip.boxes.size() == refs.size();
    if ((mode.crop || mode.overlay) && !has_boxes) {
      req.warnings.push_back(clip.clip_id + ": no per-frame boxes, frames passed unmodified");
    }
    std::string boxes_text;
    for (auto pick : encoder::sample_frames(static_cast<std::int64_t>(refs.size()),
                                            mode.frames_per_clip)) {
      const auto idx = static_cast<std::size_t>(pick);
      VlmFrame f;
      f.timestamp = manifest.timestamp_of(refs[idx]);
      f.clip_rank = rank + 1;
      f.image = frames.frame(clip.video_id, refs[idx]);
      if (has_boxes) {
        const BBox& box = clip.boxes[idx].box;
        if (mode.crop) {
          f.image = imaging::crop(f.image, box);
        } else if (mode.overlay) {
          imaging::draw_box(f.image, box, imaging::kOverlayColor, 3);
        }
        boxes_text += " t=" + fmt_seconds(f.timestamp) + ":" + fmt_box(box);
      }
      req.frames.push_back(std::move(f));
    }
    if (mode.coords) {
      clip_lines.push_back("Clip " + std::to_string(rank + 1) + ": camera " +
                           (clip.camera_id.empty() ? std::string("unknown") : clip.camera_id) +
                           ", time " + fmt_seconds(clip.span.start) + "-" +
                           fmt_seconds(clip.span.end) + " s, bbox per-frame [x,y,w,h]" +
                           (boxes_text.empty() ? std::string(" none") : boxes_text));
    }
  }

  if (mode.extra_uniform_frames > 0) {
    std::string video_id = sample ? sample->video_id : std::string();
    if (video_id.empty() && n > 0) video_id = hits[0].clip.video_id;
    if (!video_id.empty()) {
      const auto& manifest = manifest_of(video_id);
      for (auto f : encoder::sample_frames(manifest.frame_count(), mode.extra_uniform_frames)) {
        req.frames.push_back({manifest.timestamp_of(f), frames.frame(video_id, f), 0});
      }
    } else {
      req.warnings.push_back("no video to draw uniform frames from");
    }
  }
  if (mode.chronological) {
    std::stable_sort(req.frames.begin(), req.frames.end(),
                     [](const VlmFrame& a, const VlmFrame& b) { return a.timestamp < b.timestamp; });
  }

  std::string text = "Question: " + query.text + "\n";
  if (req.query_image) text += "A photo of the person of interest is attached.\n";
  if (!clip_lines.empty()) {
    text += "Retrieved clips:\n";
    for (const auto& line : clip_lines) text += line + "\n";
  }
  text += "Frames:\n";
  for (std::size_t i = 0; i < req.frames.size(); ++i) {
    const auto& f = req.frames[i];
    text += "Frame " + std::to_string(i + 1) + " at t=" + fmt_seconds(f.timestamp) + " s" +
            (f.clip_rank ? " from retrieved clip " + std::to_string(f.clip_rank) : std::string(" (uniform)")) +
            "\n";
  }
  if (n == 0) text += "No clips were retrieved.\n";
  if (sample) {
    text += "Options:\n";
    for (std::size_t i = 0; i < sample->options.size(); ++i) {
      text += std::string(1, option_letter(i)) + ". " + sample->options[i] + "\n";
    }
  }
  text += "Reply with the JSON object described in the instructions.";
  req.user_text = std::move(text);
  return req;
}

Json to_wire(const VlmRequest& request) {
  Json images = Json::array();
  for (const auto& f : request.frames) {
    images.push_back({{"base64", base64_encode(imaging::encode(f.image))},
                      {"timestamp", f.timestamp},
                      {"clip_rank", f.clip_rank}});
  }
  Json body{{"system", request.system_prompt}, {"text", request.user_text}, {"images", images}};
  if (request.query_image) {
    body["query_image"] = base64_encode(imaging::encode(*request.query_image));
  }
  if (!request.sample_id.empty()) body["sample_id"] = request.sample_id;
  return body;
}

VlmRequest from_wire(const Json& body) {
  VlmRequest req;
  req.system_prompt = body.value("system", "");
  req.user_text = body.at("text").get<std::string>();
  req.sample_id = body.value("sample_id", "");
  for (const auto& img : body.value("images", Json::array())) {
    VlmFrame f;
    f.timestamp = img.at("timestamp").get<double>();
    f.clip_rank = img.value("clip_rank", std::size_t{0});
    f.image = imaging::decode(base64_decode(img.at("base64").get<std::string>()));
    req.frames.push_back(std::move(f));
  }
  if (body.contains("query_image") && body["query_image"].is_string()) {
    req.query_image = imaging::decode(base64_decode(body["query_image"].get<std::string>()));
  }
  return req;
}

namespace {

std::optional<int> answer_of(const Json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_unsigned()) return static_cast<int>(v.get<unsigned>());
  if (!v.is_string()) return std::nullopt;
  std::string s = v.get<std::string>();
  s.erase(0, s.find_first_not_of(" \t\n("));
  if (s.empty()) return std::nullopt;
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  const bool letter_alone = s.size() == 1 || !std::isalpha(static_cast<unsigned char>(s[1]));
  if (c >= 'A' && c <= 'Z' && letter_alone) return c - 'A';
  if (std::isdigit(static_cast<unsigned char>(s[0]))) {
    try {
      return std::stoi(s);
    } catch (...) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::vector<TimeInterval> intervals_of(const Json& v) {
  std::vector<TimeInterval> out;
  if (!v.is_array()) return out;
  for (const auto& item : v) {
    double s = 0.0, e = 0.0;
    if (item.is_object() && item.contains("start") && item.contains("end") &&
        item["start"].is_number() && item["end"].is_number()) {
      s = item["start"].get<double>();
      e = item["end"].get<double>();
    } else if (item.is_array() && item.size() == 2 && item[0].is_number() && item[1].is_number()) {
      s = item[0].get<double>();
      e = item[1].get<double>();
    } else {
      continue;
    }
    if (!std::isfinite(s) || !std::isfinite(e)) continue;
    if (s > e) std::swap(s, e);
    if (s < 0.0) continue;
    out.push_back({s, e});
  }
  return out;
}

// Candidate objects in order of their opening brace; strings are honoured.
std::optional<Json> first_answer_object(std::string_view raw) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos;
       open = raw.find('{', open + 1)) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = open; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        auto parsed = Json::parse(raw.substr(open, i - open + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object() &&
            (parsed.contains("answer") || parsed.contains("intervals"))) {
          return parsed;
        }
        break;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

ParsedResponse parse_response(std::string_view raw, std::size_t option_count) {
  ParsedResponse out;
  try {
    if (auto obj = first_answer_object(raw)) {
      out.from_json = true;
      if (obj->contains("answer")) out.chosen_index = answer_of((*obj)["answer"]);
      if (obj->contains("intervals")) {
        const auto ivs = intervals_of((*obj)["intervals"]);
        out.intervals = canonicalize(ivs);
      }
      if (obj->contains("summary") && (*obj)["summary"].is_string()) {
        out.summary = (*obj)["summary"].get<std::string>();
      }
    } else {
      const std::string text(raw);
      static const std::regex answer_re(
          R"([Aa][Nn][Ss][Ww][Ee][Rr]\s*(?:[Ii][Ss]\s*)?[:=]?\s*(?:[Oo]ption\s*)?\(?([A-D])\b)");
      static const std::regex span_re(
          "(\\d+(?:\\.\\d+)?)\\s*(?:seconds|sec|s)?\\s*(?:\xE2\x80\x93|-|to)\\s*(\\d+(?:\\.\\d+)?)");
      std::smatch m;
      if (std::regex_search(text, m, answer_re)) out.chosen_index = m[1].str()[0] - 'A';
      std::vector<TimeInterval> ivs;
      for (auto it = std::sregex_iterator(text.begin(), text.end(), span_re);
           it != std::sregex_iterator(); ++it) {
        double s = std::stod((*it)[1].str());
        double e = std::stod((*it)[2].str());
        if (!std::isfinite(s) || !std::isfinite(e)) continue;
        if (s > e) std::swap(s, e);
        ivs.push_back({s, e});
      }
      out.intervals = canonicalize(ivs);
    }
  } catch (...) {
    return {};
  }
  if (out.chosen_index &&
      (*out.chosen_index < 0 ||
       (option_count > 0 && static_cast<std::size_t>(*out.chosen_index) >= option_count))) {
    out.chosen_index.reset();
  }
  return out;
}

HttpVlmBackend::HttpVlmBackend(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

VlmReply HttpVlmBackend::generate(const VlmRequest& request) {
  const auto res = post_json(endpoint_, "/generate", to_wire(request), timeout_);
  if (res.status != 200) {
    throw Error(ErrorCode::kVlmUnavailable,
                endpoint_ + " answered " +
                    (res.status == 0 ? res.error : "HTTP " + std::to_string(res.status)));
  }
  auto body = Json::parse(res.body, nullptr, false);
  if (body.is_discarded() || !body.contains("text") || !body["text"].is_string()) {
    throw Error(ErrorCode::kVlmUnavailable, "VLM response lacks a text field");
  }
  return {body["text"].get<std::string>(), res.first_byte};
}

TruthTable truth_table(std::span<const QASample> samples) {
  TruthTable table;
  for (const auto& s : samples) {
    table[s.sample_id] = {s.answer_index, s.options.size(), s.ground_truth, s.is_negative};
  }
  return table;
}

namespace {

Json interval_json(const IntervalSet& set) {
  Json arr = Json::array();
  for (const auto& iv : set) arr.push_back({{"start", iv.start}, {"end", iv.end}});
  return arr;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::string mock_vlm(const VlmRequest& request, const TruthTable& truth, const MockVlmConfig& cfg) {
  auto it = truth.find(request.sample_id);
  if (it == truth.end()) {
    return R"({"answer": null, "intervals": [], "summary": "No question to answer."})";
  }
  const Truth& t = it->second;
  std::mt19937_64 rng(stable_hash64(std::to_string(cfg.seed) + ":" + request.sample_id));
  const bool faithful = unit(rng) < cfg.fidelity;

  bool evidence = true;
  if (cfg.require_evidence && !t.negative && !t.intervals.empty()) {
    evidence = std::any_of(request.frames.begin(), request.frames.end(), [&](const VlmFrame& f) {
      return std::any_of(t.intervals.begin(), t.intervals.end(), [&](const TimeInterval& iv) {
        return f.timestamp >= iv.start && f.timestamp <= iv.end;
      });
    });
  }
  if (!evidence) {
    return R"({"answer": null, "intervals": [], "summary": "The frames do not show what was asked."})";
  }

  Json out;
  if (faithful) {
    out = {{"answer", std::string(1, option_letter(static_cast<std::size_t>(t.answer_index)))},
           {"intervals", interval_json(t.intervals)},
           {"summary", "Evidence found in the retrieved frames."}};
  } else {
    const auto others = t.option_count > 1 ? t.option_count - 1 : 1;
    auto pick = static_cast<std::size_t>(unit(rng) * static_cast<double>(others));
    if (pick >= others) pick = others - 1;
    if (static_cast<int>(pick) >= t.answer_index) ++pick;
    std::vector<TimeInterval> shifted;
    if (t.intervals.empty()) {
      const double s = unit(rng) * 60.0;
      shifted.push_back({s, s + 5.0});
    } else {
      const double len = std::max(1.0, t.intervals.hull().length());
      double offset = len + unit(rng) * 2.0 * len;
      if (unit(rng) < 0.5 && t.intervals.hull().start - offset >= 0.0) offset = -offset;
      for (const auto& iv : t.intervals) shifted.push_back({iv.start + offset, iv.end + offset});
    }
    out = {{"answer", std::string(1, option_letter(pick))},
           {"intervals", interval_json(canonicalize(shifted))},
           {"summary", "Evidence found in the retrieved frames."}};
  }
  return out.dump();
}

MockVlmBackend::MockVlmBackend(TruthTable truth, MockVlmConfig cfg)
    : truth_(std::move(truth)), cfg_(cfg) {}

VlmReply MockVlmBackend::generate(const VlmRequest& request) {
  return {mock_vlm(request, truth_, cfg_), std::chrono::microseconds(0)};
}

VlmReply DownVlmBackend::generate(const VlmRequest&) {
  throw Error(ErrorCode::kVlmUnavailable, "VLM backend is down");
}

VlmResponse answer(const VlmRequest& request, VlmBackend& backend, const VlmRetry& retry,
                   std::size_t option_count) {
  VlmResponse out;
  for (int attempt = 0;; ++attempt) {
    out.attempts = attempt + 1;
    try {
      auto reply = backend.generate(request);
      out.raw = std::move(reply.text);
      out.ttft = reply.ttft;
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kVlmUnavailable || attempt + 1 >= retry.attempts) throw;
    }
    std::this_thread::sleep_for(retry.base_delay * (1 << attempt));
  }
  out.parsed = parse_response(out.raw, option_count);
  return out;
}

Prediction to_prediction(const std::string& sample_id, const VlmResponse& response) {
  Prediction p;
  p.sample_id = sample_id;
  p.chosen_index = response.parsed.chosen_index;
  p.predicted_intervals = response.parsed.intervals;
  p.raw_response = response.raw;
  return p;
}

}  // namespace foresearch::orchestrator
