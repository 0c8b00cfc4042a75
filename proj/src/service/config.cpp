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

#include <map>
#include <regex>
#include <string_view>

#include "foresearch/core/error.hpp"
#include "foresearch/service/service.hpp"

namespace foresearch::service {

namespace {

bool well_formed_url(const std::string& url) {
  static const std::regex re(R"(^https?://[A-Za-z0-9.\-\[\]:]+(:[0-9]{1,5})?(/[^\s]*)?$)");
  return std::regex_match(url, re);
}

std::string motion_name(tracklet::Motion m) {
  return m == tracklet::Motion::kNone ? "none" : "constant_velocity";
}

tracklet::Motion parse_motion(const std::string& s) {
  if (s == "none") return tracklet::Motion::kNone;
  if (s == "constant_velocity") return tracklet::Motion::kConstantVelocity;
  throw Error(ErrorCode::kInvalidArgument, "unknown tracker motion '" + s + "'");
}

std::string assignment_name(tracklet::Assignment a) {
  return a == tracklet::Assignment::kGreedy ? "greedy" : "optimal";
}

tracklet::Assignment parse_assignment(const std::string& s) {
  if (s == "greedy") return tracklet::Assignment::kGreedy;
  if (s == "optimal") return tracklet::Assignment::kOptimal;
  throw Error(ErrorCode::kInvalidArgument, "unknown tracker assignment '" + s + "'");
}

template <typename T>
void take(const Json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

void take_ms(const Json& j, const char* key, std::chrono::milliseconds& out) {
  if (j.contains(key) && !j[key].is_null()) out = std::chrono::milliseconds(j[key].get<std::int64_t>());
}

}  // namespace

std::filesystem::path ServiceConfig::resolved_index_path() const {
  return index_path.empty() ? data_dir / "index.fsx" : index_path;
}

void ServiceConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidArgument, m); };
  if (host.empty()) bad("listen host is empty");
  if (port < 0 || port > 65535) bad("listen port out of range");
  if (data_dir.empty()) bad("data_dir is empty");
  encoder.validate();
  if (encoder.endpoint != "mock://" && !well_formed_url(encoder.endpoint)) {
    bad("encoder endpoint is not a well-formed URI: " + encoder.endpoint);
  }
  if (mock_encoder.dimension != encoder.dimension) bad("mock encoder dimension differs from profile");
  if (!vlm.endpoint.empty() && vlm.endpoint != "mock://" && !well_formed_url(vlm.endpoint)) {
    bad("vlm endpoint is not a well-formed URI: " + vlm.endpoint);
  }
  if (vlm.endpoint == "mock://" && vlm.truth_file.empty()) bad("mock VLM needs vlm.truth_file");
  grounding.validate();
  if (auth_token && auth_token->empty()) bad("auth token is empty");
  if (ingest_workers < 1 || eval_workers < 1 || http_threads < 1) bad("worker limits must be >= 1");
  if (job_attempts < 1) bad("job attempts must be >= 1");
  if (job_backoff.count() < 0) bad("job backoff must be >= 0");
  tracker.validate();
  clips.validate();
  // The index path must be writable: its directory has to exist or be creatable.
  const auto parent = resolved_index_path().parent_path();
  std::error_code ec;
  if (!parent.empty()) {
    std::filesystem::create_directories(parent, ec);
    if (ec) bad("index directory is not writable: " + parent.string());
  }
  const auto idx = resolved_index_path();
  if (std::filesystem::exists(idx) && std::filesystem::is_directory(idx)) {
    bad("index path is a directory: " + idx.string());
  }
}

void to_json(Json& j, const ServiceConfig& v) {
  j = Json{
      {"listen", {{"host", v.host}, {"port", v.port}}},
      {"data_dir", v.data_dir.string()},
      {"index_path", v.index_path.string()},
      {"encoder",
       {{"endpoint", v.encoder.endpoint},
        {"dimension", v.encoder.dimension},
        {"frame_budget", v.encoder.frame_budget},
        {"timeout_ms", v.encoder.timeout.count()},
        {"max_in_flight", v.encoder.max_in_flight},
        {"vocabulary", v.mock_encoder.vocabulary},
        {"seed", v.mock_encoder.seed},
        {"sigma", v.mock_encoder.sigma},
        {"retry", {{"attempts", v.encoder_retry.attempts},
                   {"base_delay_ms", v.encoder_retry.base_delay.count()}}}}},
      {"vlm",
       {{"endpoint", v.vlm.endpoint},
        {"timeout_ms", v.vlm.timeout.count()},
        {"truth_file", v.vlm.truth_file.string()},
        {"fidelity", v.vlm.mock.fidelity},
        {"seed", v.vlm.mock.seed},
        {"retry", {{"attempts", v.vlm.retry.attempts},
                   {"base_delay_ms", v.vlm.retry.base_delay.count()}}}}},
      {"grounding", v.grounding},
      {"auth_token", v.auth_token ? Json(*v.auth_token) : Json(nullptr)},
      {"workers", {{"ingest", v.ingest_workers}, {"eval", v.eval_workers}, {"http", v.http_threads}}},
      {"jobs", {{"attempts", v.job_attempts}, {"backoff_ms", v.job_backoff.count()}}},
      {"qa_dir", v.qa_dir.string()},
      {"tracker",
       {{"iou_gate", v.tracker.iou_gate},
        {"high_score", v.tracker.high_score},
        {"low_score", v.tracker.low_score},
        {"max_gap_frames", v.tracker.max_gap_frames},
        {"min_track_len", v.tracker.min_track_len},
        {"motion", motion_name(v.tracker.motion)},
        {"assignment", assignment_name(v.tracker.assignment)}}},
      {"clips",
       {{"split_gap_seconds", v.clips.split_gap_seconds},
        {"max_clip_seconds", v.clips.max_clip_seconds},
        {"mode", clip_mode_name(v.clips.mode)},
        {"full_frame_window_seconds", v.clips.full_frame_window_seconds},
        {"full_frame_fps", v.clips.full_frame_fps}}},
  };
}

void from_json(const Json& j, ServiceConfig& v) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "service config must be an object");
  try {
    if (j.contains("listen")) {
      const auto& l = j["listen"];
      take(l, "host", v.host);
      take(l, "port", v.port);
    }
    if (j.contains("data_dir")) v.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("index_path")) v.index_path = j["index_path"].get<std::string>();
    if (j.contains("encoder")) {
      const auto& e = j["encoder"];
      take(e, "endpoint", v.encoder.endpoint);
      take(e, "dimension", v.encoder.dimension);
      take(e, "frame_budget", v.encoder.frame_budget);
      take_ms(e, "timeout_ms", v.encoder.timeout);
      take(e, "max_in_flight", v.encoder.max_in_flight);
      take(e, "vocabulary", v.mock_encoder.vocabulary);
      take(e, "seed", v.mock_encoder.seed);
      take(e, "sigma", v.mock_encoder.sigma);
      if (e.contains("retry")) {
        take(e["retry"], "attempts", v.encoder_retry.attempts);
        take_ms(e["retry"], "base_delay_ms", v.encoder_retry.base_delay);
      }
    }
    v.mock_encoder.dimension = v.encoder.dimension;
    if (j.contains("vlm")) {
      const auto& m = j["vlm"];
      take(m, "endpoint", v.vlm.endpoint);
      take_ms(m, "timeout_ms", v.vlm.timeout);
      if (m.contains("truth_file")) v.vlm.truth_file = m["truth_file"].get<std::string>();
      take(m, "fidelity", v.vlm.mock.fidelity);
      take(m, "seed", v.vlm.mock.seed);
      if (m.contains("retry")) {
        take(m["retry"], "attempts", v.vlm.retry.attempts);
        take_ms(m["retry"], "base_delay_ms", v.vlm.retry.base_delay);
      }
    }
    take(j, "grounding", v.grounding);
    if (j.contains("auth_token")) {
      v.auth_token = j["auth_token"].is_null() ? std::nullopt
                                               : std::optional(j["auth_token"].get<std::string>());
    }
    if (j.contains("workers")) {
      take(j["workers"], "ingest", v.ingest_workers);
      take(j["workers"], "eval", v.eval_workers);
      take(j["workers"], "http", v.http_threads);
    }
    if (j.contains("jobs")) {
      take(j["jobs"], "attempts", v.job_attempts);
      take_ms(j["jobs"], "backoff_ms", v.job_backoff);
    }
    if (j.contains("qa_dir")) v.qa_dir = j["qa_dir"].get<std::string>();
    if (j.contains("tracker")) {
      const auto& t = j["tracker"];
      take(t, "iou_gate", v.tracker.iou_gate);
      take(t, "high_score", v.tracker.high_score);
      take(t, "low_score", v.tracker.low_score);
      take(t, "max_gap_frames", v.tracker.max_gap_frames);
      take(t, "min_track_len", v.tracker.min_track_len);
      if (t.contains("motion")) v.tracker.motion = parse_motion(t["motion"].get<std::string>());
      if (t.contains("assignment")) {
        v.tracker.assignment = parse_assignment(t["assignment"].get<std::string>());
      }
    }
    if (j.contains("clips")) {
      const auto& c = j["clips"];
      take(c, "split_gap_seconds", v.clips.split_gap_seconds);
      take(c, "max_clip_seconds", v.clips.max_clip_seconds);
      if (c.contains("mode")) v.clips.mode = parse_clip_mode(c["mode"].get<std::string>());
      take(c, "full_frame_window_seconds", v.clips.full_frame_window_seconds);
      take(c, "full_frame_fps", v.clips.full_frame_fps);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad service config: ") + e.what());
  }
}

}  // namespace foresearch::service

namespace foresearch::detail {
const std::map<std::string, std::string_view, std::less<>>& service_assets();
}  // namespace foresearch::detail

namespace foresearch::service {

const Json& openapi_document() {
  static const Json doc = Json::parse(detail::service_assets().at("openapi"));
  return doc;
}

}  // namespace foresearch::service
