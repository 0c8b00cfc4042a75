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

#include "foresearch/core/json.hpp"

#include <fstream>
#include <sstream>

#include "foresearch/core/digest.hpp"
#include "foresearch/core/error.hpp"

namespace foresearch {

void to_json(Json& j, const TimeInterval& v) { j = Json{{"start", v.start}, {"end", v.end}}; }

void from_json(const Json& j, TimeInterval& v) {
  v = make_interval(j.at("start").get<double>(), j.at("end").get<double>());
}

void to_json(Json& j, const IntervalSet& v) {
  j = Json::array();
  for (const auto& i : v) j.push_back(i);
}

void from_json(const Json& j, IntervalSet& v) {
  v = IntervalSet(j.get<std::vector<TimeInterval>>());
}

void to_json(Json& j, const BBox& v) { j = Json{{"x", v.x}, {"y", v.y}, {"w", v.w}, {"h", v.h}}; }

void from_json(const Json& j, BBox& v) {
  v = BBox{j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
           j.at("h").get<double>()};
  validate(v);
}

void to_json(Json& j, const Detection& v) {
  j = Json{{"video_id", v.video_id}, {"frame_index", v.frame_index},
           {"timestamp", v.timestamp}, {"box", v.box},
           {"score", v.score},       {"class_label", v.class_label}};
}

void from_json(const Json& j, Detection& v) {
  v.video_id = j.at("video_id").get<std::string>();
  v.frame_index = j.at("frame_index").get<std::int64_t>();
  v.timestamp = j.at("timestamp").get<double>();
  v.box = j.at("box").get<BBox>();
  v.score = j.at("score").get<double>();
  v.class_label = j.value("class_label", std::string("person"));
  if (v.frame_index < 0 || v.timestamp < 0.0 || v.score < 0.0 || v.score > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "detection fields out of range");
  }
}

void to_json(Json& j, const Observation& v) {
  j = Json{{"frame_index", v.frame_index}, {"timestamp", v.timestamp}, {"box", v.box}};
}

void from_json(const Json& j, Observation& v) {
  v.frame_index = j.at("frame_index").get<std::int64_t>();
  v.timestamp = j.at("timestamp").get<double>();
  v.box = j.at("box").get<BBox>();
}

void to_json(Json& j, const Track& v) {
  j = Json{{"track_id", v.track_id}, {"video_id", v.video_id},
           {"observations", v.observations}};
}

void from_json(const Json& j, Track& v) {
  v.track_id = j.at("track_id").get<std::string>();
  v.video_id = j.at("video_id").get<std::string>();
  v.observations = j.at("observations").get<std::vector<Observation>>();
}

void to_json(Json& j, const FrameBox& v) {
  j = Json{{"frame_index", v.frame_index}, {"box", v.box}};
}

void from_json(const Json& j, FrameBox& v) {
  v.frame_index = j.at("frame_index").get<std::int64_t>();
  v.box = j.at("box").get<BBox>();
}

std::string_view clip_mode_name(ClipMode mode) {
  return mode == ClipMode::kPersonCentric ? "person_centric" : "full_frame";
}

ClipMode parse_clip_mode(std::string_view name) {
  if (name == "person_centric") return ClipMode::kPersonCentric;
  if (name == "full_frame") return ClipMode::kFullFrame;
  throw Error(ErrorCode::kInvalidArgument, "unknown clip mode '" + std::string(name) + "'");
}

void to_json(Json& j, const Clip& v) {
  j = Json{{"clip_id", v.clip_id},
           {"camera_id", v.camera_id},
           {"video_id", v.video_id},
           {"span", v.span},
           {"boxes", v.boxes},
           {"frame_indices", v.frame_indices},
           {"mode", clip_mode_name(v.mode)},
           {"frame_count", v.frame_count}};
}

void from_json(const Json& j, Clip& v) {
  v.clip_id = j.at("clip_id").get<std::string>();
  v.camera_id = j.at("camera_id").get<std::string>();
  v.video_id = j.at("video_id").get<std::string>();
  v.span = j.at("span").get<TimeInterval>();
  v.boxes = j.value("boxes", std::vector<FrameBox>{});
  v.frame_indices = j.value("frame_indices", std::vector<std::int64_t>{});
  v.mode = parse_clip_mode(j.at("mode").get<std::string>());
  v.frame_count = j.at("frame_count").get<std::int64_t>();
  if (v.frame_indices.empty()) {
    for (const auto& fb : v.boxes) v.frame_indices.push_back(fb.frame_index);
  }
  validate(v);
}

void to_json(Json& j, const EmbeddingRecord& v) {
  j = Json{{"clip_id", v.clip_id}, {"vector", v.vector}, {"norm", v.norm}};
}

void from_json(const Json& j, EmbeddingRecord& v) {
  v.clip_id = j.at("clip_id").get<std::string>();
  v.vector = j.at("vector").get<std::vector<float>>();
  v.norm = j.value("norm", 1.0);
}

void to_json(Json& j, const ImageRef& v) {
  j = Json::object();
  if (!v.uri.empty()) j["uri"] = v.uri;
  if (!v.bytes.empty()) j["base64"] = base64_encode(v.bytes);
}

void from_json(const Json& j, ImageRef& v) {
  if (j.is_string()) {
    v.uri = j.get<std::string>();
    return;
  }
  v.uri = j.value("uri", std::string());
  if (j.contains("base64")) v.bytes = base64_decode(j.at("base64").get<std::string>());
}

void to_json(Json& j, const Query& v) {
  j = Json{{"text", v.text},
           {"image", v.image ? Json(*v.image) : Json(nullptr)},
           {"modality", v.modality() == Modality::kTextOnly ? "text_only" : "image_text"}};
}

void from_json(const Json& j, Query& v) {
  v.text = j.at("text").get<std::string>();
  v.image.reset();
  if (j.contains("image") && !j.at("image").is_null()) v.image = j.at("image").get<ImageRef>();
  if (j.contains("modality")) {
    const auto m = j.at("modality").get<std::string>();
    const bool image_text = m == "image_text";
    if (!image_text && m != "text_only") {
      throw Error(ErrorCode::kInvalidArgument, "unknown modality '" + m + "'");
    }
    if (image_text != v.image.has_value()) {
      throw Error(ErrorCode::kInvalidQuery, "modality disagrees with image presence");
    }
  }
}

void to_json(Json& j, const QASample& v) {
  j = Json{{"sample_id", v.sample_id},
           {"video_id", v.video_id},
           {"subtask", subtask_name(v.subtask)},
           {"query", v.query},
           {"options", v.options},
           {"answer_index", v.answer_index},
           {"ground_truth", v.ground_truth},
           {"is_negative", v.is_negative}};
}

void from_json(const Json& j, QASample& v) {
  v.sample_id = j.at("sample_id").get<std::string>();
  v.video_id = j.at("video_id").get<std::string>();
  v.subtask = parse_subtask(j.at("subtask").get<std::string>());
  v.query = j.at("query").get<Query>();
  v.options = j.at("options").get<std::vector<std::string>>();
  v.answer_index = j.at("answer_index").get<int>();
  v.ground_truth = j.value("ground_truth", IntervalSet{});
  v.is_negative = j.value("is_negative", false);
}

void to_json(Json& j, const Prediction& v) {
  j = Json{{"sample_id", v.sample_id},
           {"chosen_index", v.chosen_index ? Json(*v.chosen_index) : Json(nullptr)},
           {"predicted_intervals", v.predicted_intervals},
           {"raw_response", v.raw_response}};
}

void from_json(const Json& j, Prediction& v) {
  v.sample_id = j.at("sample_id").get<std::string>();
  v.chosen_index.reset();
  if (j.contains("chosen_index") && !j.at("chosen_index").is_null()) {
    v.chosen_index = j.at("chosen_index").get<int>();
  }
  v.predicted_intervals = j.value("predicted_intervals", IntervalSet{});
  v.raw_response = j.value("raw_response", std::string());
}

std::vector<Json> parse_jsonl(std::string_view text) {
  std::vector<Json> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        rows.push_back(Json::parse(line));
      } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::kInvalidArgument,
                    "line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return rows;
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  return parse_jsonl(read_file(path));
}

std::string dump_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump();
    out += '\n';
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  write_file(path, dump_jsonl(rows));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace foresearch
