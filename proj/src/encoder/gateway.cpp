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

#include "foresearch/encoder/gateway.hpp"

#include <cmath>
#include <thread>

#include "foresearch/core/digest.hpp"
#include "foresearch/core/error.hpp"
#include "foresearch/core/http.hpp"
#include "foresearch/encoder/sampling.hpp"

namespace foresearch::encoder {

void EncoderProfile::validate() const {
  if (dimension < 8) throw Error(ErrorCode::kInvalidArgument, "encoder dimension must be >= 8");
  if (frame_budget < 1) throw Error(ErrorCode::kInvalidArgument, "frame budget must be >= 1");
  if (max_in_flight < 1) throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be >= 1");
  if (endpoint.empty()) throw Error(ErrorCode::kInvalidArgument, "encoder endpoint is empty");
}

std::string_view request_kind_name(RequestKind kind) {
  switch (kind) {
    case RequestKind::kClip: return "clip";
    case RequestKind::kTextQuery: return "text_query";
    case RequestKind::kImageTextQuery: return "image_text_query";
  }
  return "?";
}

void EncodeRequest::validate() const {
  switch (kind) {
    case RequestKind::kClip:
      if (frames.empty() || text) {
        throw Error(ErrorCode::kInvalidArgument, "clip requests carry frames and no text");
      }
      break;
    case RequestKind::kTextQuery:
      if (!frames.empty() || !text || text->empty()) {
        throw Error(ErrorCode::kInvalidQuery, "text queries carry text only");
      }
      break;
    case RequestKind::kImageTextQuery:
      if (frames.size() != 1 || !text || text->empty()) {
        throw Error(ErrorCode::kInvalidQuery, "image+text queries carry one image and text");
      }
      break;
  }
  if (!crop_boxes.empty() && crop_boxes.size() != frames.size()) {
    throw Error(ErrorCode::kInvalidArgument, "crop_boxes must align with frames");
  }
}

Json to_wire(const EncodeRequest& request) {
  Json frames = Json::array();
  for (const auto& f : request.frames) frames.push_back(base64_encode(imaging::encode(f)));
  return Json{{"kind", request_kind_name(request.kind)},
              {"frames", frames},
              {"text", request.text ? Json(*request.text) : Json(nullptr)},
              {"crop_boxes", request.crop_boxes}};
}

EncodeRequest from_wire(const Json& body) {
  EncodeRequest req;
  const auto kind = body.at("kind").get<std::string>();
  if (kind == "clip") {
    req.kind = RequestKind::kClip;
  } else if (kind == "text_query") {
    req.kind = RequestKind::kTextQuery;
  } else if (kind == "image_text_query") {
    req.kind = RequestKind::kImageTextQuery;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown request kind '" + kind + "'");
  }
  for (const auto& f : body.value("frames", Json::array())) {
    req.frames.push_back(imaging::decode(base64_decode(f.get<std::string>())));
  }
  if (body.contains("text") && !body.at("text").is_null()) req.text = body.at("text").get<std::string>();
  req.crop_boxes = body.value("crop_boxes", std::vector<BBox>{});
  req.validate();
  return req;
}

MockEncoderBackend::MockEncoderBackend(MockEncoderConfig config)
    : config_(std::move(config)), palette_(config_.vocabulary) {}

std::set<std::string> MockEncoderBackend::labels_of(const EncodeRequest& request) const {
  std::set<std::string> labels;
  for (std::size_t i = 0; i < request.frames.size(); ++i) {
    const auto& frame = request.frames[i];
    const auto found = request.crop_boxes.empty()
                           ? palette_.labels_in(frame, config_.min_label_fraction)
                           : palette_.labels_in(imaging::crop(frame, request.crop_boxes[i]),
                                                config_.min_label_fraction);
    labels.insert(found.begin(), found.end());
  }
  if (request.text) {
    const auto words = palette_.labels_in(*request.text);
    labels.insert(words.begin(), words.end());
  }
  if (labels.empty()) {
    labels.insert(request.text ? "<text>" + *request.text : std::string("<background>"));
  }
  return labels;
}

std::vector<float> MockEncoderBackend::encode(const EncodeRequest& request) {
  request.validate();
  std::uint64_t noise_key = 0;
  if (config_.sigma > 0.0) {
    std::string content(request_kind_name(request.kind));
    content += request.text.value_or("");
    for (const auto& f : request.frames) {
      content.append(reinterpret_cast<const char*>(f.data().data()), f.data().size());
    }
    noise_key = stable_hash64(content);
  }
  return mock_encode(labels_of(request), config_.seed, config_.dimension, config_.sigma,
                     noise_key);
}

HttpEncoderBackend::HttpEncoderBackend(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

std::vector<float> HttpEncoderBackend::encode(const EncodeRequest& request) {
  const auto res = post_json(endpoint_, "/encode", to_wire(request), timeout_);
  if (res.status != 200) {
    throw Error(ErrorCode::kEncoderUnavailable,
                endpoint_ + " answered " +
                    (res.status == 0 ? res.error : "HTTP " + std::to_string(res.status)));
  }
  try {
    return Json::parse(res.body).at("vector").get<std::vector<float>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kEncoderUnavailable, std::string("bad encoder response: ") + e.what());
  }
}

double l2_normalize(std::vector<float>& v) {
  double n = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidArgument, "non-finite embedding value");
    n += static_cast<double>(x) * x;
  }
  n = std::sqrt(n);
  if (n == 0.0) throw Error(ErrorCode::kInvalidArgument, "zero embedding vector");
  for (float& x : v) x = static_cast<float>(x / n);
  return n;
}

EncoderGateway::EncoderGateway(std::shared_ptr<EncoderBackend> backend, EncoderProfile profile,
                               RetryPolicy retry)
    : backend_(std::move(backend)),
      profile_(std::move(profile)),
      retry_(retry),
      slots_(static_cast<std::ptrdiff_t>(profile_.max_in_flight)) {
  profile_.validate();
  if (!backend_) throw Error(ErrorCode::kInvalidArgument, "encoder backend is null");
}

std::vector<float> EncoderGateway::encode(const EncodeRequest& request, double* raw_norm) const {
  request.validate();
  std::vector<float> v;
  for (int attempt = 0;; ++attempt) {
    slots_.acquire();
    const auto now = ++in_flight_;
    auto peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    try {
      v = backend_->encode(request);
      --in_flight_;
      slots_.release();
      break;
    } catch (const Error& e) {
      --in_flight_;
      slots_.release();
      if (e.code() != ErrorCode::kEncoderUnavailable || attempt + 1 >= retry_.attempts) throw;
    } catch (...) {
      --in_flight_;
      slots_.release();
      throw;
    }
    std::this_thread::sleep_for(retry_.base_delay * (1 << attempt));
  }
  if (v.size() != profile_.dimension) {
    throw Error(ErrorCode::kDimensionMismatch,
                "encoder returned " + std::to_string(v.size()) + " values, expected " +
                    std::to_string(profile_.dimension));
  }
  const double n = l2_normalize(v);
  if (raw_norm) *raw_norm = n;
  return v;
}

EncodeRequest EncoderGateway::clip_request(const Clip& clip,
                                           const imaging::FrameProvider& frames) const {
  const auto& refs = clip.frame_indices;
  if (refs.empty()) throw Error(ErrorCode::kMissingFrames, clip.clip_id + " has no frames");
  EncodeRequest req;
  req.kind = RequestKind::kClip;
  const bool crop = clip.mode == ClipMode::kPersonCentric && clip.boxes.size() == refs.size();
  for (auto pick : sample_frames(static_cast<std::int64_t>(refs.size()), profile_.frame_budget)) {
    const auto idx = static_cast<std::size_t>(pick);
    auto image = frames.frame(clip.video_id, refs[idx]);
    req.frames.push_back(crop ? imaging::crop(image, clip.boxes[idx].box) : std::move(image));
  }
  return req;
}

EmbeddingRecord EncoderGateway::embed_clip(const Clip& clip,
                                           const imaging::FrameProvider& frames) const {
  EmbeddingRecord rec;
  rec.clip_id = clip.clip_id;
  rec.vector = encode(clip_request(clip, frames), &rec.norm);
  return rec;
}

std::vector<float> EncoderGateway::embed_query(const Query& query) const {
  validate(query);
  EncodeRequest req;
  req.text = query.text;
  if (query.image) {
    req.kind = RequestKind::kImageTextQuery;
    req.frames.push_back(imaging::load(*query.image));
  } else {
    req.kind = RequestKind::kTextQuery;
  }
  return encode(req);
}

std::shared_ptr<EncoderBackend> make_encoder_backend(const EncoderProfile& profile,
                                                     const MockEncoderConfig& mock) {
  if (profile.endpoint.rfind("mock://", 0) == 0) {
    auto cfg = mock;
    cfg.dimension = profile.dimension;
    return std::make_shared<MockEncoderBackend>(cfg);
  }
  return std::make_shared<HttpEncoderBackend>(profile.endpoint, profile.timeout);
}

}  // namespace foresearch::encoder
