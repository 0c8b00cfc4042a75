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

#include "foresearch/qaengine/client.hpp"

#include <fstream>

#include "foresearch/core/digest.hpp"
#include "foresearch/core/http.hpp"

namespace foresearch::qaengine {

ErrorCode unavailable_code(ModelRole role) {
  return role == ModelRole::kLlm ? ErrorCode::kLlmUnavailable : ErrorCode::kLmmUnavailable;
}

Json to_wire(const ModelRequest& request) {
  Json images = Json::array();
  for (const auto& img : request.images) {
    images.push_back({{"base64", base64_encode(imaging::encode(img))}});
  }
  return {{"prompt_id", request.prompt_id}, {"text", request.text}, {"images", images}};
}

ModelRequest request_from_wire(const Json& wire) {
  ModelRequest r;
  r.prompt_id = wire.value("prompt_id", std::string());
  r.text = wire.at("text").get<std::string>();
  if (wire.contains("images")) {
    for (const auto& img : wire.at("images")) {
      r.images.push_back(imaging::decode(base64_decode(img.at("base64").get<std::string>())));
    }
  }
  return r;
}

std::string request_key(const ModelRequest& request) {
  std::string buf;
  buf += request.prompt_id;
  buf += '\0';
  buf += std::to_string(request.text.size());
  buf += ':';
  buf += request.text;
  for (const auto& img : request.images) {
    buf += '\0';
    buf += std::to_string(img.width()) + "x" + std::to_string(img.height()) + ":";
    buf.append(reinterpret_cast<const char*>(img.data().data()), img.data().size());
  }
  return sha256_hex(buf);
}

HttpModelClient::HttpModelClient(ModelRole role, std::string endpoint, std::string model_id,
                                 std::chrono::milliseconds timeout)
    : role_(role), endpoint_(std::move(endpoint)), model_id_(std::move(model_id)), timeout_(timeout) {}

std::string HttpModelClient::complete(const ModelRequest& request) {
  const auto res = post_json(endpoint_, "/generate", to_wire(request), timeout_);
  if (res.status != 200) {
    throw Error(unavailable_code(role_),
                endpoint_ + " answered " +
                    (res.status == 0 ? res.error : "HTTP " + std::to_string(res.status)));
  }
  const auto body = Json::parse(res.body, nullptr, false);
  if (body.is_discarded() || !body.contains("text") || !body["text"].is_string()) {
    throw Error(unavailable_code(role_), "model response lacks a text field");
  }
  return body["text"].get<std::string>();
}

void to_json(Json& j, const ReplayRecord& v) {
  j = Json{{"key", v.key}, {"prompt_id", v.prompt_id}, {"model_id", v.model_id}, {"response", v.response}};
}

void from_json(const Json& j, ReplayRecord& v) {
  v.key = j.at("key").get<std::string>();
  v.prompt_id = j.value("prompt_id", std::string());
  v.model_id = j.value("model_id", std::string());
  v.response = j.at("response").get<std::string>();
}

ReplayClient::ReplayClient(ModelRole role, const std::vector<ReplayRecord>& records,
                           std::string model_id)
    : role_(role), model_id_(std::move(model_id)) {
  for (const auto& r : records) responses_[r.key] = r.response;
}

ReplayClient ReplayClient::from_file(ModelRole role, const std::filesystem::path& path) {
  const auto records = read_jsonl_as<ReplayRecord>(path);
  std::string model = "replay";
  if (!records.empty() && !records.front().model_id.empty()) model = records.front().model_id;
  return ReplayClient(role, records, model);
}

std::string ReplayClient::complete(const ModelRequest& request) {
  const auto key = request_key(request);
  const auto it = responses_.find(key);
  if (it == responses_.end()) {
    throw Error(unavailable_code(role_), "no recorded response for " + request.prompt_id + " " + key);
  }
  return it->second;
}

std::string RecordingClient::complete(const ModelRequest& request) {
  auto response = inner_->complete(request);
  std::lock_guard lock(mu_);
  records_[request_key(request)] = {request_key(request), request.prompt_id, inner_->model_id(), response};
  return response;
}

std::vector<ReplayRecord> RecordingClient::records() const {
  std::lock_guard lock(mu_);
  std::vector<ReplayRecord> out;
  for (const auto& [k, r] : records_) out.push_back(r);
  return out;
}

void RecordingClient::save(const std::filesystem::path& path) const {
  write_jsonl_of(path, records());
}

}  // namespace foresearch::qaengine
