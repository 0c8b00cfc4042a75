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

// Text and multimodal model clients used by the data engine. Every backend
// speaks the same JSON contract: POST <endpoint>/generate with
// {"prompt_id", "text", "images": [{"base64"}]} answered by {"text"}.

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "foresearch/core/error.hpp"
#include "foresearch/core/json.hpp"
#include "foresearch/imaging/image.hpp"

namespace foresearch::qaengine {

enum class ModelRole { kLlm, kLmm };

// LlmUnavailable or LmmUnavailable.
ErrorCode unavailable_code(ModelRole role);

struct ModelRequest {
  std::string prompt_id;
  std::string text;
  std::vector<imaging::Image> images;
};

Json to_wire(const ModelRequest& request);
ModelRequest request_from_wire(const Json& wire);

// Replay key: SHA-256 over prompt id, text and raw pixel content, so it does
// not depend on how images were encoded in transit.
std::string request_key(const ModelRequest& request);

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string complete(const ModelRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

class HttpModelClient : public ModelClient {
 public:
  HttpModelClient(ModelRole role, std::string endpoint, std::string model_id,
                  std::chrono::milliseconds timeout = std::chrono::seconds(60));
  std::string complete(const ModelRequest& request) override;
  std::string model_id() const override { return model_id_; }

 private:
  ModelRole role_;
  std::string endpoint_;
  std::string model_id_;
  std::chrono::milliseconds timeout_;
};

struct ReplayRecord {
  std::string key;
  std::string prompt_id;
  std::string model_id;
  std::string response;
};

void to_json(Json& j, const ReplayRecord& v);
void from_json(const Json& j, ReplayRecord& v);

// Answers from recorded request/response pairs; an unrecorded request is
// reported as the backend being unavailable.
class ReplayClient : public ModelClient {
 public:
  ReplayClient(ModelRole role, const std::vector<ReplayRecord>& records, std::string model_id);
  static ReplayClient from_file(ModelRole role, const std::filesystem::path& path);

  std::string complete(const ModelRequest& request) override;
  std::string model_id() const override { return model_id_; }

 private:
  ModelRole role_;
  std::map<std::string, std::string> responses_;
  std::string model_id_;
};

// Forwards to an inner client and keeps every exchange for later replay.
class RecordingClient : public ModelClient {
 public:
  explicit RecordingClient(std::shared_ptr<ModelClient> inner) : inner_(std::move(inner)) {}

  std::string complete(const ModelRequest& request) override;
  std::string model_id() const override { return inner_->model_id(); }

  // Sorted by key, one record per key.
  std::vector<ReplayRecord> records() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::shared_ptr<ModelClient> inner_;
  mutable std::mutex mu_;
  std::map<std::string, ReplayRecord> records_;
};

}  // namespace foresearch::qaengine
