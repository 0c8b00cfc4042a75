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

// HTTP front end binding ingestion, indexing, querying, evaluation and the
// data-engine review queue. JSON in, JSON out; images travel as base64.

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "foresearch/core/json.hpp"
#include "foresearch/encoder/gateway.hpp"
#include "foresearch/orchestrator/orchestrator.hpp"
#include "foresearch/qaengine/client.hpp"
#include "foresearch/tracklet/clips.hpp"
#include "foresearch/tracklet/tracker.hpp"

namespace foresearch::service {

struct VlmSettings {
  // "" disables answering, "mock://" uses the mock VLM over truth_file,
  // anything else is an HTTP base URL.
  std::string endpoint;
  std::chrono::milliseconds timeout{60000};
  std::filesystem::path truth_file;
  orchestrator::MockVlmConfig mock;
  orchestrator::VlmRetry retry;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path data_dir = "foresearch-data";
  std::filesystem::path index_path;  // defaults to <data_dir>/index.fsx
  encoder::EncoderProfile encoder;
  encoder::MockEncoderConfig mock_encoder;
  encoder::RetryPolicy encoder_retry;
  VlmSettings vlm;
  orchestrator::GroundingMode grounding;
  std::optional<std::string> auth_token;
  std::size_t ingest_workers = 2;
  std::size_t eval_workers = 2;
  std::size_t http_threads = 8;
  int job_attempts = 3;
  std::chrono::milliseconds job_backoff{200};
  // Data-engine output directory holding review_queue.jsonl and benchmark.jsonl.
  std::filesystem::path qa_dir;
  tracklet::TrackerConfig tracker;
  tracklet::ClipPolicy clips;

  // Throws InvalidArgument.
  void validate() const;
  std::filesystem::path resolved_index_path() const;
};

void to_json(Json& j, const ServiceConfig& v);
// Missing keys keep their defaults.
void from_json(const Json& j, ServiceConfig& v);

// The shipped OpenAPI 3 document.
const Json& openapi_document();

// Injection points for tests; null members are built from the config.
struct Backends {
  std::shared_ptr<encoder::EncoderBackend> encoder;
  std::shared_ptr<orchestrator::VlmBackend> vlm;
  std::ostream* log = nullptr;  // structured JSON-lines log; stderr when null
};

struct LocalResponse {
  int status = 0;
  std::string content_type;
  std::string body;

  Json json() const { return Json::parse(body, nullptr, false); }
};

class Service {
 public:
  explicit Service(ServiceConfig config, Backends backends = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread. Returns the bound port.
  int start();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  // Runs a request through the route table in-process, skipping auth. Works
  // without start(); the CLI uses it to mirror every endpoint on local files.
  LocalResponse invoke(const std::string& method, const std::string& path, const Json& body = nullptr);

  const ServiceConfig& config() const;
  // Finishes queued jobs; used by tests and graceful shutdown.
  void drain();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Stand-alone mock backends speaking the encoder, VLM and data-engine model
// contracts, for wiring a full stack on one machine.
class MockServer {
 public:
  // POST /encode backed by the in-process mock encoder.
  static std::unique_ptr<MockServer> encoder(encoder::MockEncoderConfig cfg);
  // POST /generate backed by the mock VLM.
  static std::unique_ptr<MockServer> vlm(orchestrator::TruthTable truth, orchestrator::MockVlmConfig cfg);
  // POST /generate with the data-engine request format, answered by a client.
  static std::unique_ptr<MockServer> model(std::shared_ptr<qaengine::ModelClient> client);

  ~MockServer();
  int start(const std::string& host, int port);
  void wait();
  void stop();

 private:
  MockServer();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace foresearch::service
