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

#include <httplib.h>

#include <thread>

#include "foresearch/core/error.hpp"
#include "foresearch/service/service.hpp"

namespace foresearch::service {

struct MockServer::Impl {
  httplib::Server server;
  std::thread thread;
};

MockServer::MockServer() : impl_(std::make_unique<Impl>()) {}

MockServer::~MockServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

namespace {

using Fn = std::function<Json(const Json&)>;

void serve_json(httplib::Server& server, const std::string& path, Fn fn) {
  server.Post(path, [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    auto body = Json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      res.status = 400;
      res.set_content(R"({"error":"invalid JSON"})", "application/json");
      return;
    }
    try {
      res.set_content(fn(body).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

}  // namespace

std::unique_ptr<MockServer> MockServer::encoder(encoder::MockEncoderConfig cfg) {
  std::unique_ptr<MockServer> s(new MockServer());
  auto backend = std::make_shared<encoder::MockEncoderBackend>(std::move(cfg));
  serve_json(s->impl_->server, "/encode", [backend](const Json& body) {
    return Json{{"vector", backend->encode(encoder::from_wire(body))}};
  });
  return s;
}

std::unique_ptr<MockServer> MockServer::vlm(orchestrator::TruthTable truth, orchestrator::MockVlmConfig cfg) {
  std::unique_ptr<MockServer> s(new MockServer());
  auto table = std::make_shared<orchestrator::TruthTable>(std::move(truth));
  serve_json(s->impl_->server, "/generate", [table, cfg](const Json& body) {
    return Json{{"text", orchestrator::mock_vlm(orchestrator::from_wire(body), *table, cfg)}};
  });
  return s;
}

std::unique_ptr<MockServer> MockServer::model(std::shared_ptr<qaengine::ModelClient> client) {
  std::unique_ptr<MockServer> s(new MockServer());
  auto mu = std::make_shared<std::mutex>();
  serve_json(s->impl_->server, "/generate", [client, mu](const Json& body) {
    const auto request = qaengine::request_from_wire(body);
    std::lock_guard lock(*mu);
    return Json{{"text", client->complete(request)}};
  });
  return s;
}

int MockServer::start(const std::string& host, int port) {
  auto& server = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
  } else if (!server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return bound;
}

void MockServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockServer::stop() { impl_->server.stop(); }

}  // namespace foresearch::service
