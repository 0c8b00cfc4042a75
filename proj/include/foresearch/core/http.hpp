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

#include <chrono>
#include <string>

#include "foresearch/core/json.hpp"

namespace foresearch {

struct HttpResult {
  int status = 0;  // 0 when the request never got a response
  std::string body;
  std::string error;
  // Time from sending the request until the response headers arrived.
  std::chrono::microseconds first_byte{0};
};

// POSTs a JSON body to <base_url><path>. base_url may carry a path prefix,
// e.g. "http://127.0.0.1:8080/models/vista". Never throws on transport errors.
HttpResult post_json(const std::string& base_url, const std::string& path, const Json& body,
                     std::chrono::milliseconds timeout,
                     const std::string& bearer_token = {});

}  // namespace foresearch
