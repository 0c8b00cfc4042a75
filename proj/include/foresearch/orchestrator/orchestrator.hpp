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
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foresearch/core/json.hpp"
#include "foresearch/core/types.hpp"
#include "foresearch/imaging/frames.hpp"
#include "foresearch/vecindex/index.hpp"

namespace foresearch::orchestrator {

struct GroundingMode {
  bool crop = false;
  bool overlay = false;
  bool coords = true;
  std::size_t top_k = 3;
  std::int64_t frames_per_clip = 8;
  std::int64_t extra_uniform_frames = 0;
  // Sort all frames by timestamp instead of concatenating clips in rank order.
  bool chronological = false;

  // Throws InvalidArgument; crop and overlay are mutually exclusive.
  void validate() const;
  bool operator==(const GroundingMode&) const = default;
};

void to_json(Json& j, const GroundingMode& v);
void from_json(const Json& j, GroundingMode& v);

struct VlmFrame {
  double timestamp = 0.0;
  imaging::Image image;
  // 1-based retrieval rank of the source clip; 0 for uniform extra frames.
  std::size_t clip_rank = 0;
};

struct VlmRequest {
  std::string sample_id;
  std::string system_prompt;
  std::string user_text;
  std::optional<imaging::Image> query_image;
  std::vector<VlmFrame> frames;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kSystemPromptAsset = "vlm_system_v1";

// Builds the VLM input from at most mode.top_k hits. Throws MissingFrames when
// the provider cannot serve a clip frame.
VlmRequest assemble(std::span<const vecindex::SearchHit> hits, const Query& query,
                    const QASample* sample, const GroundingMode& mode,
                    const imaging::FrameProvider& frames);

// Wire body for POST {endpoint}/generate.
Json to_wire(const VlmRequest& request);
VlmRequest from_wire(const Json& body);

struct ParsedResponse {
  std::optional<int> chosen_index;
  IntervalSet intervals;
  std::string summary;
  bool from_json = false;
};

// First balanced JSON object carrying "answer" or "intervals" wins; otherwise
// regex fallbacks. Answer letters map to 0-based indices, integers are taken
// as 0-based indices. Indices outside [0, option_count) are dropped when
// option_count > 0. Never throws.
ParsedResponse parse_response(std::string_view raw, std::size_t option_count = 0);

struct VlmReply {
  std::string text;
  std::chrono::microseconds ttft{0};
};

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  // Throws VlmUnavailable.
  virtual VlmReply generate(const VlmRequest& request) = 0;
};

class HttpVlmBackend : public VlmBackend {
 public:
  HttpVlmBackend(std::string endpoint, std::chrono::milliseconds timeout);
  VlmReply generate(const VlmRequest& request) override;

 private:
  std::string endpoint_;
  std::chrono::milliseconds timeout_;
};

struct Truth {
  int answer_index = 0;
  std::size_t option_count = 4;
  IntervalSet intervals;
  bool negative = false;
};

using TruthTable = std::map<std::string, Truth>;

TruthTable truth_table(std::span<const QASample> samples);

struct MockVlmConfig {
  double fidelity = 1.0;
  std::uint64_t seed = 0;
  // A positive sample is only answered truthfully when some frame timestamp
  // falls inside its ground truth.
  bool require_evidence = true;
};

// Test backend. Each sample draws from its own stream keyed by (seed, sample_id):
// with probability fidelity it emits the truth, otherwise a uniformly chosen
// wrong option with the truth shifted by a uniform offset.
std::string mock_vlm(const VlmRequest& request, const TruthTable& truth, const MockVlmConfig& cfg);

class MockVlmBackend : public VlmBackend {
 public:
  MockVlmBackend(TruthTable truth, MockVlmConfig cfg);
  VlmReply generate(const VlmRequest& request) override;

 private:
  TruthTable truth_;
  MockVlmConfig cfg_;
};

// Always throws VlmUnavailable; stands in for an unreachable backend.
class DownVlmBackend : public VlmBackend {
 public:
  VlmReply generate(const VlmRequest& request) override;
};

struct VlmRetry {
  int attempts = 3;
  std::chrono::milliseconds base_delay{100};
};

struct VlmResponse {
  std::string raw;
  ParsedResponse parsed;
  std::chrono::microseconds ttft{0};
  int attempts = 0;
};

// Calls the backend, retrying VlmUnavailable with exponential backoff.
VlmResponse answer(const VlmRequest& request, VlmBackend& backend, const VlmRetry& retry = {},
                   std::size_t option_count = 0);

Prediction to_prediction(const std::string& sample_id, const VlmResponse& response);

}  // namespace foresearch::orchestrator
