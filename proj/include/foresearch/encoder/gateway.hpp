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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "foresearch/core/json.hpp"
#include "foresearch/core/types.hpp"
#include "foresearch/encoder/mock.hpp"
#include "foresearch/imaging/frames.hpp"

namespace foresearch::encoder {

struct EncoderProfile {
  // "mock://" selects the in-process mock; otherwise an http(s) base URL.
  std::string endpoint = "mock://";
  std::size_t dimension = 512;
  std::int64_t frame_budget = 16;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_in_flight = 4;

  void validate() const;
};

enum class RequestKind { kClip, kTextQuery, kImageTextQuery };

std::string_view request_kind_name(RequestKind kind);

struct EncodeRequest {
  RequestKind kind = RequestKind::kClip;
  std::vector<imaging::Image> frames;
  std::optional<std::string> text;
  // Optional per-frame crop applied by the receiver; empty when frames are pre-cropped.
  std::vector<BBox> crop_boxes;

  void validate() const;
};

// Wire form: {"kind", "frames": [base64 PNG], "text", "crop_boxes"}.
Json to_wire(const EncodeRequest& request);
EncodeRequest from_wire(const Json& body);

class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  // Raw (not necessarily normalised) vector. Throws EncoderUnavailable.
  virtual std::vector<float> encode(const EncodeRequest& request) = 0;
};

struct MockEncoderConfig {
  std::set<std::string> vocabulary;
  std::uint64_t seed = 0;
  std::size_t dimension = 512;
  double sigma = 0.0;
  double min_label_fraction = 0.01;
};

// Labels come from palette colours in frames and vocabulary words in text.
// Inputs with no recognised label fall back to a label derived from the raw
// text (or "<background>" for images) so every request gets a stable vector.
class MockEncoderBackend : public EncoderBackend {
 public:
  explicit MockEncoderBackend(MockEncoderConfig config);

  std::vector<float> encode(const EncodeRequest& request) override;
  std::set<std::string> labels_of(const EncodeRequest& request) const;
  const Palette& palette() const { return palette_; }
  const MockEncoderConfig& config() const { return config_; }

 private:
  MockEncoderConfig config_;
  Palette palette_;
};

// POST {endpoint}/encode; non-200 or transport failure -> EncoderUnavailable.
class HttpEncoderBackend : public EncoderBackend {
 public:
  HttpEncoderBackend(std::string endpoint, std::chrono::milliseconds timeout);
  std::vector<float> encode(const EncodeRequest& request) override;

 private:
  std::string endpoint_;
  std::chrono::milliseconds timeout_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{100};
};

// Thread-safe client over an encoder backend: samples and crops clip frames,
// bounds concurrent requests, retries unavailable backends with exponential
// backoff, checks the dimension and L2-normalises every returned vector.
class EncoderGateway {
 public:
  EncoderGateway(std::shared_ptr<EncoderBackend> backend, EncoderProfile profile,
                 RetryPolicy retry = {});

  EmbeddingRecord embed_clip(const Clip& clip, const imaging::FrameProvider& frames) const;
  std::vector<float> embed_query(const Query& query) const;

  // Builds the request embed_clip would send, without sending it.
  EncodeRequest clip_request(const Clip& clip, const imaging::FrameProvider& frames) const;
  std::vector<float> encode(const EncodeRequest& request, double* raw_norm = nullptr) const;

  const EncoderProfile& profile() const { return profile_; }
  std::size_t peak_in_flight() const { return peak_.load(); }

 private:
  std::shared_ptr<EncoderBackend> backend_;
  EncoderProfile profile_;
  RetryPolicy retry_;
  mutable std::counting_semaphore<> slots_;
  mutable std::atomic<std::size_t> in_flight_{0};
  mutable std::atomic<std::size_t> peak_{0};
};

// Factory for the endpoint forms accepted by EncoderProfile.
std::shared_ptr<EncoderBackend> make_encoder_backend(const EncoderProfile& profile,
                                                     const MockEncoderConfig& mock = {});

// In-place L2 normalisation; returns the original norm. Throws on zero or non-finite input.
double l2_normalize(std::vector<float>& v);

}  // namespace foresearch::encoder
