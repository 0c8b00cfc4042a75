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

// Rule-based text and multimodal models that understand synthetic worlds.
// They answer the data-engine prompts from caption text and palette colours,
// which is enough to drive every stage offline and to record replay fixtures.

#include <string>
#include <vector>

#include "foresearch/encoder/mock.hpp"
#include "foresearch/qaengine/client.hpp"
#include "foresearch/qaengine/engine.hpp"
#include "foresearch/synth/world.hpp"

namespace foresearch::synth {

// Two captions per person ("walks into view", then "keeps walking" or, for
// the first person of each video, "suddenly breaks into a run"), sorted by start.
qaengine::CaptionTrack captions(const SynthVideo& video);
std::vector<qaengine::CaptionTrack> captions(const World& world);

class SceneLlm : public qaengine::ModelClient {
 public:
  std::string complete(const qaengine::ModelRequest& request) override;
  std::string model_id() const override { return "scene-llm-v1"; }
};

class SceneLmm : public qaengine::ModelClient {
 public:
  explicit SceneLmm(encoder::Palette palette) : palette_(std::move(palette)) {}
  std::string complete(const qaengine::ModelRequest& request) override;
  std::string model_id() const override { return "scene-lmm-v1"; }

 private:
  encoder::Palette palette_;
};

}  // namespace foresearch::synth
