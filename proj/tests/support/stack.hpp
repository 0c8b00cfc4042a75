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

// A fully indexed synthetic world behind the mock encoder.

#include <memory>

#include "foresearch/encoder/gateway.hpp"
#include "foresearch/orchestrator/pipeline.hpp"
#include "foresearch/synth/world.hpp"
#include "foresearch/vecindex/index.hpp"

namespace fstest {

struct Stack {
  explicit Stack(foresearch::synth::WorldConfig cfg, std::size_t dim = 64, double sigma = 0.0)
      : world(foresearch::synth::make_world(cfg)),
        frames(world),
        gateway(make_backend(world, dim, sigma), profile(dim)),
        index(dim) {
    foresearch::tracklet::CameraMap cameras;
    for (const auto& v : world.videos) cameras[v.manifest.video_id] = v.manifest.camera_id;
    const auto dets = foresearch::synth::detections(world);
    clips = foresearch::orchestrator::index_detections(dets, cameras, gateway, frames, index);
  }

  static foresearch::encoder::EncoderProfile profile(std::size_t dim) {
    foresearch::encoder::EncoderProfile p;
    p.dimension = dim;
    return p;
  }

  static std::shared_ptr<foresearch::encoder::EncoderBackend> make_backend(
      const foresearch::synth::World& w, std::size_t dim, double sigma) {
    foresearch::encoder::MockEncoderConfig cfg;
    cfg.vocabulary = w.vocabulary;
    cfg.dimension = dim;
    cfg.sigma = sigma;
    return std::make_shared<foresearch::encoder::MockEncoderBackend>(cfg);
  }

  foresearch::synth::World world;
  foresearch::synth::SyntheticFrameProvider frames;
  foresearch::encoder::EncoderGateway gateway;
  foresearch::vecindex::VectorIndex index;
  std::vector<foresearch::Clip> clips;
};

inline foresearch::synth::WorldConfig small_world(std::size_t videos = 4) {
  foresearch::synth::WorldConfig c;
  c.videos = videos;
  c.duration_seconds = 30.0;
  c.fps = 4.0;
  c.width = 192;
  c.height = 96;
  return c;
}

}  // namespace fstest
