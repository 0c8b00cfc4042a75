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

// Synthetic surveillance videos whose pixels carry mock-encoder labels.
// Each person walks inside their own vertical lane, painted in the palette
// colour of their appearance label, so person-centric clips, text queries and
// photo queries all meet in the mock embedding space.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "foresearch/core/types.hpp"
#include "foresearch/encoder/mock.hpp"
#include "foresearch/imaging/frames.hpp"

namespace foresearch::synth {

struct WorldConfig {
  std::size_t videos = 50;
  std::size_t people_per_video = 6;
  double fps = 5.0;
  double duration_seconds = 60.0;
  int width = 320;
  int height = 180;
  std::uint64_t seed = 7;
};

struct Person {
  std::string label;
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;
  BBox start_box;
  double vy = 0.0;  // pixels per frame

  BBox box_at(std::int64_t frame) const;
  bool visible(std::int64_t frame) const { return frame >= first_frame && frame <= last_frame; }
  TimeInterval span(double fps) const { return {first_frame / fps, last_frame / fps}; }
};

struct SynthVideo {
  imaging::VideoManifest manifest;
  std::vector<Person> people;
};

struct World {
  WorldConfig config;
  std::set<std::string> vocabulary;
  std::vector<SynthVideo> videos;

  const SynthVideo& video(const std::string& video_id) const;
};

// Appearance labels such as "red_jacket"; 24 in total.
std::vector<std::string> appearance_labels();

World make_world(const WorldConfig& cfg);

std::vector<Detection> detections(const SynthVideo& video);
std::vector<Detection> detections(const World& world);

imaging::Image render(const SynthVideo& video, std::int64_t frame, const encoder::Palette& palette,
                      int width, int height);

// Renders frames on demand; nothing touches the disk.
class SyntheticFrameProvider : public imaging::FrameProvider {
 public:
  explicit SyntheticFrameProvider(const World& world);

  imaging::VideoManifest info(const std::string& video_id) const override;
  imaging::Image frame(const std::string& video_id, std::int64_t frame_index) const override;

 private:
  const World& world_;
  encoder::Palette palette_;
};

struct OracleOptions {
  std::uint64_t seed = 11;
  // Every n-th sample carries a photo query instead of the appearance text; 0 disables.
  std::size_t image_every = 5;
};

// One four-option person-specific question per video whose ground truth is
// the asked-about person's visible span.
std::vector<QASample> oracle_benchmark(const World& world, const OracleOptions& options = {});

// Writes manifests.jsonl, detections.jsonl, benchmark.jsonl, vocabulary.txt
// and PNG frames under dir/frames/<video_id>/.
void write_world(const World& world, const std::filesystem::path& dir,
                 const OracleOptions& options = {});

}  // namespace foresearch::synth
