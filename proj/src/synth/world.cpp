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

#include "foresearch/synth/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "foresearch/core/error.hpp"
#include "foresearch/core/json.hpp"

namespace foresearch::synth {

namespace {

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

constexpr const char* kActivities[] = {"walking",  "running",  "standing", "sitting",
                                       "loitering", "fighting", "waving",   "carrying a bag"};

}  // namespace

BBox Person::box_at(std::int64_t frame) const {
  BBox b = start_box;
  b.y = start_box.y + vy * static_cast<double>(frame - first_frame);
  return b;
}

const SynthVideo& World::video(const std::string& video_id) const {
  for (const auto& v : videos) {
    if (v.manifest.video_id == video_id) return v;
  }
  throw Error(ErrorCode::kMissingVideo, video_id);
}

std::vector<std::string> appearance_labels() {
  std::vector<std::string> out;
  for (const char* colour : {"red", "blue", "green", "yellow", "white", "black"}) {
    for (const char* garment : {"jacket", "shirt", "coat", "hoodie"}) {
      out.push_back(std::string(colour) + "_" + garment);
    }
  }
  return out;
}

World make_world(const WorldConfig& cfg) {
  const auto labels = appearance_labels();
  if (cfg.people_per_video == 0 || cfg.people_per_video > labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "people_per_video must be in [1, 24]");
  }
  if (cfg.fps <= 0.0 || cfg.duration_seconds <= 0.0 || cfg.width < 64 || cfg.height < 64) {
    throw Error(ErrorCode::kInvalidArgument, "bad synthetic world geometry");
  }
  World world;
  world.config = cfg;
  world.vocabulary = {labels.begin(), labels.end()};
  std::mt19937_64 rng(cfg.seed);
  const auto frames = static_cast<std::int64_t>(std::floor(cfg.duration_seconds * cfg.fps));
  const double lane = static_cast<double>(cfg.width) / static_cast<double>(cfg.people_per_video);
  const double w = std::max(4.0, std::floor(lane * 0.6));
  const double h = std::floor(cfg.height * 0.35);

  for (std::size_t v = 0; v < cfg.videos; ++v) {
    SynthVideo video;
    char id[32];
    std::snprintf(id, sizeof(id), "vid%04zu", v);
    video.manifest.video_id = id;
    std::snprintf(id, sizeof(id), "cam%02zu", v % 8);
    video.manifest.camera_id = id;
    video.manifest.fps = cfg.fps;
    video.manifest.duration_seconds = cfg.duration_seconds;
    video.manifest.source_uri = "synthetic://" + video.manifest.video_id;

    auto pool = labels;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t p = 0; p < cfg.people_per_video; ++p) {
      Person person;
      person.label = pool[p];
      const auto min_len = std::max<std::int64_t>(10, frames / 6);
      const auto max_len = std::max<std::int64_t>(min_len, frames / 2);
      const auto len = min_len + static_cast<std::int64_t>(draw(rng, static_cast<std::uint64_t>(max_len - min_len + 1)));
      person.first_frame = static_cast<std::int64_t>(draw(rng, static_cast<std::uint64_t>(std::max<std::int64_t>(1, frames - len))));
      person.last_frame = std::min(frames - 1, person.first_frame + len - 1);
      const double x = std::floor(lane * static_cast<double>(p) + (lane - w) / 2.0);
      const double travel = cfg.height - h - 2.0;
      const double y0 = 1.0 + std::floor(unit(rng) * travel);
      const double y1 = 1.0 + std::floor(unit(rng) * travel);
      person.start_box = {x, y0, w, h};
      person.vy = (y1 - y0) / static_cast<double>(std::max<std::int64_t>(1, len - 1));
      video.people.push_back(person);
    }
    world.videos.push_back(std::move(video));
  }
  return world;
}

std::vector<Detection> detections(const SynthVideo& video) {
  std::vector<Detection> out;
  const auto frames = video.manifest.frame_count();
  for (std::int64_t f = 0; f < frames; ++f) {
    for (const auto& p : video.people) {
      if (!p.visible(f)) continue;
      Detection d;
      d.video_id = video.manifest.video_id;
      d.frame_index = f;
      d.timestamp = video.manifest.timestamp_of(f);
      d.box = p.box_at(f);
      d.score = 0.9;
      out.push_back(d);
    }
  }
  return out;
}

std::vector<Detection> detections(const World& world) {
  std::vector<Detection> out;
  for (const auto& v : world.videos) {
    auto d = detections(v);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

imaging::Image render(const SynthVideo& video, std::int64_t frame, const encoder::Palette& palette,
                      int width, int height) {
  imaging::Image img(width, height, encoder::kBackground);
  for (const auto& p : video.people) {
    if (!p.visible(frame)) continue;
    const auto r = imaging::clamp_box(img, p.box_at(frame));
    img.fill_rect(r.x0, r.y0, r.x1, r.y1, palette.color_of(p.label));
  }
  return img;
}

SyntheticFrameProvider::SyntheticFrameProvider(const World& world)
    : world_(world), palette_(world.vocabulary) {}

imaging::VideoManifest SyntheticFrameProvider::info(const std::string& video_id) const {
  return world_.video(video_id).manifest;
}

imaging::Image SyntheticFrameProvider::frame(const std::string& video_id,
                                             std::int64_t frame_index) const {
  const auto& video = world_.video(video_id);
  if (frame_index < 0 || frame_index >= video.manifest.frame_count()) {
    throw Error(ErrorCode::kMissingFrames,
                video_id + " has no frame " + std::to_string(frame_index));
  }
  return render(video, frame_index, palette_, world_.config.width, world_.config.height);
}

std::vector<QASample> oracle_benchmark(const World& world, const OracleOptions& options) {
  std::vector<QASample> out;
  std::mt19937_64 rng(options.seed);
  const encoder::Palette palette(world.vocabulary);
  constexpr Subtask kCycle[] = {Subtask::kAC, Subtask::kEV, Subtask::kTM};
  constexpr std::size_t kActivityCount = std::size(kActivities);
  for (std::size_t v = 0; v < world.videos.size(); ++v) {
    const auto& video = world.videos[v];
    const auto& person = video.people[draw(rng, video.people.size())];
    QASample s;
    s.sample_id = "synth-" + video.manifest.video_id + "-q0";
    s.video_id = video.manifest.video_id;
    s.subtask = kCycle[v % 3];
    std::string readable = person.label;
    std::replace(readable.begin(), readable.end(), '_', ' ');
    const bool photo = options.image_every > 0 && v % options.image_every == options.image_every - 1;
    if (photo) {
      const auto mid = (person.first_frame + person.last_frame) / 2;
      const auto frame = render(video, mid, palette, world.config.width, world.config.height);
      s.query.text = "What is the person in the photo doing?";
      s.query.image = ImageRef{"", imaging::encode(imaging::crop(frame, person.box_at(mid)))};
    } else {
      s.query.text = "What is the person in the " + person.label + " (" + readable + ") doing?";
    }
    std::vector<std::size_t> picks(kActivityCount);
    for (std::size_t i = 0; i < kActivityCount; ++i) picks[i] = i;
    std::shuffle(picks.begin(), picks.end(), rng);
    for (std::size_t i = 0; i < 4; ++i) s.options.push_back(kActivities[picks[i]]);
    s.answer_index = static_cast<int>(draw(rng, 4));
    s.ground_truth = IntervalSet{person.span(video.manifest.fps)};
    validate(s);
    out.push_back(std::move(s));
  }
  return out;
}

void write_world(const World& world, const std::filesystem::path& dir,
                 const OracleOptions& options) {
  const encoder::Palette palette(world.vocabulary);
  std::vector<Json> manifests;
  std::vector<Json> dets;
  for (const auto& video : world.videos) {
    auto manifest = video.manifest;
    const auto frame_dir = dir / "frames" / manifest.video_id;
    std::filesystem::create_directories(frame_dir);
    manifest.frame_dir = std::filesystem::absolute(frame_dir).string();
    for (std::int64_t f = 0; f < manifest.frame_count(); ++f) {
      char name[32];
      std::snprintf(name, sizeof(name), manifest.frame_pattern.c_str(), static_cast<int>(f));
      write_file(frame_dir / name,
                 imaging::encode(render(video, f, palette, world.config.width, world.config.height)));
    }
    manifests.emplace_back(manifest);
    for (const auto& d : detections(video)) dets.emplace_back(d);
  }
  write_jsonl(dir / "manifests.jsonl", manifests);
  write_jsonl(dir / "detections.jsonl", dets);
  write_jsonl_of(dir / "benchmark.jsonl", oracle_benchmark(world, options));
  std::string vocab;
  for (const auto& w : world.vocabulary) vocab += w + "\n";
  write_file(dir / "vocabulary.txt", vocab);
}

}  // namespace foresearch::synth
