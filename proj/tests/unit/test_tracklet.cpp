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

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "../support/check.hpp"
#include "../support/gen.hpp"
#include "foresearch/tracklet/clips.hpp"
#include "foresearch/tracklet/tracker.hpp"

using namespace foresearch;
using namespace foresearch::tracklet;

namespace {

struct Labeled {
  std::vector<Detection> dets;
  std::map<std::pair<std::int64_t, double>, int> truth;  // (frame, x) -> target
};

void add(Labeled& l, int target, std::int64_t frame, BBox box, double score = 0.9) {
  l.dets.push_back({"v", frame, frame / 10.0, box, score, "person"});
  l.truth[{frame, box.x}] = target;
}

void sort_by_frame(Labeled& l) {
  std::stable_sort(l.dets.begin(), l.dets.end(),
                   [](const Detection& a, const Detection& b) { return a.frame_index < b.frame_index; });
}

double purity(const std::vector<Track>& tracks, const Labeled& l) {
  std::size_t majority = 0, total = 0;
  for (const auto& t : tracks) {
    std::map<int, std::size_t> count;
    for (const auto& o : t.observations) ++count[l.truth.at({o.frame_index, o.box.x})];
    std::size_t best = 0;
    for (const auto& [id, n] : count) best = std::max(best, n);
    majority += best;
    total += t.observations.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(majority) / static_cast<double>(total);
}

// Brute-force best total IoU over all gated partial matchings.
double best_total(const std::vector<std::vector<double>>& iou, double gate, std::size_t row,
                  std::vector<bool>& used) {
  if (row == iou.size()) return 0.0;
  double best = best_total(iou, gate, row + 1, used);
  for (std::size_t c = 0; c < iou[row].size(); ++c) {
    if (used[c] || iou[row][c] < gate) continue;
    used[c] = true;
    best = std::max(best, iou[row][c] + best_total(iou, gate, row + 1, used));
    used[c] = false;
  }
  return best;
}

double total_of(const std::vector<std::vector<double>>& iou, const std::vector<Match>& m) {
  double t = 0.0;
  for (const auto& x : m) t += iou[x.row][x.col];
  return t;
}

}  // namespace

TEST_CASE("greedy and optimal assignment") {
  const std::vector<std::vector<double>> iou{{0.9, 0.8}, {0.85, 0.1}};
  const auto greedy = assign(iou, 0.3, Assignment::kGreedy);
  REQUIRE(greedy.size() == 1);
  CHECK(greedy[0] == Match{0, 0});
  const auto optimal = assign(iou, 0.3, Assignment::kOptimal);
  CHECK(optimal.size() == 2);
  CHECK(total_of(iou, optimal) == doctest::Approx(1.65));
  CHECK(assign({}, 0.3, Assignment::kOptimal).empty());
  CHECK(assign({{0.2}}, 0.3, Assignment::kGreedy).empty());
}

TEST_CASE("property: optimal assignment matches brute force, greedy never beats it") {
  fstest::for_all(300, 3, [](fstest::Gen& g) {
    const auto rows = static_cast<std::size_t>(g.integer(0, 5));
    const auto cols = static_cast<std::size_t>(g.integer(1, 5));
    std::vector<std::vector<double>> iou(rows, std::vector<double>(cols));
    for (auto& r : iou) {
      for (auto& x : r) x = g.coin(0.3) ? 0.0 : g.uniform(0.0, 1.0);
    }
    const double gate = 0.3;
    std::vector<bool> used(cols, false);
    const double best = best_total(iou, gate, 0, used);
    for (auto mode : {Assignment::kGreedy, Assignment::kOptimal}) {
      const auto m = assign(iou, gate, mode);
      std::vector<bool> rseen(rows), cseen(cols);
      for (const auto& x : m) {
        CHECK(iou[x.row][x.col] >= gate);
        CHECK_FALSE(rseen[x.row]);
        CHECK_FALSE(cseen[x.col]);
        rseen[x.row] = cseen[x.col] = true;
      }
      if (mode == Assignment::kOptimal) {
        CHECK(total_of(iou, m) == doctest::Approx(best));
      } else {
        CHECK(total_of(iou, m) <= best + 1e-9);
      }
    }
  });
}

TEST_CASE("constant-velocity prediction") {
  std::vector<Observation> obs{{0, 0.0, {10, 10, 5, 5}}, {2, 0.2, {14, 10, 5, 5}}};
  const auto p = predict_box(obs, 5, Motion::kConstantVelocity);
  CHECK(p.x == doctest::Approx(20.0));
  CHECK(p.y == doctest::Approx(10.0));
  CHECK(predict_box(obs, 5, Motion::kNone) == obs.back().box);
}

TEST_CASE("two stationary targets give two pure tracks") {
  Labeled l;
  for (std::int64_t f = 0; f < 50; ++f) {
    add(l, 0, f, {10, 10, 20, 40});
    add(l, 1, f, {100, 10, 20, 40});
  }
  const auto tracks = associate(l.dets);
  CHECK(tracks.size() == 2);
  CHECK(purity(tracks, l) == 1.0);
  CHECK(tracks[0].track_id == "v/t0000");
}

TEST_CASE("crossing trajectories keep identities") {
  for (auto mode : {Assignment::kGreedy, Assignment::kOptimal}) {
    Labeled l;
    for (std::int64_t f = 0; f < 60; ++f) {
      add(l, 0, f, {4.0 * f, 20, 20, 40});
      add(l, 1, f, {236.0 - 4.0 * f, 30, 20, 40});
    }
    sort_by_frame(l);
    TrackerConfig cfg;
    cfg.assignment = mode;
    const auto tracks = associate(l.dets, cfg);
    CHECK(purity(tracks, l) >= 0.9);
  }
}

TEST_CASE("a gap longer than max_gap_frames splits the track") {
  Labeled l;
  for (std::int64_t f = 0; f < 20; ++f) add(l, 0, f, {10, 10, 20, 40});
  for (std::int64_t f = 60; f < 80; ++f) add(l, 0, f, {10, 10, 20, 40});
  TrackerConfig cfg;
  cfg.max_gap_frames = 30;
  CHECK(associate(l.dets, cfg).size() == 2);
  cfg.max_gap_frames = 40;
  CHECK(associate(l.dets, cfg).size() == 1);
}

TEST_CASE("low-score detections extend tracks but never start them") {
  Labeled l;
  for (std::int64_t f = 0; f < 10; ++f) add(l, 0, f, {10, 10, 20, 40}, 0.9);
  for (std::int64_t f = 10; f < 20; ++f) add(l, 0, f, {10, 10, 20, 40}, 0.3);
  for (std::int64_t f = 0; f < 20; ++f) add(l, 1, f, {200, 10, 20, 40}, 0.3);
  sort_by_frame(l);
  const auto tracks = associate(l.dets);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].observations.size() == 20);
}

TEST_CASE("short tracks and non-person detections are dropped") {
  Labeled l;
  for (std::int64_t f = 0; f < 3; ++f) add(l, 0, f, {10, 10, 20, 40});
  l.dets.push_back({"v", 4, 0.4, {50, 10, 20, 40}, 0.9, "car"});
  CHECK(associate(l.dets).empty());
}

TEST_CASE("frame regressions are rejected") {
  std::vector<Detection> d{{"v", 5, 0.5, {0, 0, 5, 5}, 0.9, "person"},
                           {"v", 4, 0.4, {0, 0, 5, 5}, 0.9, "person"}};
  CHECK_ERROR_CODE(associate(d), ErrorCode::kOutOfOrderFrames);
  d[1] = {"v", 6, 0.1, {0, 0, 5, 5}, 0.9, "person"};
  CHECK_ERROR_CODE(associate(d), ErrorCode::kOutOfOrderFrames);
  // Interleaved videos are independent.
  d[1] = {"w", 1, 0.1, {0, 0, 5, 5}, 0.9, "person"};
  CHECK_NOTHROW(associate(d));
}

TEST_CASE("property: tracks partition their observations and move forward in time") {
  fstest::for_all(60, 4, [](fstest::Gen& g) {
    std::vector<Detection> dets;
    const auto videos = g.integer(1, 3);
    for (std::int64_t v = 0; v < videos; ++v) {
      const std::string vid = "v" + std::to_string(v);
      for (std::int64_t f = 0; f < 40; ++f) {
        const auto n = g.integer(0, 4);
        for (std::int64_t k = 0; k < n; ++k) {
          dets.push_back({vid, f, f / 10.0, {g.uniform(0, 200), g.uniform(0, 100), 20, 40},
                          g.uniform(0.0, 1.0), "person"});
        }
      }
    }
    TrackerConfig cfg;
    cfg.min_track_len = 1;
    const auto tracks = associate(dets, cfg);
    std::size_t seen = 0;
    std::set<std::string> ids;
    for (const auto& t : tracks) {
      CHECK(ids.insert(t.track_id).second);
      for (std::size_t i = 1; i < t.observations.size(); ++i) {
        CHECK(t.observations[i].frame_index > t.observations[i - 1].frame_index);
      }
      seen += t.observations.size();
    }
    const auto eligible = std::count_if(dets.begin(), dets.end(),
                                        [&](const Detection& d) { return d.score >= cfg.low_score; });
    CHECK(seen <= static_cast<std::size_t>(eligible));
  });
}

TEST_CASE("tracks split into clips at gaps and at the duration cap") {
  Track t{"v/t0000", "v", {}};
  for (int f = 0; f < 10; ++f) t.observations.push_back({f, f * 1.0, {0, 0, 5, 5}});
  for (int f = 20; f < 25; ++f) t.observations.push_back({f, f * 1.0, {0, 0, 5, 5}});
  ClipPolicy policy;
  policy.split_gap_seconds = 2.0;
  policy.max_clip_seconds = 6.0;
  const std::vector<Track> tracks{t};
  const auto clips = tracks_to_clips(tracks, policy, {{"v", "cam9"}});
  REQUIRE(clips.size() == 3);
  CHECK(clips[0].span == TimeInterval{0, 6});
  CHECK(clips[1].span == TimeInterval{7, 9});
  CHECK(clips[2].span == TimeInterval{20, 24});
  CHECK(clips[0].clip_id == "v/t0000/c00");
  CHECK(clips[2].camera_id == "cam9");
  CHECK(clips[0].frame_indices.size() == clips[0].boxes.size());
  CHECK(clips[0].frame_count == 7);
}

TEST_CASE("property: clips cover every observation and respect the policy") {
  fstest::for_all(200, 5, [](fstest::Gen& g) {
    Track t{"v/t0001", "v", {}};
    double ts = 0.0;
    std::int64_t f = 0;
    const auto n = g.integer(1, 80);
    for (std::int64_t i = 0; i < n; ++i) {
      const auto step = g.coin(0.1) ? g.integer(10, 40) : 1;
      f += step;
      ts += static_cast<double>(step) * 0.2;
      t.observations.push_back({f, ts, {0, 0, 5, 5}});
    }
    ClipPolicy p;
    p.split_gap_seconds = 1.0;
    p.max_clip_seconds = 5.0;
    const std::vector<Track> tracks{t};
    const auto clips = tracks_to_clips(tracks, p);
    std::size_t total = 0;
    for (const auto& c : clips) {
      CHECK(c.span.length() <= p.max_clip_seconds + 1e-9);
      total += c.frame_indices.size();
    }
    CHECK(total == t.observations.size());
  });
}

TEST_CASE("full-frame windows") {
  imaging::VideoManifest m;
  m.video_id = "v";
  m.camera_id = "c";
  m.fps = 10.0;
  m.duration_seconds = 25.0;
  ClipPolicy p;
  p.mode = ClipMode::kFullFrame;
  const auto clips = full_frame_clips(m, p);
  REQUIRE(clips.size() == 3);
  CHECK(clips[0].span == TimeInterval{0, 10});
  CHECK(clips[2].span == TimeInterval{20, 25});
  CHECK(clips[0].frame_indices.front() == 0);
  CHECK(clips[0].frame_indices.size() == 10);
  CHECK(clips[1].frame_indices.front() == 100);
  CHECK(clips[2].clip_id == "v/ff0002");
  CHECK(clips[0].mode == ClipMode::kFullFrame);
  CHECK(clips[0].boxes.empty());
  for (const auto& c : clips) {
    for (auto fi : c.frame_indices) CHECK(fi < m.frame_count());
  }
}

TEST_CASE("policy validation") {
  ClipPolicy p;
  p.max_clip_seconds = 1.0;
  CHECK_ERROR_CODE(p.validate(), ErrorCode::kInvalidArgument);
  TrackerConfig c;
  c.low_score = 0.9;
  CHECK_ERROR_CODE(c.validate(), ErrorCode::kInvalidArgument);
}
