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

#include "foresearch/tracklet/tracker.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <tuple>

#include "foresearch/core/error.hpp"

namespace foresearch::tracklet {

void TrackerConfig::validate() const {
  if (!(iou_gate > 0.0 && iou_gate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "iou_gate must lie in (0, 1]");
  }
  if (!(low_score < high_score)) {
    throw Error(ErrorCode::kInvalidArgument, "low_score must be below high_score");
  }
  if (min_track_len < 1) throw Error(ErrorCode::kInvalidArgument, "min_track_len must be >= 1");
  if (max_gap_frames < 0) throw Error(ErrorCode::kInvalidArgument, "max_gap_frames must be >= 0");
}

namespace {

std::vector<Match> assign_greedy(const std::vector<std::vector<double>>& iou, double gate) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t r = 0; r < iou.size(); ++r) {
    for (std::size_t c = 0; c < iou[r].size(); ++c) {
      if (iou[r][c] >= gate) pairs.emplace_back(iou[r][c], r, c);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  std::vector<bool> row_used(iou.size(), false);
  std::vector<bool> col_used(iou.empty() ? 0 : iou.front().size(), false);
  std::vector<Match> out;
  for (const auto& [_, r, c] : pairs) {
    if (row_used[r] || col_used[c]) continue;
    row_used[r] = col_used[c] = true;
    out.push_back({r, c});
  }
  return out;
}

// Kuhn-Munkres on a square cost matrix (minimisation), O(n^3).
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

std::vector<Match> assign_optimal(const std::vector<std::vector<double>>& iou, double gate) {
  const std::size_t rows = iou.size();
  const std::size_t cols = rows == 0 ? 0 : iou.front().size();
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (iou[r][c] >= gate) cost[r][c] = -iou[r][c];
    }
  }
  const auto row_to_col = hungarian(cost);
  std::vector<Match> out;
  for (std::size_t r = 0; r < rows; ++r) {
    const int c = row_to_col[r];
    if (c >= 0 && static_cast<std::size_t>(c) < cols && iou[r][c] >= gate) {
      out.push_back({r, static_cast<std::size_t>(c)});
    }
  }
  return out;
}

struct LiveTrack {
  std::int64_t seq = 0;
  std::vector<Observation> observations;
};

std::vector<Track> track_video(const std::string& video_id,
                               const std::vector<const Detection*>& dets,
                               const TrackerConfig& cfg) {
  std::vector<LiveTrack> live;
  std::vector<LiveTrack> finished;
  std::int64_t next_seq = 0;

  auto match_tier = [&](std::vector<std::size_t>& track_pool,
                        const std::vector<const Detection*>& tier,
                        std::int64_t frame) -> std::vector<std::size_t> {
    std::vector<std::vector<double>> iou(track_pool.size(),
                                         std::vector<double>(tier.size(), 0.0));
    for (std::size_t r = 0; r < track_pool.size(); ++r) {
      const auto pred = predict_box(live[track_pool[r]].observations, frame, cfg.motion);
      for (std::size_t c = 0; c < tier.size(); ++c) iou[r][c] = box_iou(pred, tier[c]->box);
    }
    const auto matches = assign(iou, cfg.iou_gate, cfg.assignment);
    std::vector<bool> track_hit(track_pool.size(), false);
    std::vector<bool> det_hit(tier.size(), false);
    for (const auto& m : matches) {
      const auto* d = tier[m.col];
      live[track_pool[m.row]].observations.push_back({d->frame_index, d->timestamp, d->box});
      track_hit[m.row] = det_hit[m.col] = true;
    }
    std::vector<std::size_t> rest_tracks;
    for (std::size_t r = 0; r < track_pool.size(); ++r) {
      if (!track_hit[r]) rest_tracks.push_back(track_pool[r]);
    }
    track_pool = std::move(rest_tracks);
    std::vector<std::size_t> unmatched_dets;
    for (std::size_t c = 0; c < tier.size(); ++c) {
      if (!det_hit[c]) unmatched_dets.push_back(c);
    }
    return unmatched_dets;
  };

  std::size_t i = 0;
  while (i < dets.size()) {
    const std::int64_t frame = dets[i]->frame_index;
    std::vector<const Detection*> high, low;
    for (; i < dets.size() && dets[i]->frame_index == frame; ++i) {
      const auto* d = dets[i];
      if (d->score >= cfg.high_score) {
        high.push_back(d);
      } else if (d->score >= cfg.low_score) {
        low.push_back(d);
      }
    }

    // Close tracks whose gap of unseen frames exceeds the limit.
    std::vector<LiveTrack> still_live;
    for (auto& t : live) {
      if (frame - t.observations.back().frame_index - 1 > cfg.max_gap_frames) {
        finished.push_back(std::move(t));
      } else {
        still_live.push_back(std::move(t));
      }
    }
    live = std::move(still_live);

    std::vector<std::size_t> pool(live.size());
    for (std::size_t k = 0; k < live.size(); ++k) pool[k] = k;  // live is ordered by seq
    const auto unmatched_high = match_tier(pool, high, frame);
    match_tier(pool, low, frame);
    for (std::size_t c : unmatched_high) {
      const auto* d = high[c];
      live.push_back({next_seq++, {{d->frame_index, d->timestamp, d->box}}});
    }
  }
  for (auto& t : live) finished.push_back(std::move(t));
  std::sort(finished.begin(), finished.end(),
            [](const LiveTrack& a, const LiveTrack& b) { return a.seq < b.seq; });

  std::vector<Track> out;
  for (auto& t : finished) {
    if (t.observations.size() < cfg.min_track_len) continue;
    char id[32];
    std::snprintf(id, sizeof(id), "/t%04lld", static_cast<long long>(t.seq));
    out.push_back({video_id + id, video_id, std::move(t.observations)});
  }
  return out;
}

}  // namespace

std::vector<Match> assign(const std::vector<std::vector<double>>& iou, double gate,
                          Assignment mode) {
  return mode == Assignment::kGreedy ? assign_greedy(iou, gate) : assign_optimal(iou, gate);
}

BBox predict_box(std::span<const Observation> obs, std::int64_t frame_index, Motion motion) {
  const auto& last = obs.back();
  if (motion == Motion::kNone || obs.size() < 2) return last.box;
  const auto& prev = obs[obs.size() - 2];
  const double span = static_cast<double>(last.frame_index - prev.frame_index);
  const double ahead = static_cast<double>(frame_index - last.frame_index);
  auto step = [&](double a, double b) { return b + (b - a) / span * ahead; };
  BBox p;
  p.x = step(prev.box.x, last.box.x);
  p.y = step(prev.box.y, last.box.y);
  p.w = std::max(1e-3, step(prev.box.w, last.box.w));
  p.h = std::max(1e-3, step(prev.box.h, last.box.h));
  return p;
}

std::vector<Track> associate(std::span<const Detection> detections, const TrackerConfig& cfg) {
  cfg.validate();
  std::map<std::string, std::vector<const Detection*>> by_video;
  for (const auto& d : detections) {
    if (d.class_label != "person") continue;
    auto& list = by_video[d.video_id];
    if (!list.empty()) {
      const auto* prev = list.back();
      if (d.frame_index < prev->frame_index) {
        throw Error(ErrorCode::kOutOfOrderFrames,
                    d.video_id + ": frame " + std::to_string(d.frame_index) +
                        " after frame " + std::to_string(prev->frame_index));
      }
      if (d.timestamp < prev->timestamp) {
        throw Error(ErrorCode::kOutOfOrderFrames,
                    d.video_id + ": timestamp regresses at frame " +
                        std::to_string(d.frame_index));
      }
    }
    list.push_back(&d);
  }

  std::vector<std::pair<std::string, std::vector<const Detection*>>> videos(by_video.begin(),
                                                                            by_video.end());
  std::vector<std::vector<Track>> per_video(videos.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t v = 0; v < videos.size(); ++v) {
    per_video[v] = track_video(videos[v].first, videos[v].second, cfg);
  }

  std::vector<Track> out;
  for (auto& tracks : per_video) {
    for (auto& t : tracks) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace foresearch::tracklet
