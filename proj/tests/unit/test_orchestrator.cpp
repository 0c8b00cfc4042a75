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
#include <atomic>

#include "../support/check.hpp"
#include "../support/gen.hpp"
#include "../support/stack.hpp"
#include "foresearch/core/json.hpp"
#include "foresearch/orchestrator/orchestrator.hpp"
#include "foresearch/orchestrator/pipeline.hpp"

using namespace foresearch;
using namespace foresearch::orchestrator;

namespace {

std::size_t count_clip_lines(const std::string& text) {
  std::size_t n = 0, pos = 0;
  while ((pos = text.find("\nClip ", pos)) != std::string::npos) {
    ++n;
    ++pos;
  }
  return n;
}

std::vector<vecindex::SearchHit> top_hits(const fstest::Stack& s, const QASample& sample, std::size_t k) {
  vecindex::SearchFilter f;
  f.video_id = sample.video_id;
  return s.index.search(s.gateway.embed_query(sample.query), k, f);
}

class CountingDown : public VlmBackend {
 public:
  VlmReply generate(const VlmRequest&) override {
    ++calls;
    throw Error(ErrorCode::kVlmUnavailable, "down");
  }
  std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("grounding mode validation") {
  GroundingMode m;
  CHECK_NOTHROW(m.validate());
  m.crop = m.overlay = true;
  CHECK_ERROR_CODE(m.validate(), ErrorCode::kInvalidArgument);
  m = {};
  m.top_k = 0;
  CHECK_ERROR_CODE(m.validate(), ErrorCode::kInvalidArgument);
  GroundingMode j;
  j.top_k = 5;
  j.chronological = true;
  CHECK(Json(j).get<GroundingMode>() == j);
}

TEST_CASE("assemble under each grounding mode") {
  fstest::Stack s(fstest::small_world(2));
  const auto samples = synth::oracle_benchmark(s.world, {11, 0});
  const auto& sample = samples[0];
  const auto hits = top_hits(s, sample, 5);
  REQUIRE(hits.size() == 5);

  SUBCASE("coords only leaves pixels untouched") {
    GroundingMode m;
    const auto req = assemble(std::span(hits).first(3), sample.query, &sample, m, s.frames);
    CHECK(count_clip_lines(req.user_text) == 3);
    CHECK(req.frames.size() <= 3 * 8);
    for (const auto& f : req.frames) {
      REQUIRE(f.clip_rank >= 1);
      const auto& clip = hits[f.clip_rank - 1].clip;
      const auto frame = static_cast<std::int64_t>(std::llround(f.timestamp * 4.0));
      CHECK(f.image == s.frames.frame(clip.video_id, frame));
    }
    CHECK(req.user_text.find("A. " + sample.options[0]) != std::string::npos);
    CHECK(req.user_text.find("D. " + sample.options[3]) != std::string::npos);
    CHECK(req.system_prompt.find("\"intervals\"") != std::string::npos);
    CHECK(req.warnings.empty());
  }
  SUBCASE("frames follow rank order and are chronological within a clip") {
    const auto req = assemble(hits, sample.query, &sample, GroundingMode{}, s.frames);
    for (std::size_t i = 1; i < req.frames.size(); ++i) {
      CHECK(req.frames[i].clip_rank >= req.frames[i - 1].clip_rank);
      if (req.frames[i].clip_rank == req.frames[i - 1].clip_rank) {
        CHECK(req.frames[i].timestamp > req.frames[i - 1].timestamp);
      }
    }
    GroundingMode chrono;
    chrono.chronological = true;
    const auto sorted = assemble(hits, sample.query, &sample, chrono, s.frames);
    for (std::size_t i = 1; i < sorted.frames.size(); ++i) {
      CHECK(sorted.frames[i].timestamp >= sorted.frames[i - 1].timestamp);
    }
  }
  SUBCASE("crop cuts frames to the boxes") {
    GroundingMode m;
    m.crop = true;
    m.coords = false;
    const auto req = assemble(hits, sample.query, &sample, m, s.frames);
    CHECK(count_clip_lines(req.user_text) == 0);
    CHECK(req.frames[0].image.width() < 192);
  }
  SUBCASE("overlay draws the stroke without resizing") {
    GroundingMode m;
    m.overlay = true;
    const auto req = assemble(hits, sample.query, &sample, m, s.frames);
    const auto& f = req.frames[0];
    CHECK(f.image.width() == 192);
    const auto& box = hits[0].clip.boxes.front().box;
    (void)box;
    std::size_t green = 0;
    for (int y = 0; y < f.image.height(); ++y) {
      for (int x = 0; x < f.image.width(); ++x) green += f.image.at(x, y) == imaging::kOverlayColor;
    }
    CHECK(green > 0);
  }
  SUBCASE("uniform extras and the frame bound") {
    GroundingMode m;
    m.top_k = 3;
    m.extra_uniform_frames = 5;
    const auto req = assemble(hits, sample.query, &sample, m, s.frames);
    CHECK(req.frames.size() <= 3 * 8 + 5);
    CHECK(std::count_if(req.frames.begin(), req.frames.end(), [](const VlmFrame& f) { return f.clip_rank == 0; }) == 5);
  }
  SUBCASE("fewer hits than K") {
    const auto req = assemble(std::span(hits).first(2), sample.query, &sample, GroundingMode{}, s.frames);
    CHECK(count_clip_lines(req.user_text) == 2);
    const auto none = assemble({}, sample.query, &sample, GroundingMode{}, s.frames);
    CHECK(none.frames.empty());
  }
  SUBCASE("assemble is deterministic") {
    GroundingMode m;
    m.overlay = true;
    const auto a = assemble(hits, sample.query, &sample, m, s.frames);
    const auto b = assemble(hits, sample.query, &sample, m, s.frames);
    CHECK(a.user_text == b.user_text);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) CHECK(a.frames[i].image == b.frames[i].image);
  }
}

TEST_CASE("crop on a full-frame clip warns and passes frames through") {
  fstest::Stack s(fstest::small_world(1));
  vecindex::VectorIndex ff(64);
  tracklet::ClipPolicy p;
  p.mode = ClipMode::kFullFrame;
  index_full_frame(s.world.videos[0].manifest, s.gateway, s.frames, ff, p);
  Query q{"anything at all", std::nullopt};
  const auto hits = ff.search(s.gateway.embed_query(q), 1);
  REQUIRE(hits.size() == 1);
  GroundingMode m;
  m.crop = true;
  const auto req = assemble(hits, q, nullptr, m, s.frames);
  CHECK(req.warnings.size() == 1);
  CHECK(req.frames[0].image.width() == 192);
  CHECK(req.user_text.find("bbox per-frame [x,y,w,h] none") != std::string::npos);
}

TEST_CASE("missing frames surface as MissingFrames") {
  fstest::Stack s(fstest::small_world(1));
  auto hit = s.index.search(s.gateway.embed_query({"red_jacket", std::nullopt}), 1).at(0);
  hit.clip.frame_indices = {100000};
  hit.clip.boxes = {{100000, {0, 0, 5, 5}}};
  std::vector<vecindex::SearchHit> hits{hit};
  CHECK_ERROR_CODE(assemble(hits, {"x", std::nullopt}, nullptr, {}, s.frames), ErrorCode::kMissingFrames);
}

TEST_CASE("parse_response fixture corpus") {
  const auto rows = read_jsonl(std::string(FS_FIXTURE_DIR) + "/vlm_responses.jsonl");
  REQUIRE(rows.size() >= 12);
  for (const auto& row : rows) {
    const auto raw = row["raw"].get<std::string>();
    INFO("raw: " << raw);
    const auto got = parse_response(raw, 4);
    if (row["answer"].is_null()) {
      CHECK_FALSE(got.chosen_index.has_value());
    } else {
      REQUIRE(got.chosen_index.has_value());
      CHECK(*got.chosen_index == row["answer"].get<int>());
    }
    std::vector<TimeInterval> want;
    for (const auto& iv : row["intervals"]) want.push_back({iv[0].get<double>(), iv[1].get<double>()});
    CHECK(got.intervals == canonicalize(want));
  }
}

TEST_CASE("property: parse_response never throws on garbage") {
  const std::string alphabet = "{}[]\":,0123456789.-sto AnswerABCD\\ \n\xE2\x80\x93";
  fstest::for_all(2000, 31, [&](fstest::Gen& g) {
    std::string raw;
    const auto n = g.integer(0, 80);
    for (std::int64_t i = 0; i < n; ++i) {
      raw += alphabet[static_cast<std::size_t>(g.integer(0, static_cast<std::int64_t>(alphabet.size()) - 1))];
    }
    ParsedResponse p;
    CHECK_NOTHROW(p = parse_response(raw, 4));
    CHECK(canonicalize(p.intervals.intervals()) == p.intervals);
    if (p.chosen_index) CHECK(*p.chosen_index < 4);
  });
}

TEST_CASE("mock VLM fidelity") {
  std::vector<QASample> samples;
  for (int i = 0; i < 1000; ++i) {
    QASample s;
    s.sample_id = "s" + std::to_string(i);
    s.video_id = "v";
    s.subtask = Subtask::kAC;
    s.query.text = "q";
    s.options = {"a", "b", "c", "d"};
    s.answer_index = i % 4;
    s.ground_truth = IntervalSet{{10.0 + i % 7, 20.0 + i % 7}};
    samples.push_back(s);
  }
  const auto truth = truth_table(samples);
  auto accuracy = [&](double fidelity, std::uint64_t seed, double* iou_sum = nullptr) {
    std::size_t correct = 0;
    for (const auto& s : samples) {
      VlmRequest r;
      r.sample_id = s.sample_id;
      r.frames.push_back({17.0, imaging::Image(1, 1), 1});
      const auto p = parse_response(mock_vlm(r, truth, {fidelity, seed, true}), 4);
      correct += p.chosen_index == s.answer_index;
      if (iou_sum) *iou_sum += interval_set_iou(p.intervals, s.ground_truth);
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
  };
  double iou = 0.0;
  CHECK(accuracy(1.0, 5, &iou) == 1.0);
  CHECK(iou == doctest::Approx(1000.0));
  CHECK(accuracy(0.0, 5) == 0.0);
  const double half = accuracy(0.5, 5);
  CHECK(half >= 0.46);
  CHECK(half <= 0.54);
  CHECK(accuracy(0.5, 5) == half);

  VlmRequest blind;
  blind.sample_id = "s1";
  blind.frames.push_back({500.0, imaging::Image(1, 1), 1});
  CHECK_FALSE(parse_response(mock_vlm(blind, truth, {1.0, 5, true})).chosen_index.has_value());
  CHECK(parse_response(mock_vlm(blind, truth, {1.0, 5, false})).chosen_index == 1);
  blind.sample_id = "unknown";
  CHECK_FALSE(parse_response(mock_vlm(blind, truth, {})).chosen_index.has_value());
}

TEST_CASE("answer retries and parses") {
  CountingDown down;
  VlmRequest r;
  CHECK_ERROR_CODE(answer(r, down, {3, std::chrono::milliseconds(1)}), ErrorCode::kVlmUnavailable);
  CHECK(down.calls == 3);

  QASample s;
  s.sample_id = "x";
  s.options = {"a", "b", "c"};
  s.answer_index = 2;
  s.ground_truth = IntervalSet{{1, 2}};
  std::vector<QASample> one{s};
  MockVlmBackend oracle(truth_table(one), {1.0, 0, false});
  r.sample_id = "x";
  const auto resp = answer(r, oracle);
  CHECK(resp.attempts == 1);
  const auto pred = to_prediction("x", resp);
  CHECK(pred.chosen_index == 2);
  CHECK(pred.predicted_intervals == s.ground_truth);
  CHECK(pred.raw_response == resp.raw);

  HttpVlmBackend unreachable("http://127.0.0.1:1", std::chrono::milliseconds(200));
  CHECK_ERROR_CODE(answer(r, unreachable, {1, std::chrono::milliseconds(1)}), ErrorCode::kVlmUnavailable);
}

TEST_CASE("VLM wire round-trip") {
  VlmRequest r;
  r.sample_id = "abc";
  r.system_prompt = "sys";
  r.user_text = "hello";
  r.frames.push_back({1.5, imaging::Image(2, 2, {1, 2, 3}), 2});
  r.query_image = imaging::Image(3, 1, {4, 5, 6});
  const auto w = to_wire(r);
  CHECK(w["images"][0]["timestamp"] == 1.5);
  const auto back = from_wire(w);
  CHECK(back.sample_id == "abc");
  CHECK(back.frames[0].image == r.frames[0].image);
  CHECK(back.frames[0].clip_rank == 2);
  CHECK(*back.query_image == *r.query_image);
}

TEST_CASE("pipeline degrades when the VLM is down") {
  fstest::Stack s(fstest::small_world(2));
  const auto samples = synth::oracle_benchmark(s.world, {11, 0});
  Pipeline p(s.gateway, s.index, s.frames, std::make_shared<DownVlmBackend>(), {}, {2, std::chrono::milliseconds(1)});
  const auto out = p.run_sample(samples[0]);
  CHECK_FALSE(out.response.has_value());
  CHECK(out.hits.size() == 3);
  CHECK_FALSE(out.warnings.empty());
  QASample ghost = samples[0];
  ghost.video_id = "nowhere";
  CHECK_ERROR_CODE(p.run_sample(ghost), ErrorCode::kMissingVideo);

  Pipeline good(s.gateway, s.index, s.frames,
                std::make_shared<MockVlmBackend>(truth_table(samples), MockVlmConfig{}));
  const auto res = good.run_sample(samples[1]);
  REQUIRE(res.response.has_value());
  CHECK(res.response->parsed.chosen_index == samples[1].answer_index);
  CHECK(res.hits[0].clip.span == samples[1].ground_truth.hull());
  const auto search_only = good.run(samples[1].query, nullptr, {}, false);
  CHECK_FALSE(search_only.response.has_value());
  CHECK(search_only.frames_sent == 0);
}
