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
#include <filesystem>

#include "../support/check.hpp"
#include "../support/gen.hpp"
#include "foresearch/core/digest.hpp"
#include "foresearch/core/interval.hpp"
#include "foresearch/core/json.hpp"
#include "foresearch/core/prompts.hpp"

using namespace foresearch;

namespace {

// Oracle for integer-aligned intervals: count covered unit cells.
std::vector<bool> cells(const std::vector<TimeInterval>& ivs, int n) {
  std::vector<bool> c(static_cast<std::size_t>(n), false);
  for (const auto& iv : ivs) {
    for (int i = static_cast<int>(iv.start); i < static_cast<int>(iv.end); ++i) c[static_cast<std::size_t>(i)] = true;
  }
  return c;
}

QASample sample_fixture() {
  QASample s;
  s.sample_id = "s1";
  s.video_id = "v1";
  s.subtask = Subtask::kAC;
  s.query.text = "What is the man in the white shirt doing?";
  s.options = {"walking", "running", "sitting", "waving"};
  s.answer_index = 2;
  s.ground_truth = IntervalSet{{10.0, 20.0}};
  return s;
}

}  // namespace

TEST_CASE("interval validation") {
  CHECK_NOTHROW(make_interval(0.0, 0.0));
  CHECK_ERROR_CODE(make_interval(-1.0, 2.0), ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(make_interval(3.0, 2.0), ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(make_interval(0.0, std::nan("")), ErrorCode::kInvalidArgument);
}

TEST_CASE("interval set canonical form merges touching intervals") {
  IntervalSet s{{5, 7}, {0, 2}, {2, 3}, {6, 9}};
  REQUIRE(s.size() == 2);
  CHECK(s.intervals()[0] == TimeInterval{0, 3});
  CHECK(s.intervals()[1] == TimeInterval{5, 9});
  CHECK(s.measure() == doctest::Approx(7.0));
  CHECK(s.hull() == TimeInterval{0, 9});
  CHECK_THROWS(IntervalSet{}.hull());
}

TEST_CASE("temporal IoU worked values") {
  CHECK(interval_iou({0, 10}, {5, 15}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(interval_iou({0, 5}, {5, 10}) == 0.0);
  CHECK(interval_iou({3, 3}, {3, 3}) == 1.0);
  CHECK(interval_iou({3, 3}, {4, 4}) == 0.0);
  CHECK(interval_set_iou(IntervalSet{}, IntervalSet{}) == 1.0);
  CHECK(interval_set_iou(IntervalSet{{1, 2}}, IntervalSet{}) == 0.0);
  CHECK(interval_set_iou(IntervalSet{}, IntervalSet{{1, 2}}) == 0.0);
  // Union semantics: {[0,2],[4,6]} vs {[1,5]}: inter 2, union 6.
  CHECK(interval_set_iou(IntervalSet{{0, 2}, {4, 6}}, IntervalSet{{1, 5}}) ==
        doctest::Approx(2.0 / 6.0));
}

TEST_CASE("property: canonical sets are sorted, disjoint and measure-preserving") {
  fstest::for_all(300, 1, [](fstest::Gen& g) {
    const auto raw = g.grid_intervals(8, 40);
    const auto set = canonicalize(raw);
    for (std::size_t i = 1; i < set.size(); ++i) {
      CHECK(set.intervals()[i - 1].end < set.intervals()[i].start);
    }
    const auto c = cells(raw, 40);
    const auto covered = static_cast<double>(std::count(c.begin(), c.end(), true));
    CHECK(set.measure() == covered);
    CHECK(canonicalize(set.intervals()) == set);
  });
}

TEST_CASE("property: set IoU agrees with the cell-count oracle") {
  fstest::for_all(500, 2, [](fstest::Gen& g) {
    const auto a = g.grid_intervals(5, 30);
    const auto b = g.grid_intervals(5, 30);
    const auto ca = cells(a, 30), cb = cells(b, 30);
    int inter = 0, uni = 0;
    for (std::size_t i = 0; i < ca.size(); ++i) {
      inter += ca[i] && cb[i];
      uni += ca[i] || cb[i];
    }
    const auto sa = canonicalize(a), sb = canonicalize(b);
    const double iou = interval_set_iou(sa, sb);
    CHECK(iou >= 0.0);
    CHECK(iou <= 1.0);
    CHECK(iou == interval_set_iou(sb, sa));
    CHECK(intersection_measure(sa, sb) == static_cast<double>(inter));
    const auto both = intersect(sa, sb);
    CHECK(both.measure() == static_cast<double>(inter));
    CHECK(intersection_measure(both, sa) == both.measure());
    if (sa.empty() && sb.empty()) {
      CHECK(iou == 1.0);
    } else if (sa.empty() || sb.empty()) {
      CHECK(iou == 0.0);
    } else if (uni > 0) {
      CHECK(iou == doctest::Approx(static_cast<double>(inter) / uni).epsilon(1e-12));
    }
    if (!sa.empty()) CHECK(interval_set_iou(sa, sa) == 1.0);
  });
}

TEST_CASE("box IoU") {
  CHECK(box_iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(box_iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0));
  CHECK(box_iou({0, 0, 10, 10}, {20, 20, 5, 5}) == 0.0);
  CHECK_ERROR_CODE(validate(BBox{0, 0, 0, 5}), ErrorCode::kInvalidArgument);
}

TEST_CASE("QASample invariants") {
  auto s = sample_fixture();
  CHECK_NOTHROW(validate(s));
  auto bad = s;
  bad.answer_index = 4;
  CHECK_ERROR_CODE(validate(bad), ErrorCode::kMalformedSample);
  bad = s;
  bad.options = {"a"};
  CHECK_ERROR_CODE(validate(bad), ErrorCode::kMalformedSample);
  bad = s;
  bad.is_negative = true;
  CHECK_ERROR_CODE(validate(bad), ErrorCode::kMalformedSample);  // negative must be SE with no GT
  QASample neg;
  neg.sample_id = "n";
  neg.video_id = "v";
  neg.subtask = Subtask::kSE;
  neg.query.text = "Does the woman in red appear?";
  neg.options = {std::string(kYes), std::string(kNo)};
  neg.answer_index = 1;
  neg.is_negative = true;
  CHECK_NOTHROW(validate(neg));
  neg.answer_index = 0;
  CHECK_ERROR_CODE(validate(neg), ErrorCode::kMalformedSample);
}

TEST_CASE("subtask names round-trip") {
  for (auto s : kAllSubtasks) CHECK(parse_subtask(subtask_name(s)) == s);
  CHECK_ERROR_CODE(parse_subtask("XX"), ErrorCode::kInvalidArgument);
  CHECK(is_person_specific(Subtask::kSE));
  CHECK_FALSE(is_person_specific(Subtask::kCT));
  CHECK_FALSE(is_person_specific(Subtask::kAN));
}

TEST_CASE("JSON encodings round-trip") {
  auto s = sample_fixture();
  s.query.image = ImageRef{"", "\x89PNG bytes"};
  CHECK(Json(s).get<QASample>() == s);
  CHECK(Json(s)["query"]["modality"] == "image_text");

  Clip c;
  c.clip_id = "v/t0001/c00";
  c.camera_id = "cam1";
  c.video_id = "v";
  c.span = {1.0, 2.0};
  c.boxes = {{30, {1, 2, 3, 4}}, {31, {2, 2, 3, 4}}};
  c.frame_indices = {30, 31};
  c.frame_count = 2;
  CHECK(Json(c).get<Clip>() == c);
  CHECK(Json(c)["mode"] == "person_centric");

  Prediction p;
  p.sample_id = "s1";
  p.predicted_intervals = IntervalSet{{3, 9}};
  CHECK(Json(p)["chosen_index"].is_null());
  CHECK(Json(p).get<Prediction>() == p);
  p.chosen_index = 1;
  CHECK(Json(p).get<Prediction>() == p);

  Detection d{"v", 12, 0.4, {1, 2, 3, 4}, 0.8, "person"};
  CHECK(Json(d).get<Detection>() == d);
  EmbeddingRecord r{"c", {0.5f, -0.25f}, 2.0};
  CHECK(Json(r).get<EmbeddingRecord>() == r);
}

TEST_CASE("JSONL reader reports the failing line") {
  try {
    parse_jsonl("{\"a\":1}\n\n{\"b\":2}\n{oops\n");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  CHECK(parse_jsonl("{\"a\":1}\n\n{\"b\":2}\n").size() == 2);
  const auto dir = std::filesystem::temp_directory_path() / "fs_core_jsonl";
  std::filesystem::remove_all(dir);
  write_jsonl(dir / "nested" / "x.jsonl", {Json{{"k", 1}}, Json{{"k", 2}}});
  CHECK(read_jsonl(dir / "nested" / "x.jsonl").size() == 2);
  CHECK_ERROR_CODE(read_file(dir / "missing"), ErrorCode::kIo);
}

TEST_CASE("digests match published test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_decode("Zm9vYmE=") == "fooba");
  CHECK(base64_decode(base64_encode(std::string("\0\1\2\xff", 4))) == std::string("\0\1\2\xff", 4));
  CHECK_ERROR_CODE(base64_decode("Zm9v!!"), ErrorCode::kInvalidArgument);
  CHECK(stable_hash64("x") == stable_hash64("x"));
  CHECK(stable_hash64("x") != stable_hash64("y"));
}

TEST_CASE("error codes") {
  CHECK(Error(ErrorCode::kEncoderUnavailable, "x").retriable());
  CHECK(Error(ErrorCode::kVlmUnavailable, "x").retriable());
  CHECK_FALSE(Error(ErrorCode::kCorruptIndex, "x").retriable());
  CHECK(std::string(Error(ErrorCode::kCorruptIndex, "boom").what()).find("boom") != std::string::npos);
}

TEST_CASE("prompt assets") {
  const auto names = prompt_asset_names();
  CHECK(std::find(names.begin(), names.end(), "vlm_system_v1") != names.end());
  CHECK(prompt_asset("vlm_system_v1").find("\"intervals\"") != std::string_view::npos);
  CHECK_ERROR_CODE(prompt_asset("nope"), ErrorCode::kInvalidArgument);
  CHECK(fill_template("a {{x}} b {{x}} {{y}}", {{"x", "1"}}) == "a 1 b 1 {{y}}");
}
