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

#include <filesystem>
#include <sstream>

#include "../support/check.hpp"
#include "../support/gen.hpp"
#include "foresearch/evalkit/evalkit.hpp"

using namespace foresearch;
using namespace foresearch::evalkit;

namespace {

QASample make_sample(fstest::Gen& g, const std::string& id) {
  QASample s;
  s.sample_id = id;
  s.video_id = "v" + std::to_string(g.integer(0, 5));
  s.subtask = kAllSubtasks[g.integer(0, 5)];
  s.query.text = "question " + id;
  if (s.subtask == Subtask::kSE && g.coin(0.4)) {
    s.options = {std::string(kYes), std::string(kNo)};
    s.answer_index = 1;
    s.is_negative = true;
    return s;
  }
  const auto n = s.subtask == Subtask::kSE ? 2 : g.integer(3, 4);
  for (std::int64_t i = 0; i < n; ++i) s.options.push_back("opt" + std::to_string(i));
  s.answer_index = static_cast<int>(g.integer(0, n - 1));
  std::vector<TimeInterval> gt;
  const auto parts = g.integer(1, 3);
  for (std::int64_t i = 0; i < parts; ++i) {
    auto iv = g.interval(100);
    if (iv.length() == 0) iv.end += 1;
    gt.push_back(iv);
  }
  s.ground_truth = canonicalize(gt);
  return s;
}

Prediction own_truth(const QASample& s) {
  return {s.sample_id, s.answer_index, s.ground_truth, ""};
}

QASample negative() {
  QASample s;
  s.sample_id = "neg";
  s.video_id = "v";
  s.subtask = Subtask::kSE;
  s.query.text = "Does the woman in red appear?";
  s.options = {std::string(kYes), std::string(kNo)};
  s.answer_index = 1;
  s.is_negative = true;
  return s;
}

}  // namespace

TEST_CASE("scoring conventions") {
  QASample s;
  s.sample_id = "p";
  s.subtask = Subtask::kAC;
  s.options = {"a", "b", "c", "d"};
  s.answer_index = 1;
  s.ground_truth = IntervalSet{{10, 20}};

  auto r = score_sample(s, {"p", 1, IntervalSet{{10, 20}}, ""});
  CHECK(r.correct);
  CHECK(r.tiou == 1.0);
  r = score_sample(s, {"p", 0, IntervalSet{{30, 40}}, ""});
  CHECK_FALSE(r.correct);
  CHECK(r.tiou == 0.0);
  s.ground_truth = IntervalSet{{0, 10}};
  CHECK(score_sample(s, {"p", 1, IntervalSet{{5, 15}}, ""}).tiou == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  r = score_sample(s, {"p", std::nullopt, IntervalSet{{0, 10}}, "garbled"});
  CHECK_FALSE(r.correct);
  CHECK(r.tiou == 0.0);

  const auto n = negative();
  r = score_sample(n, {"neg", 1, {}, ""});
  CHECK(r.correct);
  CHECK(r.tiou == 1.0);
  r = score_sample(n, {"neg", 0, IntervalSet{{5, 9}}, ""});
  CHECK_FALSE(r.correct);
  CHECK(r.tiou == 0.0);
  // Correct choice but spurious intervals still predicts presence.
  r = score_sample(n, {"neg", 1, IntervalSet{{5, 9}}, ""});
  CHECK(r.correct);
  CHECK(r.tiou == 0.0);
  r = score_sample(n, {"neg", 0, {}, ""});
  CHECK(r.tiou == 0.0);

  CHECK_ERROR_CODE(score_sample(n, {"other", 1, {}, ""}), ErrorCode::kSampleMismatch);
}

TEST_CASE("Top-K@IoU worked examples") {
  const IntervalSet gt{{4, 10}};
  const std::vector<TimeInterval> one{{0, 5}};
  CHECK(topk_at_iou(one, gt, 1, 0.0));
  CHECK_FALSE(topk_at_iou(one, gt, 1, 0.3));
  const std::vector<TimeInterval> two{{50, 60}, {4, 10}};
  CHECK_FALSE(topk_at_iou(two, gt, 1, 0.0));
  CHECK(topk_at_iou(two, gt, 2, 0.0));
  // Touching spans have zero-measure overlap.
  const std::vector<TimeInterval> touch{{10, 12}};
  CHECK_FALSE(topk_at_iou(touch, gt, 1, 0.0));
  // Strict comparison above zero.
  const std::vector<TimeInterval> third{{4, 6}};
  CHECK(interval_set_iou(IntervalSet{{4, 6}}, IntervalSet{{4, 10}}) == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(topk_at_iou(third, IntervalSet{{4, 10}}, 1, 1.0 / 3.0));
}

TEST_CASE("property: Top-K@tau is monotone") {
  const std::vector<double> taus{0.0, 0.1, 0.3, 0.5};
  const std::vector<std::size_t> ks{1, 3, 5, 10};
  fstest::for_all(500, 41, [&](fstest::Gen& g) {
    std::vector<TimeInterval> spans;
    const auto n = g.integer(0, 12);
    for (std::int64_t i = 0; i < n; ++i) spans.push_back(g.interval(60));
    std::vector<TimeInterval> gtv;
    for (std::int64_t i = 0, m = g.integer(1, 3); i < m; ++i) gtv.push_back(g.interval(60));
    const auto gt = canonicalize(gtv);
    for (std::size_t a = 0; a < ks.size(); ++a) {
      for (std::size_t t = 0; t < taus.size(); ++t) {
        const bool v = topk_at_iou(spans, gt, ks[a], taus[t]);
        if (t > 0 && v) CHECK(topk_at_iou(spans, gt, ks[a], taus[t - 1]));
        if (a > 0 && topk_at_iou(spans, gt, ks[a - 1], taus[t])) CHECK(v);
      }
    }
  });
}

TEST_CASE("property: own ground truth scores perfectly") {
  fstest::for_all(100, 42, [](fstest::Gen& g) {
    std::vector<QASample> samples;
    std::vector<Prediction> preds;
    for (std::int64_t i = 0, n = g.integer(1, 40); i < n; ++i) {
      samples.push_back(make_sample(g, "s" + std::to_string(i)));
      CHECK_NOTHROW(validate(samples.back()));
      preds.push_back(own_truth(samples.back()));
      const auto sc = score_sample(samples.back(), preds.back());
      CHECK(sc.correct);
      CHECK(sc.tiou == 1.0);
    }
    const auto report = run_benchmark(samples, preds);
    CHECK(report.overall.accuracy == 100.0);
    CHECK(report.overall.mean_iou == doctest::Approx(100.0));
  });
}

TEST_CASE("property: aggregate invariants") {
  fstest::for_all(100, 43, [](fstest::Gen& g) {
    std::vector<QASample> samples;
    std::vector<Prediction> preds;
    for (std::int64_t i = 0, n = g.integer(0, 60); i < n; ++i) {
      auto s = make_sample(g, "s" + std::to_string(i));
      Prediction p{s.sample_id, std::nullopt, {}, ""};
      if (g.coin(0.9)) p.chosen_index = static_cast<int>(g.integer(0, static_cast<std::int64_t>(s.options.size()) - 1));
      if (g.coin(0.7)) p.predicted_intervals = IntervalSet{g.interval(100)};
      const auto sc = score_sample(s, p);
      CHECK(sc.tiou >= 0.0);
      CHECK(sc.tiou <= 1.0);
      samples.push_back(s);
      if (g.coin(0.95)) preds.push_back(p);
    }
    const auto r = run_benchmark(samples, preds);
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& [name, st] : r.subtasks) {
      CHECK(st.accuracy >= 0.0);
      CHECK(st.accuracy <= 100.0);
      weighted += st.accuracy * static_cast<double>(st.count);
      total += st.count;
    }
    CHECK(total == samples.size());
    CHECK(r.overall.count == samples.size());
    if (total > 0) CHECK(r.overall.accuracy == doctest::Approx(weighted / static_cast<double>(total)));
    CHECK(r.missing_predictions == samples.size() - preds.size());
    // Scoring is pure: same inputs, same bytes, whatever the order of predictions.
    auto shuffled = preds;
    std::shuffle(shuffled.begin(), shuffled.end(), g.rng());
    CHECK(emit_report(run_benchmark(samples, shuffled), ReportFormat::kJson) ==
          emit_report(r, ReportFormat::kJson));
  });
}

TEST_CASE("always choosing option 0 scores the share of answers at index 0") {
  fstest::Gen g(44);
  std::vector<QASample> samples;
  std::vector<Prediction> preds;
  std::size_t zeros = 0;
  for (int i = 0; i < 400; ++i) {
    QASample s;
    s.sample_id = "s" + std::to_string(i);
    s.video_id = "v";
    s.subtask = Subtask::kEV;
    s.query.text = "q";
    s.options = {"a", "b", "c", "d"};
    s.answer_index = static_cast<int>(g.integer(0, 3));
    s.ground_truth = IntervalSet{{1, 2}};
    zeros += s.answer_index == 0;
    samples.push_back(s);
    preds.push_back({s.sample_id, 0, {}, ""});
  }
  const auto r = run_benchmark(samples, preds);
  CHECK(r.overall.accuracy == doctest::Approx(100.0 * static_cast<double>(zeros) / 400.0));
  CHECK(r.overall.accuracy > 20.0);
  CHECK(r.overall.accuracy < 30.0);
}

TEST_CASE("empty suites produce zero counts") {
  const auto r = run_benchmark(std::vector<QASample>{}, std::vector<Prediction>{});
  CHECK(r.overall.count == 0);
  CHECK(r.overall.accuracy == 0.0);
  CHECK(r.subtasks.size() == 6);
  const auto live = run_benchmark(std::vector<QASample>{}, SystemFn([](const QASample&) { return SystemOutput{}; }));
  CHECK(live.latency.has_value());
  CHECK(live.latency->count == 0);
}

TEST_CASE("live runs skip missing videos, fill the retrieval matrix and record latency") {
  fstest::Gen g(45);
  std::vector<QASample> samples;
  for (int i = 0; i < 30; ++i) {
    auto s = make_sample(g, "s" + std::to_string(100 + i));
    samples.push_back(s);
  }
  samples[3].video_id = "gone";
  SystemFn system = [](const QASample& s) {
    if (s.video_id == "gone") throw Error(ErrorCode::kMissingVideo, s.video_id);
    SystemOutput out;
    out.prediction = own_truth(s);
    std::vector<vecindex::SearchHit> hits(2);
    hits[0].clip.span = {200, 210};
    hits[1].clip.span = s.ground_truth.empty() ? TimeInterval{0, 1} : s.ground_truth.hull();
    out.hits = hits;
    out.retrieval_ms = 2.0;
    out.total_ms = 5.0;
    return out;
  };
  EvalConfig cfg;
  cfg.workers = 3;
  std::vector<SampleResult> details;
  const auto r = run_benchmark(samples, system, cfg, &details);
  CHECK(r.skipped_missing_video == 1);
  CHECK(r.overall.count == 29);
  CHECK(details.size() == 29);
  CHECK(std::is_sorted(details.begin(), details.end(),
                       [](const SampleResult& a, const SampleResult& b) { return a.sample_id < b.sample_id; }));
  REQUIRE(r.latency.has_value());
  CHECK(r.latency->retrieval_ms == doctest::Approx(2.0));
  CHECK(r.retrieval[0][0] == 0.0);    // rank 1 always misses
  CHECK(r.retrieval[1][0] == 100.0);  // rank 2 always overlaps
  std::size_t with_gt = 0;
  for (const auto& s : samples) with_gt += s.video_id != "gone" && !s.ground_truth.empty();
  CHECK(r.retrieval_count == with_gt);

  EvalConfig only;
  only.subtask_filter = std::set<Subtask>{Subtask::kCT};
  const auto filtered = run_benchmark(samples, system, only);
  CHECK(filtered.overall.count == filtered.subtasks.at("CT").count);
}

TEST_CASE("report formats") {
  fstest::Gen g(46);
  std::vector<QASample> samples;
  std::vector<Prediction> preds;
  for (int i = 0; i < 25; ++i) {
    samples.push_back(make_sample(g, "s" + std::to_string(i)));
    preds.push_back({samples.back().sample_id, 0, IntervalSet{{1, 3}}, ""});
  }
  auto r = run_benchmark(samples, preds);
  r.latency = Latency{3, 1.5, 2.5, 3.5, 4.5};
  r.retrieval_count = 2;
  r.retrieval[1][2] = 50.0;
  const auto json = emit_report(r, ReportFormat::kJson);
  CHECK(Json::parse(json).get<EvalReport>() == r);
  CHECK(Json::parse(json)["schema"] == "foreseaqa-report/1");

  const auto md = emit_report(r, ReportFormat::kMarkdown);
  for (auto s : kAllSubtasks) CHECK(md.find("| " + std::string(subtask_name(s)) + " |") != std::string::npos);
  CHECK(md.find("| Avg |") != std::string::npos);

  const auto csv = emit_report(r, ReportFormat::kCsv);
  std::istringstream in(csv);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 3);
    ++rows;
  }
  CHECK(rows == 8);
  CHECK(parse_report_format("md") == ReportFormat::kMarkdown);
  CHECK_ERROR_CODE(parse_report_format("xml"), ErrorCode::kInvalidArgument);
  auto bad = Json::parse(json);
  bad["schema"] = "other/2";
  CHECK_ERROR_CODE(bad.get<EvalReport>(), ErrorCode::kSchemaViolation);
}

TEST_CASE("config validation") {
  EvalConfig c;
  c.thresholds = {0.3, 0.1};
  CHECK_ERROR_CODE(c.validate(), ErrorCode::kInvalidArgument);
  c.thresholds = {1.0};
  CHECK_ERROR_CODE(c.validate(), ErrorCode::kInvalidArgument);
  c = {};
  c.ks = {0};
  CHECK_ERROR_CODE(c.validate(), ErrorCode::kInvalidArgument);
  c = {};
  c.subtask_filter = std::set<Subtask>{Subtask::kAN};
  CHECK(Json(c).get<EvalConfig>().subtask_filter == c.subtask_filter);
}

TEST_CASE("sample loading counts malformed lines") {
  const auto dir = std::filesystem::temp_directory_path() / "fs_evalkit_load";
  std::filesystem::create_directories(dir);
  auto s = negative();
  auto broken = s;
  broken.answer_index = 0;  // negatives must answer "No"
  broken.sample_id = "b";
  write_file(dir / "b.jsonl", Json(s).dump() + "\n{not json\n" + Json(broken).dump() + "\n{\"sample_id\": 1}\n");
  const auto loaded = load_samples(dir / "b.jsonl");
  CHECK(loaded.samples.size() == 1);
  CHECK(loaded.malformed == 3);
}
