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

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "foresearch/core/json.hpp"
#include "foresearch/core/types.hpp"
#include "foresearch/vecindex/index.hpp"

namespace foresearch::evalkit {

inline constexpr std::string_view kReportSchema = "foreseaqa-report/1";

struct EvalConfig {
  std::vector<double> thresholds{0.0, 0.1, 0.3};
  std::vector<std::size_t> ks{1, 3, 5, 10};
  std::optional<std::set<Subtask>> subtask_filter;
  std::size_t workers = 4;

  // Thresholds in [0,1) ascending; ks positive ascending.
  void validate() const;
};

void to_json(Json& j, const EvalConfig& v);
void from_json(const Json& j, EvalConfig& v);

struct SampleScore {
  bool correct = false;
  double tiou = 0.0;
};

// Throws SampleMismatch when the ids differ.
SampleScore score_sample(const QASample& sample, const Prediction& pred);

// tau == 0: any positive-measure overlap among the first k spans.
// tau > 0: some span has IoU with gt strictly above tau.
bool topk_at_iou(std::span<const TimeInterval> ranked_spans, const IntervalSet& gt, std::size_t k,
                 double tau);
bool topk_at_iou(std::span<const vecindex::SearchHit> hits, const IntervalSet& gt, std::size_t k,
                 double tau);

struct Stats {
  std::size_t count = 0;
  double accuracy = 0.0;  // percent
  double mean_iou = 0.0;  // percent

  bool operator==(const Stats&) const = default;
};

struct Latency {
  std::size_t count = 0;
  double retrieval_ms = 0.0;
  double generation_ttft_ms = 0.0;
  double generation_ms = 0.0;
  double total_ms = 0.0;

  bool operator==(const Latency&) const = default;
};

struct EvalReport {
  std::string schema = std::string(kReportSchema);
  std::map<std::string, Stats> subtasks;  // keyed by subtask name; every subtask present
  Stats overall;
  std::vector<std::size_t> ks;
  std::vector<double> thresholds;
  // retrieval[i][j] = Top-ks[i]@thresholds[j] in percent, over retrieval_count samples.
  std::vector<std::vector<double>> retrieval;
  std::size_t retrieval_count = 0;
  std::optional<Latency> latency;
  std::size_t skipped_malformed = 0;
  std::size_t skipped_missing_video = 0;
  std::size_t missing_predictions = 0;

  bool operator==(const EvalReport&) const = default;
};

void to_json(Json& j, const EvalReport& v);
void from_json(const Json& j, EvalReport& v);

// What a live system returns for one sample.
struct SystemOutput {
  Prediction prediction;
  std::optional<std::vector<vecindex::SearchHit>> hits;
  std::size_t frames_sent = 0;
  double retrieval_ms = 0.0;
  double ttft_ms = 0.0;
  double generation_ms = 0.0;
  double total_ms = 0.0;
};

using SystemFn = std::function<SystemOutput(const QASample&)>;

struct SampleResult {
  std::string sample_id;
  Subtask subtask = Subtask::kSE;
  SampleScore score;
  std::size_t frames_sent = 0;
  std::vector<std::vector<bool>> topk;  // same shape as the report matrix; empty without hits
  Prediction prediction;
};

struct LoadedSamples {
  std::vector<QASample> samples;
  std::size_t malformed = 0;
};

// Lines that fail to decode or validate are counted, not fatal.
LoadedSamples load_samples(const std::filesystem::path& path);
LoadedSamples parse_samples(const std::vector<Json>& rows);

// Live run. Samples are evaluated on cfg.workers threads; a MissingVideo from
// the system skips the sample. Aggregation runs over samples sorted by id.
EvalReport run_benchmark(std::span<const QASample> samples, const SystemFn& system,
                         const EvalConfig& cfg = {}, std::vector<SampleResult>* details = nullptr);

// Offline run against recorded predictions. Samples without a prediction
// score as unparsed.
EvalReport run_benchmark(std::span<const QASample> samples, std::span<const Prediction> predictions,
                         const EvalConfig& cfg = {}, std::vector<SampleResult>* details = nullptr);

enum class ReportFormat { kJson, kMarkdown, kCsv };

ReportFormat parse_report_format(std::string_view name);
std::string emit_report(const EvalReport& report, ReportFormat format);

}  // namespace foresearch::evalkit
