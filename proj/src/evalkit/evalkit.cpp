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

#include "foresearch/evalkit/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "foresearch/core/error.hpp"

namespace foresearch::evalkit {

void EvalConfig::validate() const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0 && thresholds[i] < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "IoU thresholds must lie in [0,1)");
    }
    if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument, "IoU thresholds must be ascending");
    }
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
    if (i > 0 && ks[i] <= ks[i - 1]) throw Error(ErrorCode::kInvalidArgument, "ks must be ascending");
  }
  if (workers == 0) throw Error(ErrorCode::kInvalidArgument, "workers must be positive");
}

void to_json(Json& j, const EvalConfig& v) {
  j = Json{{"thresholds", v.thresholds}, {"ks", v.ks}, {"workers", v.workers}};
  if (v.subtask_filter) {
    Json names = Json::array();
    for (auto s : *v.subtask_filter) names.push_back(subtask_name(s));
    j["subtask_filter"] = names;
  } else {
    j["subtask_filter"] = nullptr;
  }
}

void from_json(const Json& j, EvalConfig& v) {
  EvalConfig d;
  v.thresholds = j.value("thresholds", d.thresholds);
  v.ks = j.value("ks", d.ks);
  v.workers = j.value("workers", d.workers);
  v.subtask_filter.reset();
  if (j.contains("subtask_filter") && j["subtask_filter"].is_array()) {
    std::set<Subtask> filter;
    for (const auto& n : j["subtask_filter"]) filter.insert(parse_subtask(n.get<std::string>()));
    v.subtask_filter = std::move(filter);
  }
}

SampleScore score_sample(const QASample& sample, const Prediction& pred) {
  if (sample.sample_id != pred.sample_id) {
    throw Error(ErrorCode::kSampleMismatch,
                "prediction " + pred.sample_id + " scored against sample " + sample.sample_id);
  }
  if (!pred.chosen_index) return {false, 0.0};
  SampleScore s;
  s.correct = *pred.chosen_index == sample.answer_index;
  if (sample.is_negative) {
    const bool presence = !s.correct || !pred.predicted_intervals.empty();
    s.tiou = presence ? 0.0 : 1.0;
  } else {
    s.tiou = interval_set_iou(pred.predicted_intervals, sample.ground_truth);
  }
  return s;
}

bool topk_at_iou(std::span<const TimeInterval> ranked_spans, const IntervalSet& gt, std::size_t k,
                 double tau) {
  const std::size_t n = std::min(k, ranked_spans.size());
  for (std::size_t i = 0; i < n; ++i) {
    const IntervalSet span{ranked_spans[i]};
    if (tau == 0.0) {
      if (intersection_measure(span, gt) > 0.0) return true;
    } else if (interval_set_iou(span, gt) > tau) {
      return true;
    }
  }
  return false;
}

bool topk_at_iou(std::span<const vecindex::SearchHit> hits, const IntervalSet& gt, std::size_t k,
                 double tau) {
  std::vector<TimeInterval> spans;
  spans.reserve(hits.size());
  for (const auto& h : hits) spans.push_back(h.clip.span);
  return topk_at_iou(spans, gt, k, tau);
}

void to_json(Json& j, const EvalReport& v) {
  auto stats = [](const Stats& s) {
    return Json{{"count", s.count}, {"accuracy", s.accuracy}, {"mean_iou", s.mean_iou}};
  };
  Json subtasks = Json::object();
  for (const auto& [name, s] : v.subtasks) subtasks[name] = stats(s);
  j = Json{{"schema", v.schema},
           {"subtasks", subtasks},
           {"overall", stats(v.overall)},
           {"retrieval",
            {{"ks", v.ks},
             {"thresholds", v.thresholds},
             {"matrix", v.retrieval},
             {"count", v.retrieval_count}}},
           {"skipped", {{"malformed", v.skipped_malformed}, {"missing_video", v.skipped_missing_video}}},
           {"missing_predictions", v.missing_predictions}};
  if (v.latency) {
    j["latency"] = {{"count", v.latency->count},
                    {"retrieval_ms", v.latency->retrieval_ms},
                    {"generation_ttft_ms", v.latency->generation_ttft_ms},
                    {"generation_ms", v.latency->generation_ms},
                    {"total_ms", v.latency->total_ms}};
  } else {
    j["latency"] = nullptr;
  }
}

void from_json(const Json& j, EvalReport& v) {
  auto stats = [](const Json& s) {
    return Stats{s.at("count").get<std::size_t>(), s.at("accuracy").get<double>(),
                 s.at("mean_iou").get<double>()};
  };
  v.schema = j.at("schema").get<std::string>();
  if (v.schema != kReportSchema) {
    throw Error(ErrorCode::kSchemaViolation, "unsupported report schema '" + v.schema + "'");
  }
  v.subtasks.clear();
  for (const auto& [name, s] : j.at("subtasks").items()) v.subtasks[name] = stats(s);
  v.overall = stats(j.at("overall"));
  const auto& r = j.at("retrieval");
  v.ks = r.at("ks").get<std::vector<std::size_t>>();
  v.thresholds = r.at("thresholds").get<std::vector<double>>();
  v.retrieval = r.at("matrix").get<std::vector<std::vector<double>>>();
  v.retrieval_count = r.at("count").get<std::size_t>();
  v.skipped_malformed = j.at("skipped").at("malformed").get<std::size_t>();
  v.skipped_missing_video = j.at("skipped").at("missing_video").get<std::size_t>();
  v.missing_predictions = j.value("missing_predictions", std::size_t{0});
  v.latency.reset();
  if (j.contains("latency") && !j["latency"].is_null()) {
    const auto& l = j["latency"];
    v.latency = Latency{l.at("count").get<std::size_t>(), l.at("retrieval_ms").get<double>(),
                        l.at("generation_ttft_ms").get<double>(), l.at("generation_ms").get<double>(),
                        l.at("total_ms").get<double>()};
  }
}

LoadedSamples parse_samples(const std::vector<Json>& rows) {
  LoadedSamples out;
  for (const auto& row : rows) {
    try {
      auto s = row.get<QASample>();
      validate(s);
      out.samples.push_back(std::move(s));
    } catch (const std::exception&) {
      ++out.malformed;
    }
  }
  return out;
}

LoadedSamples load_samples(const std::filesystem::path& path) {
  const auto text = read_file(path);
  std::vector<Json> rows;
  std::size_t bad_lines = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      auto j = Json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        ++bad_lines;
      } else {
        rows.push_back(std::move(j));
      }
    }
    start = end + 1;
  }
  auto out = parse_samples(rows);
  out.malformed += bad_lines;
  return out;
}

namespace {

struct Slot {
  bool evaluated = false;
  bool missing_video = false;
  bool has_latency = false;
  SystemOutput output;
};

std::vector<std::vector<bool>> topk_matrix(const std::vector<vecindex::SearchHit>& hits,
                                           const IntervalSet& gt, const EvalConfig& cfg) {
  std::vector<std::vector<bool>> m(cfg.ks.size(), std::vector<bool>(cfg.thresholds.size()));
  for (std::size_t i = 0; i < cfg.ks.size(); ++i) {
    for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
      m[i][t] = topk_at_iou(hits, gt, cfg.ks[i], cfg.thresholds[t]);
    }
  }
  return m;
}

EvalReport aggregate(std::span<const QASample> samples, std::vector<Slot>& slots,
                     const EvalConfig& cfg, bool live, std::vector<SampleResult>* details) {
  EvalReport report;
  report.ks = cfg.ks;
  report.thresholds = cfg.thresholds;
  report.retrieval.assign(cfg.ks.size(), std::vector<double>(cfg.thresholds.size(), 0.0));

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (slots[i].evaluated) order.push_back(i);
    if (slots[i].missing_video) ++report.skipped_missing_video;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].sample_id < samples[b].sample_id;
  });

  struct Acc {
    std::size_t n = 0, correct = 0;
    double iou = 0.0;
  };
  std::map<Subtask, Acc> per;
  Acc all;
  std::vector<std::vector<std::size_t>> hits(cfg.ks.size(), std::vector<std::size_t>(cfg.thresholds.size()));
  Latency lat;
  for (auto i : order) {
    const auto& sample = samples[i];
    const auto& out = slots[i].output;
    SampleResult r;
    r.sample_id = sample.sample_id;
    r.subtask = sample.subtask;
    r.score = score_sample(sample, out.prediction);
    r.frames_sent = out.frames_sent;
    r.prediction = out.prediction;
    auto& acc = per[sample.subtask];
    for (Acc* a : {&acc, &all}) {
      ++a->n;
      a->correct += r.score.correct ? 1 : 0;
      a->iou += r.score.tiou;
    }
    if (out.hits && !sample.ground_truth.empty()) {
      r.topk = topk_matrix(*out.hits, sample.ground_truth, cfg);
      ++report.retrieval_count;
      for (std::size_t a = 0; a < cfg.ks.size(); ++a) {
        for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) hits[a][t] += r.topk[a][t] ? 1 : 0;
      }
    }
    if (live) {
      ++lat.count;
      lat.retrieval_ms += out.retrieval_ms;
      lat.generation_ttft_ms += out.ttft_ms;
      lat.generation_ms += out.generation_ms;
      lat.total_ms += out.total_ms;
    }
    if (details) details->push_back(std::move(r));
  }

  auto stats = [](const Acc& a) {
    Stats s;
    s.count = a.n;
    if (a.n > 0) {
      s.accuracy = 100.0 * static_cast<double>(a.correct) / static_cast<double>(a.n);
      s.mean_iou = 100.0 * a.iou / static_cast<double>(a.n);
    }
    return s;
  };
  for (auto s : kAllSubtasks) report.subtasks[std::string(subtask_name(s))] = stats(per[s]);
  report.overall = stats(all);
  if (report.retrieval_count > 0) {
    for (std::size_t a = 0; a < cfg.ks.size(); ++a) {
      for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
        report.retrieval[a][t] =
            100.0 * static_cast<double>(hits[a][t]) / static_cast<double>(report.retrieval_count);
      }
    }
  }
  if (live) {
    if (lat.count > 0) {
      const auto n = static_cast<double>(lat.count);
      lat.retrieval_ms /= n;
      lat.generation_ttft_ms /= n;
      lat.generation_ms /= n;
      lat.total_ms /= n;
    }
    report.latency = lat;
  }
  return report;
}

bool selected(const QASample& s, const EvalConfig& cfg) {
  return !cfg.subtask_filter || cfg.subtask_filter->contains(s.subtask);
}

}  // namespace

EvalReport run_benchmark(std::span<const QASample> samples, const SystemFn& system,
                         const EvalConfig& cfg, std::vector<SampleResult>* details) {
  cfg.validate();
  std::vector<Slot> slots(samples.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      if (!selected(samples[i], cfg)) continue;
      try {
        slots[i].output = system(samples[i]);
        slots[i].output.prediction.sample_id = samples[i].sample_id;
        slots[i].evaluated = true;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kMissingVideo) {
          slots[i].missing_video = true;
          continue;
        }
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::min(cfg.workers, std::max<std::size_t>(1, samples.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return aggregate(samples, slots, cfg, true, details);
}

EvalReport run_benchmark(std::span<const QASample> samples, std::span<const Prediction> predictions,
                         const EvalConfig& cfg, std::vector<SampleResult>* details) {
  cfg.validate();
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.sample_id, &p);
  std::vector<Slot> slots(samples.size());
  std::size_t missing = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!selected(samples[i], cfg)) continue;
    slots[i].evaluated = true;
    auto it = by_id.find(samples[i].sample_id);
    if (it == by_id.end()) {
      ++missing;
      slots[i].output.prediction.sample_id = samples[i].sample_id;
    } else {
      slots[i].output.prediction = *it->second;
    }
  }
  auto report = aggregate(samples, slots, cfg, false, details);
  report.missing_predictions = missing;
  return report;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  if (name == "csv") return ReportFormat::kCsv;
  throw Error(ErrorCode::kInvalidArgument, "unknown report format '" + std::string(name) + "'");
}

namespace {

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string emit_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson:
      return Json(report).dump(2) + "\n";
    case ReportFormat::kMarkdown: {
      std::string out = "| Subtask | N | Acc | IoU |\n|---|---:|---:|---:|\n";
      auto row = [&](const std::string& name, const Stats& s) {
        out += "| " + name + " | " + std::to_string(s.count) + " | " +
               (s.count ? fixed1(s.accuracy) : "-") + " | " + (s.count ? fixed1(s.mean_iou) : "-") +
               " |\n";
      };
      for (auto s : kAllSubtasks) {
        const std::string name(subtask_name(s));
        auto it = report.subtasks.find(name);
        row(name, it == report.subtasks.end() ? Stats{} : it->second);
      }
      row("Avg", report.overall);
      if (report.retrieval_count > 0) {
        out += "\n| Top-K |";
        for (double t : report.thresholds) out += " IoU>" + fixed1(t) + " |";
        out += "\n|---|";
        for (std::size_t t = 0; t < report.thresholds.size(); ++t) out += "---:|";
        out += "\n";
        for (std::size_t a = 0; a < report.ks.size(); ++a) {
          out += "| Top" + std::to_string(report.ks[a]) + " |";
          for (double v : report.retrieval[a]) out += " " + fixed1(v) + " |";
          out += "\n";
        }
      }
      return out;
    }
    case ReportFormat::kCsv: {
      std::string out = "subtask,count,accuracy,mean_iou\n";
      auto row = [&](const std::string& name, const Stats& s) {
        out += name + "," + std::to_string(s.count) + "," + fixed4(s.accuracy) + "," +
               fixed4(s.mean_iou) + "\n";
      };
      for (auto s : kAllSubtasks) {
        const std::string name(subtask_name(s));
        auto it = report.subtasks.find(name);
        row(name, it == report.subtasks.end() ? Stats{} : it->second);
      }
      row("Avg", report.overall);
      return out;
    }
  }
  return {};
}

}  // namespace foresearch::evalkit
