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

#include "foresearch/service/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <ctime>
#include <deque>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include "foresearch/core/digest.hpp"
#include "foresearch/core/error.hpp"
#include "foresearch/encoder/sampling.hpp"
#include "foresearch/evalkit/evalkit.hpp"
#include "foresearch/evalkit/live.hpp"
#include "foresearch/orchestrator/pipeline.hpp"
#include "foresearch/qaengine/engine.hpp"
#include "foresearch/tracklet/clips.hpp"
#include "foresearch/vecindex/index.hpp"

namespace foresearch::service {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::string percent_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

// Write-then-rename so readers never see a half-written file.
void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, content);
  fs::rename(tmp, path);
}

void append_line(const fs::path& path, const Json& row) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  out << row.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path.string());
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidQuery:
    case ErrorCode::kMalformedSample:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kOutOfOrderFrames:
    case ErrorCode::kSampleMismatch: return 400;
    case ErrorCode::kMissingVideo: return 404;
    case ErrorCode::kDuplicateClipId: return 409;
    case ErrorCode::kEncoderUnavailable:
    case ErrorCode::kLlmUnavailable:
    case ErrorCode::kLmmUnavailable: return 503;
    case ErrorCode::kVlmUnavailable: return 502;
    default: return 500;
  }
}

// Raised inside handlers to produce an error response.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void fail(int status, std::string code, std::string message) {
  throw HttpError{status, std::move(code), std::move(message)};
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
  send_json(res, status, {{"error", {{"code", code}, {"message", msg}}}});
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) fail(400, "InvalidArgument", "request body is empty");
  auto body = Json::parse(req.body, nullptr, false);
  if (body.is_discarded()) fail(400, "InvalidArgument", "request body is not valid JSON");
  if (!body.is_object()) fail(400, "InvalidArgument", "request body must be a JSON object");
  return body;
}

const char* content_type_for(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".json") return "application/json";
  if (ext == ".jsonl") return "application/x-ndjson";
  return "application/octet-stream";
}

class Logger {
 public:
  explicit Logger(std::ostream* out) : out_(out ? out : &std::cerr) {}

  void log(Json event) {
    event["ts"] = utc_now();
    const auto line = event.dump();
    std::lock_guard lock(mu_);
    *out_ << line << '\n';
    out_->flush();
  }

 private:
  std::mutex mu_;
  std::ostream* out_;
};

class WorkerPool {
 public:
  explicit WorkerPool(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) threads_.emplace_back([this] { loop(); });
  }
  ~WorkerPool() { shutdown(); }

  void submit(std::function<void()> task) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

  void drain() {
    std::unique_lock lock(mu_);
    idle_.wait(lock, [&] { return queue_.empty() && active_ == 0; });
  }

  // Running tasks finish; queued ones are dropped (the journal resumes them).
  void shutdown() {
    {
      std::lock_guard lock(mu_);
      if (stop_) return;
      stop_ = true;
      queue_.clear();
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

 private:
  void loop() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
        if (stop_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
        ++active_;
      }
      task();
      {
        std::lock_guard lock(mu_);
        --active_;
      }
      idle_.notify_all();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_, idle_;
  std::deque<std::function<void()>> queue_;
  std::size_t active_ = 0;
  bool stop_ = false;
  std::vector<std::thread> threads_;
};

struct JobRecord {
  std::string id;
  std::string kind;  // ingest | eval
  std::string status = "queued";  // queued | running | retrying | succeeded | failed
  std::string stage = "accepted";
  int attempts = 0;
  std::string error;
  std::string video_id;
  Json result;
  std::string created_at;
  std::string updated_at;
  Json stage_ms = Json::object();

  bool terminal() const { return status == "succeeded" || status == "failed"; }
};

Json job_json(const JobRecord& j) {
  Json out{{"id", j.id},       {"kind", j.kind},         {"status", j.status},
           {"stage", j.stage}, {"attempts", j.attempts}, {"created_at", j.created_at},
           {"updated_at", j.updated_at}, {"stage_ms", j.stage_ms}};
  out["error"] = j.error.empty() ? Json(nullptr) : Json(j.error);
  out["video_id"] = j.video_id.empty() ? Json(nullptr) : Json(j.video_id);
  out["result"] = j.result;
  return out;
}

JobRecord job_from_json(const Json& j) {
  JobRecord r;
  r.id = j.at("id").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.stage = j.value("stage", "accepted");
  r.attempts = j.value("attempts", 0);
  if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
  if (j.contains("video_id") && j["video_id"].is_string()) r.video_id = j["video_id"].get<std::string>();
  r.result = j.value("result", Json(nullptr));
  r.created_at = j.value("created_at", "");
  r.updated_at = j.value("updated_at", "");
  r.stage_ms = j.value("stage_ms", Json::object());
  return r;
}

struct VideoEntry {
  imaging::VideoManifest manifest;
  std::string content_hash;
  std::string job_id;
  std::string status = "pending";  // pending | ready | failed
  std::vector<std::string> clip_ids;
};

Json video_json(const VideoEntry& v) {
  return {{"manifest", v.manifest},   {"content_hash", v.content_hash}, {"job_id", v.job_id},
          {"status", v.status},       {"clip_ids", v.clip_ids}};
}

VideoEntry video_from_json(const Json& j) {
  VideoEntry v;
  v.manifest = j.at("manifest").get<imaging::VideoManifest>();
  v.content_hash = j.at("content_hash").get<std::string>();
  v.job_id = j.value("job_id", "");
  v.status = j.value("status", "pending");
  v.clip_ids = j.value("clip_ids", std::vector<std::string>{});
  return v;
}

Json hit_json(const vecindex::SearchHit& h) {
  Json boxes{{"count", h.clip.boxes.size()}};
  if (!h.clip.boxes.empty()) {
    boxes["first"] = h.clip.boxes.front();
    boxes["last"] = h.clip.boxes.back();
  }
  return {{"clip_id", h.clip_id},
          {"score", h.score},
          {"video_id", h.clip.video_id},
          {"camera_id", h.clip.camera_id},
          {"span", h.clip.span},
          {"mode", clip_mode_name(h.clip.mode)},
          {"frame_count", h.clip.frame_count},
          {"boxes", boxes},
          {"thumbnail", "/v1/clips/" + percent_encode(h.clip_id) + "/thumbnail"}};
}

Json timings_json(const orchestrator::StageTimings& t) {
  return {{"retrieval_ms", t.retrieval_ms},
          {"generation_ttft_ms", t.ttft_ms},
          {"generation_ms", t.generation_ms},
          {"total_ms", t.total_ms}};
}

std::vector<Detection> decode_detections(const std::vector<Json>& rows,
                                         const imaging::VideoManifest& manifest) {
  std::vector<Detection> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto where = "line " + std::to_string(i + 1) + ": ";
    Detection d;
    try {
      if (!rows[i].contains("video_id")) {
        auto row = rows[i];
        row["video_id"] = manifest.video_id;
        d = row.get<Detection>();
      } else {
        d = rows[i].get<Detection>();
      }
      validate(d.box);
    } catch (const Json::exception& e) {
      fail(400, "InvalidArgument", where + e.what());
    } catch (const Error& e) {
      fail(400, std::string(error_code_name(e.code())), where + e.what());
    }
    if (d.video_id != manifest.video_id) {
      fail(400, "InvalidArgument",
           where + "video_id '" + d.video_id + "' does not match the manifest");
    }
    if (!out.empty() && (d.frame_index < out.back().frame_index || d.timestamp < out.back().timestamp)) {
      fail(400, "OutOfOrderFrames", where + "frame index or timestamp regresses");
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

struct Service::Impl {
  ServiceConfig cfg;
  Logger logger;
  std::shared_ptr<encoder::EncoderBackend> encoder_backend;
  std::unique_ptr<encoder::EncoderGateway> gateway;
  std::shared_ptr<orchestrator::VlmBackend> vlm;
  std::unique_ptr<vecindex::VectorIndex> index;
  std::shared_ptr<imaging::DirectoryFrameProvider> frames;

  std::mutex state_mu;  // registry + jobs
  std::map<std::string, VideoEntry> videos;
  std::map<std::string, JobRecord> jobs;
  std::uint64_t next_job = 1;

  std::mutex save_mu;
  std::mutex review_mu;
  std::uint64_t audit_seq = 0;

  std::atomic<bool> stopping{false};
  std::atomic<bool> http_stopped{false};
  std::mutex sleep_mu;
  std::condition_variable sleep_cv;

  std::unique_ptr<WorkerPool> ingest_pool;
  std::unique_ptr<WorkerPool> eval_pool;
  httplib::Server server;
  std::thread server_thread;
  bool started = false;

  Impl(ServiceConfig c, Backends b) : cfg(std::move(c)), logger(b.log) {
    cfg.validate();
    fs::create_directories(cfg.data_dir / "jobs");
    fs::create_directories(cfg.data_dir / "thumbnails");
    encoder_backend = b.encoder ? b.encoder : encoder::make_encoder_backend(cfg.encoder, cfg.mock_encoder);
    gateway = std::make_unique<encoder::EncoderGateway>(encoder_backend, cfg.encoder, cfg.encoder_retry);
    vlm = b.vlm;
    if (!vlm && !cfg.vlm.endpoint.empty()) {
      if (cfg.vlm.endpoint == "mock://") {
        const auto loaded = evalkit::load_samples(cfg.vlm.truth_file);
        vlm = std::make_shared<orchestrator::MockVlmBackend>(orchestrator::truth_table(loaded.samples),
                                                             cfg.vlm.mock);
      } else {
        vlm = std::make_shared<orchestrator::HttpVlmBackend>(cfg.vlm.endpoint, cfg.vlm.timeout);
      }
    }
    const auto idx_path = cfg.resolved_index_path();
    if (fs::exists(idx_path)) {
      index = std::make_unique<vecindex::VectorIndex>(vecindex::VectorIndex::load(idx_path));
      if (index->dimension() != cfg.encoder.dimension) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "index at " + idx_path.string() + " has dimension " +
                        std::to_string(index->dimension()));
      }
    } else {
      index = std::make_unique<vecindex::VectorIndex>(cfg.encoder.dimension);
    }
    frames = std::make_shared<imaging::DirectoryFrameProvider>();
    load_registry();
    load_journal();
    ingest_pool = std::make_unique<WorkerPool>(cfg.ingest_workers);
    eval_pool = std::make_unique<WorkerPool>(cfg.eval_workers);
    resume_jobs();
    routes();
  }

  ~Impl() { shutdown(); }

  // httplib asserts on a second stop.
  void stop_http() {
    if (!http_stopped.exchange(true)) server.stop();
  }

  void shutdown() {
    stopping = true;
    sleep_cv.notify_all();
    if (started) {
      stop_http();
      if (server_thread.joinable()) server_thread.join();
      started = false;
    }
    if (ingest_pool) ingest_pool->shutdown();
    if (eval_pool) eval_pool->shutdown();
  }

  // ---- persistence ----

  fs::path registry_path() const { return cfg.data_dir / "videos.jsonl"; }
  fs::path journal_path() const { return cfg.data_dir / "jobs.jsonl"; }
  fs::path payload_path(const std::string& id) const { return cfg.data_dir / "jobs" / (id + ".json"); }
  fs::path thumbnail_path(const std::string& clip_id) const {
    return cfg.data_dir / "thumbnails" / (sha256_hex(clip_id).substr(0, 32) + ".png");
  }

  void load_registry() {
    if (!fs::exists(registry_path())) return;
    for (const auto& row : read_jsonl(registry_path())) {
      auto v = video_from_json(row);
      frames->add(v.manifest);
      videos[v.manifest.video_id] = std::move(v);
    }
  }

  // Caller holds state_mu.
  void save_registry_locked() {
    std::vector<Json> rows;
    for (const auto& [id, v] : videos) rows.push_back(video_json(v));
    write_atomic(registry_path(), dump_jsonl(rows));
  }

  void load_journal() {
    if (!fs::exists(journal_path())) return;
    // A torn final line from a crash is ignored.
    std::ifstream in(journal_path());
    std::string line;
    while (std::getline(in, line)) {
      auto row = Json::parse(line, nullptr, false);
      if (row.is_discarded() || !row.is_object()) continue;
      auto rec = job_from_json(row);
      const auto n = std::strtoull(rec.id.c_str() + std::min<std::size_t>(4, rec.id.size()), nullptr, 10);
      next_job = std::max<std::uint64_t>(next_job, n + 1);
      jobs[rec.id] = std::move(rec);
    }
  }

  // Caller holds state_mu.
  void journal_locked(JobRecord& job) {
    job.updated_at = utc_now();
    append_line(journal_path(), job_json(job));
  }

  void update_job(const std::string& id, const std::function<void(JobRecord&)>& fn) {
    Json event;
    {
      std::lock_guard lock(state_mu);
      auto& job = jobs.at(id);
      fn(job);
      journal_locked(job);
      event = {{"event", "job"}, {"job_id", id}, {"kind", job.kind}, {"status", job.status},
               {"stage", job.stage}, {"attempts", job.attempts}};
      if (!job.error.empty()) event["error"] = job.error;
    }
    logger.log(event);
  }

  std::string new_job_locked(const std::string& kind, const std::string& video_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "job-%06llu", static_cast<unsigned long long>(next_job++));
    JobRecord job;
    job.id = buf;
    job.kind = kind;
    job.video_id = video_id;
    job.created_at = utc_now();
    jobs[job.id] = job;
    journal_locked(jobs[job.id]);
    return job.id;
  }

  void resume_jobs() {
    std::vector<std::pair<std::string, std::string>> pending;
    {
      std::lock_guard lock(state_mu);
      for (const auto& [id, job] : jobs) {
        if (!job.terminal()) pending.emplace_back(id, job.kind);
      }
    }
    for (const auto& [id, kind] : pending) {
      logger.log({{"event", "job_resumed"}, {"job_id", id}, {"kind", kind}});
      enqueue(id, kind);
    }
  }

  void enqueue(const std::string& id, const std::string& kind) {
    if (kind == "ingest") {
      ingest_pool->submit([this, id] { run_ingest(id); });
    } else {
      eval_pool->submit([this, id] { run_eval(id); });
    }
  }

  // Returns false when interrupted by shutdown.
  bool sleep_for(std::chrono::milliseconds d) {
    std::unique_lock lock(sleep_mu);
    return !sleep_cv.wait_for(lock, d, [&] { return stopping.load(); });
  }

  void save_index() {
    std::lock_guard lock(save_mu);
    index->save(cfg.resolved_index_path());
  }

  // ---- ingest ----

  void render_thumbnail(const Clip& clip) {
    if (clip.frame_indices.empty()) return;
    const auto picks = encoder::sample_frames(static_cast<std::int64_t>(clip.frame_indices.size()),
                                              cfg.encoder.frame_budget);
    const auto i = static_cast<std::size_t>(picks.front());
    auto img = frames->frame(clip.video_id, clip.frame_indices[i]);
    if (clip.mode == ClipMode::kPersonCentric && i < clip.boxes.size()) {
      imaging::draw_box(img, clip.boxes[i].box, imaging::kOverlayColor);
    }
    write_atomic(thumbnail_path(clip.clip_id), imaging::encode(img));
  }

  void run_ingest(const std::string& id) {
    if (stopping) return;
    std::string video_id;
    std::string content_hash;
    {
      std::lock_guard lock(state_mu);
      video_id = jobs.at(id).video_id;
      const auto it = videos.find(video_id);
      if (it != videos.end()) content_hash = it->second.content_hash;
      // Resumed after the last durable stage: nothing left to do.
      if (it != videos.end() && it->second.status == "ready" && it->second.job_id == id) {
        auto& job = jobs.at(id);
        job.status = "succeeded";
        job.stage = "done";
        job.result = {{"video_id", video_id}, {"clip_count", it->second.clip_ids.size()},
                      {"clip_ids", it->second.clip_ids}};
        journal_locked(job);
        return;
      }
    }
    Json payload;
    imaging::VideoManifest manifest;
    std::vector<Detection> dets;
    try {
      payload = Json::parse(read_file(payload_path(id)));
      manifest = payload.at("manifest").get<imaging::VideoManifest>();
      dets = payload.at("detections").get<std::vector<Detection>>();
    } catch (const std::exception& e) {
      finish_ingest_failure(id, video_id, std::string("job payload unreadable: ") + e.what());
      return;
    }
    frames->add(manifest);

    for (;;) {
      if (stopping) return;
      update_job(id, [](JobRecord& j) {
        j.status = "running";
        ++j.attempts;
      });
      try {
        Json stage_ms = Json::object();
        auto t = Clock::now();
        update_job(id, [](JobRecord& j) { j.stage = "tracking"; });
        std::vector<Clip> clips;
        const tracklet::CameraMap cameras{{manifest.video_id, manifest.camera_id}};
        if (cfg.clips.mode == ClipMode::kFullFrame) {
          clips = tracklet::full_frame_clips(manifest, cfg.clips);
          for (auto& c : clips) c.camera_id = manifest.camera_id;
        } else {
          const auto tracks = tracklet::associate(dets, cfg.tracker);
          clips = tracklet::tracks_to_clips(tracks, cfg.clips, cameras);
        }
        stage_ms["tracking"] = ms_since(t);

        t = Clock::now();
        update_job(id, [](JobRecord& j) { j.stage = "embedding"; });
        std::vector<EmbeddingRecord> records;
        records.reserve(clips.size());
        for (const auto& c : clips) records.push_back(gateway->embed_clip(c, *frames));
        stage_ms["embedding"] = ms_since(t);

        t = Clock::now();
        update_job(id, [](JobRecord& j) { j.stage = "thumbnails"; });
        for (const auto& c : clips) render_thumbnail(c);
        stage_ms["thumbnails"] = ms_since(t);

        // Everything fallible is done; inserts become visible to readers at once.
        t = Clock::now();
        update_job(id, [](JobRecord& j) { j.stage = "indexing"; });
        std::vector<std::string> clip_ids;
        for (std::size_t i = 0; i < clips.size(); ++i) {
          if (!index->contains(clips[i].clip_id)) index->insert(records[i], clips[i]);
          clip_ids.push_back(clips[i].clip_id);
        }
        save_index();
        stage_ms["indexing"] = ms_since(t);
        {
          std::lock_guard lock(state_mu);
          auto& v = videos.at(video_id);
          v.status = "ready";
          v.clip_ids = clip_ids;
          save_registry_locked();
        }
        update_job(id, [&](JobRecord& j) {
          j.status = "succeeded";
          j.stage = "done";
          j.error.clear();
          j.stage_ms = stage_ms;
          j.result = {{"video_id", video_id}, {"clip_count", clip_ids.size()}, {"clip_ids", clip_ids}};
        });
        Json ev{{"event", "ingest"}, {"job_id", id}, {"video_id", video_id},
                {"clips", clip_ids.size()}};
        ev.update(stage_ms);
        logger.log(ev);
        return;
      } catch (const Error& e) {
        int attempts = 0;
        {
          std::lock_guard lock(state_mu);
          attempts = jobs.at(id).attempts;
        }
        if (e.retriable() && attempts < cfg.job_attempts) {
          update_job(id, [&](JobRecord& j) {
            j.status = "retrying";
            j.error = e.what();
          });
          if (!sleep_for(cfg.job_backoff * (1 << std::min(attempts - 1, 10)))) return;
          continue;
        }
        finish_ingest_failure(id, video_id, e.what());
        return;
      } catch (const std::exception& e) {
        finish_ingest_failure(id, video_id, e.what());
        return;
      }
    }
  }

  void finish_ingest_failure(const std::string& id, const std::string& video_id, const std::string& msg) {
    {
      std::lock_guard lock(state_mu);
      if (auto it = videos.find(video_id); it != videos.end() && it->second.job_id == id) {
        it->second.status = "failed";
        save_registry_locked();
      }
    }
    update_job(id, [&](JobRecord& j) {
      j.status = "failed";
      j.error = msg;
    });
  }

  void handle_ingest(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (!body.contains("manifest")) fail(400, "InvalidArgument", "missing manifest");
    imaging::VideoManifest manifest;
    try {
      manifest = body["manifest"].get<imaging::VideoManifest>();
      imaging::validate(manifest);
    } catch (const Json::exception& e) {
      fail(400, "InvalidArgument", std::string("manifest: ") + e.what());
    }
    std::vector<Json> rows;
    if (body.contains("detections")) {
      if (!body["detections"].is_array()) fail(400, "InvalidArgument", "detections must be an array");
      rows = body["detections"].get<std::vector<Json>>();
    } else if (body.contains("detections_jsonl")) {
      rows = parse_jsonl(body["detections_jsonl"].get<std::string>());
    } else if (body.contains("detections_path")) {
      const fs::path p = body["detections_path"].get<std::string>();
      if (!fs::exists(p)) fail(400, "InvalidArgument", "detections file not found: " + p.string());
      rows = read_jsonl(p);
    } else {
      fail(400, "InvalidArgument", "one of detections, detections_jsonl or detections_path is required");
    }
    const auto dets = decode_detections(rows, manifest);
    Json det_json = dets;
    const Json manifest_json = manifest;
    const auto hash = sha256_hex(manifest_json.dump() + "\n" + det_json.dump());

    std::string job_id;
    {
      std::lock_guard lock(state_mu);
      if (auto it = videos.find(manifest.video_id); it != videos.end() && it->second.status != "failed") {
        if (it->second.content_hash != hash) {
          fail(409, "DuplicateVideo",
               "video '" + manifest.video_id + "' is already registered with different content");
        }
        const auto& job = jobs.at(it->second.job_id);
        send_json(res, 200, {{"job_id", job.id}, {"video_id", manifest.video_id},
                             {"status", job.status}, {"duplicate", true}});
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof(buf), "job-%06llu", static_cast<unsigned long long>(next_job));
      write_atomic(payload_path(buf), Json{{"manifest", manifest_json}, {"detections", det_json}}.dump());
      job_id = new_job_locked("ingest", manifest.video_id);
      videos[manifest.video_id] = VideoEntry{manifest, hash, job_id, "pending", {}};
      save_registry_locked();
    }
    enqueue(job_id, "ingest");
    send_json(res, 202, {{"job_id", job_id}, {"video_id", manifest.video_id}, {"status", "queued"}});
  }

  // ---- query ----

  bool video_known(const std::string& video_id) {
    {
      std::lock_guard lock(state_mu);
      if (auto it = videos.find(video_id); it != videos.end() && it->second.status == "ready") return true;
    }
    vecindex::SearchFilter f;
    f.video_id = video_id;
    return !index->clips(f).empty();
  }

  void handle_query(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    Query query;
    if (!body.contains("text") || !body["text"].is_string()) {
      fail(400, "InvalidQuery", "text is required");
    }
    query.text = body["text"].get<std::string>();
    if (body.contains("image_base64") && !body["image_base64"].is_null()) {
      if (!body["image_base64"].is_string()) fail(400, "InvalidQuery", "image_base64 must be a string");
      std::string bytes;
      try {
        bytes = base64_decode(body["image_base64"].get<std::string>());
        (void)imaging::decode(bytes);
      } catch (const Error& e) {
        fail(400, "InvalidQuery", std::string("image_base64: ") + e.what());
      }
      query.image = ImageRef{"", bytes};
    }
    validate(query);

    vecindex::SearchFilter filter;
    if (body.contains("video_id") && !body["video_id"].is_null()) {
      filter.video_id = body["video_id"].get<std::string>();
      if (!video_known(*filter.video_id)) fail(404, "MissingVideo", "unknown video '" + *filter.video_id + "'");
    }
    if (body.contains("camera_id") && !body["camera_id"].is_null()) {
      filter.camera_id = body["camera_id"].get<std::string>();
    }
    if (body.contains("time_range") && !body["time_range"].is_null()) {
      const auto& tr = body["time_range"];
      TimeInterval iv{tr.at("start").get<double>(), tr.at("end").get<double>()};
      if (!(iv.start <= iv.end)) fail(400, "InvalidQuery", "time_range start exceeds end");
      filter.time_range = iv;
    }
    orchestrator::GroundingMode mode = cfg.grounding;
    if (body.contains("mode") && !body["mode"].is_null()) {
      if (!body["mode"].is_object()) fail(400, "InvalidQuery", "mode must be an object");
      Json merged = cfg.grounding;
      merged.update(body["mode"]);
      mode = merged.get<orchestrator::GroundingMode>();
    }
    std::size_t k = mode.top_k;
    if (body.contains("k") && !body["k"].is_null()) {
      if (!body["k"].is_number_integer()) fail(400, "InvalidQuery", "k must be an integer");
      const auto kk = body["k"].get<long long>();
      if (kk < 1 || kk > 1000) fail(400, "InvalidQuery", "k must lie in [1, 1000]");
      k = static_cast<std::size_t>(kk);
    }
    mode.top_k = k;
    mode.validate();
    std::optional<QASample> sample;
    if (body.contains("options") && !body["options"].is_null()) {
      auto options = body["options"].get<std::vector<std::string>>();
      if (options.size() < 2 || options.size() > 4) fail(400, "InvalidQuery", "options must hold 2 to 4 entries");
      QASample s;
      s.query = query;
      s.options = std::move(options);
      s.video_id = filter.video_id.value_or("");
      s.sample_id = "query-" + sha256_hex(req.body).substr(0, 16);
      sample = std::move(s);
    }
    const bool want_answer = body.value("answer", false);

    orchestrator::Pipeline pipeline(*gateway, *index, *frames, vlm, mode, cfg.vlm.retry);
    orchestrator::PipelineResult result;
    const bool in_scope = !index->clips(filter).empty();
    if (!in_scope) {
      result.warnings.push_back("no clips indexed for the requested scope");
    } else {
      result = pipeline.run(query, sample ? &*sample : nullptr, filter, want_answer);
    }

    Json hits = Json::array();
    for (const auto& h : result.hits) hits.push_back(hit_json(h));
    Json out{{"hits", hits}, {"timings", timings_json(result.timings)}, {"warnings", result.warnings}};
    out["warning"] = result.warnings.empty() ? Json(nullptr) : Json(result.warnings.front());
    if (want_answer) {
      out["evidence"] = hits;
      out["frames_sent"] = result.frames_sent;
      if (result.response) {
        const auto& p = result.response->parsed;
        out["summary"] = p.summary;
        out["intervals"] = p.intervals;
        out["answer_index"] = p.chosen_index ? Json(*p.chosen_index) : Json(nullptr);
        if (sample) {
          out["answer"] = p.chosen_index ? Json(sample->options[*p.chosen_index]) : Json(nullptr);
        } else {
          out["answer"] = p.summary.empty() ? Json(result.response->raw) : Json(p.summary);
        }
      } else {
        out["summary"] = nullptr;
        out["answer"] = nullptr;
        out["answer_index"] = nullptr;
        out["intervals"] = Json::array();
      }
    }
    Json ev{{"event", "query"}, {"hits", result.hits.size()}, {"answer", want_answer},
            {"modality", query.image ? "image_text" : "text"}};
    ev.update(timings_json(result.timings));
    logger.log(ev);
    send_json(res, 200, out);
  }

  // ---- eval ----

  fs::path resolve_input(const std::string& p) const {
    fs::path path(p);
    if (path.is_absolute() || fs::exists(path)) return path;
    if (!cfg.qa_dir.empty() && fs::exists(cfg.qa_dir / path)) return cfg.qa_dir / path;
    if (fs::exists(cfg.data_dir / path)) return cfg.data_dir / path;
    return path;
  }

  void handle_eval(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (!body.contains("benchmark") || !body["benchmark"].is_string()) {
      fail(400, "InvalidArgument", "benchmark path is required");
    }
    Json payload{{"benchmark", resolve_input(body["benchmark"].get<std::string>()).string()}};
    if (!fs::exists(payload["benchmark"].get<std::string>())) {
      fail(400, "InvalidArgument", "benchmark file not found: " + body["benchmark"].get<std::string>());
    }
    if (body.contains("predictions") && !body["predictions"].is_null()) {
      const auto p = resolve_input(body["predictions"].get<std::string>());
      if (!fs::exists(p)) fail(400, "InvalidArgument", "predictions file not found: " + p.string());
      payload["predictions"] = p.string();
    }
    evalkit::EvalConfig ec;
    if (body.contains("config") && !body["config"].is_null()) {
      try {
        ec = body["config"].get<evalkit::EvalConfig>();
      } catch (const Json::exception& e) {
        fail(400, "InvalidArgument", std::string("config: ") + e.what());
      }
    }
    ec.validate();
    payload["config"] = ec;
    std::string job_id;
    {
      std::lock_guard lock(state_mu);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "job-%06llu", static_cast<unsigned long long>(next_job));
      write_atomic(payload_path(buf), payload.dump());
      job_id = new_job_locked("eval", "");
    }
    enqueue(job_id, "eval");
    send_json(res, 202, {{"job_id", job_id}, {"status", "queued"}});
  }

  void run_eval(const std::string& id) {
    if (stopping) return;
    update_job(id, [](JobRecord& j) {
      j.status = "running";
      j.stage = "evaluating";
      ++j.attempts;
    });
    try {
      const auto t = Clock::now();
      const auto payload = Json::parse(read_file(payload_path(id)));
      const auto ec = payload.at("config").get<evalkit::EvalConfig>();
      const auto loaded = evalkit::load_samples(payload.at("benchmark").get<std::string>());
      evalkit::EvalReport report;
      if (payload.contains("predictions")) {
        const auto preds = read_jsonl_as<Prediction>(payload["predictions"].get<std::string>());
        report = evalkit::run_benchmark(loaded.samples, preds, ec);
      } else {
        orchestrator::Pipeline pipeline(*gateway, *index, *frames, vlm, cfg.grounding, cfg.vlm.retry);
        report = evalkit::run_benchmark(loaded.samples, evalkit::pipeline_system(pipeline), ec);
      }
      report.skipped_malformed = loaded.malformed;
      const Json report_json = report;
      write_atomic(cfg.data_dir / "reports" / (id + ".json"), report_json.dump(2));
      const double elapsed = ms_since(t);
      update_job(id, [&](JobRecord& j) {
        j.status = "succeeded";
        j.stage = "done";
        j.error.clear();
        j.stage_ms = {{"evaluating", elapsed}};
        j.result = {{"report", report_json}};
      });
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      update_job(id, [&](JobRecord& j) {
        j.status = "failed";
        j.error = msg;
      });
    }
  }

  // ---- review ----

  fs::path review_path() const { return cfg.qa_dir / qaengine::kReviewFile; }
  fs::path benchmark_path() const { return cfg.qa_dir / qaengine::kBenchmarkFile; }
  fs::path audit_path() const { return cfg.qa_dir / "review_audit.jsonl"; }

  void require_qa_dir() const {
    if (cfg.qa_dir.empty()) fail(404, "NotConfigured", "no qa_dir configured for the review queue");
  }

  std::vector<qaengine::ReviewItem> load_review() const {
    if (!fs::exists(review_path())) return {};
    return read_jsonl_as<qaengine::ReviewItem>(review_path());
  }

  void handle_review_list(const httplib::Request& req, httplib::Response& res) {
    require_qa_dir();
    std::lock_guard lock(review_mu);
    const auto status = req.has_param("status") ? req.get_param_value("status") : "";
    Json items = Json::array();
    for (const auto& item : load_review()) {
      if (status.empty() || item.status == status) items.push_back(item);
    }
    send_json(res, 200, {{"items", items}, {"count", items.size()}});
  }

  void handle_review_get(const std::string& id, httplib::Response& res) {
    require_qa_dir();
    std::lock_guard lock(review_mu);
    for (const auto& item : load_review()) {
      if (item.item_id == id) {
        send_json(res, 200, item);
        return;
      }
    }
    fail(404, "NotFound", "unknown review item '" + id + "'");
  }

  void handle_review_action(const std::string& id, const std::string& action,
                            const httplib::Request& req, httplib::Response& res) {
    require_qa_dir();
    Json body = req.body.empty() ? Json::object() : parse_body(req);
    const auto reviewer = body.value("reviewer", std::string("anonymous"));
    std::lock_guard lock(review_mu);
    auto items = load_review();
    auto it = std::find_if(items.begin(), items.end(), [&](const auto& r) { return r.item_id == id; });
    if (it == items.end()) fail(404, "NotFound", "unknown review item '" + id + "'");
    Json audit{{"item_id", id}, {"action", action}, {"reviewer", reviewer},
               {"previous_status", it->status}, {"at", utc_now()}};
    if (action == "accept") {
      std::optional<QASample> sample = it->proposed;
      if (body.contains("sample") && !body["sample"].is_null()) {
        try {
          sample = body["sample"].get<QASample>();
        } catch (const Json::exception& e) {
          fail(400, "MalformedSample", std::string("sample: ") + e.what());
        }
        audit["edited"] = true;
      }
      if (!sample) fail(400, "InvalidArgument", "item has no proposed sample; supply an edited sample");
      validate(*sample);
      std::vector<QASample> bench;
      if (fs::exists(benchmark_path())) bench = read_jsonl_as<QASample>(benchmark_path());
      const bool present = std::any_of(bench.begin(), bench.end(),
                                       [&](const QASample& s) { return s.sample_id == sample->sample_id; });
      if (!present) append_line(benchmark_path(), Json(*sample));
      it->proposed = *sample;
      it->status = "accepted";
      audit["sample_id"] = sample->sample_id;
    } else {
      if (!body.contains("reason") || !body["reason"].is_string() || body["reason"].get<std::string>().empty()) {
        fail(400, "InvalidArgument", "reject needs a non-empty reason");
      }
      it->status = "rejected";
      audit["reason"] = body["reason"];
    }
    // Last writer wins; the audit log keeps every action.
    audit["seq"] = ++audit_seq;
    append_line(audit_path(), audit);
    std::vector<Json> rows;
    for (const auto& r : items) rows.emplace_back(r);
    write_atomic(review_path(), dump_jsonl(rows));
    logger.log({{"event", "review"}, {"item_id", id}, {"action", action}, {"reviewer", reviewer}});
    send_json(res, 200, {{"item", *it}, {"audit", audit}});
  }

  void handle_review_audit(httplib::Response& res) {
    require_qa_dir();
    std::lock_guard lock(review_mu);
    Json entries = Json::array();
    if (fs::exists(audit_path())) {
      for (auto& row : read_jsonl(audit_path())) entries.push_back(std::move(row));
    }
    send_json(res, 200, {{"entries", entries}});
  }

  void handle_review_file(const std::string& rel, httplib::Response& res) {
    require_qa_dir();
    const fs::path p = fs::path(rel).lexically_normal();
    if (p.is_absolute() || p.empty() || *p.begin() == "..") fail(400, "InvalidArgument", "bad file path");
    const auto full = cfg.qa_dir / p;
    if (!fs::is_regular_file(full)) fail(404, "NotFound", "no such file");
    res.status = 200;
    res.set_content(read_file(full), content_type_for(full));
  }

  // ---- routing ----

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Handler wrap(Handler h) {
    return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      const auto t = Clock::now();
      try {
        h(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.code, e.message);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), std::string(error_code_name(e.code())), e.what());
      } catch (const Json::exception& e) {
        send_error(res, 400, "InvalidArgument", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
      logger.log({{"event", "request"}, {"method", req.method}, {"path", req.path},
                  {"status", res.status}, {"total_ms", ms_since(t)}});
    };
  }

  struct Route {
    std::string method;
    std::regex pattern;
    Handler handler;
  };
  std::vector<Route> table;

  void add(const std::string& method, const std::string& pattern, Handler h) {
    table.push_back({method, std::regex(pattern), h});
    if (method == "GET") {
      server.Get(pattern, h);
    } else {
      server.Post(pattern, h);
    }
  }

  // In-process dispatch through the same handlers, without auth or a socket.
  LocalResponse invoke(const std::string& method, const std::string& path, const std::string& body) {
    httplib::Request req;
    httplib::Response res;
    req.method = method;
    const auto q = path.find('?');
    req.path = httplib::detail::decode_url(path.substr(0, q), false);
    if (q != std::string::npos) httplib::detail::parse_query_text(path.substr(q + 1), req.params);
    req.body = body;
    for (const auto& r : table) {
      if (r.method == method && std::regex_match(req.path, req.matches, r.pattern)) {
        r.handler(req, res);
        LocalResponse out;
        out.status = res.status;
        out.content_type = res.get_header_value("Content-Type");
        out.body = res.body;
        return out;
      }
    }
    return {404, "application/json", Json{{"error", {{"code", "NotFound"}, {"message", "no route"}}}}.dump()};
  }

  void routes() {
    const auto threads = cfg.http_threads;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server.set_payload_max_length(512u << 20);
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (!cfg.auth_token || req.path == "/v1/health" || req.path == "/v1/openapi.json") {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      if (req.get_header_value("Authorization") == "Bearer " + *cfg.auth_token) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      send_error(res, 401, "Unauthorized", "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    });

    add("GET", "/v1/health", wrap([this](const auto&, auto& res) {
      std::size_t ready = 0;
      {
        std::lock_guard lock(state_mu);
        for (const auto& [id, v] : videos) ready += v.status == "ready";
      }
      send_json(res, 200, {{"status", "ok"}, {"clips", index->size()}, {"videos", ready},
                           {"encoder", cfg.encoder.endpoint},
                           {"vlm", vlm ? "configured" : "disabled"}});
    }));
    add("GET", "/v1/openapi.json", wrap([](const auto&, auto& res) { send_json(res, 200, openapi_document()); }));

    add("POST", "/v1/ingest/detections", wrap([this](const auto& req, auto& res) { handle_ingest(req, res); }));
    add("GET", "/v1/jobs", wrap([this](const auto&, auto& res) {
      Json out = Json::array();
      std::lock_guard lock(state_mu);
      for (const auto& [id, j] : jobs) out.push_back(job_json(j));
      send_json(res, 200, {{"jobs", out}});
    }));
    add("GET", R"(/v1/jobs/([^/]+))", wrap([this](const auto& req, auto& res) {
      const std::string id = req.matches[1];
      std::lock_guard lock(state_mu);
      const auto it = jobs.find(id);
      if (it == jobs.end()) fail(404, "NotFound", "unknown job '" + id + "'");
      send_json(res, 200, job_json(it->second));
    }));
    add("GET", "/v1/videos", wrap([this](const auto&, auto& res) {
      Json out = Json::array();
      std::lock_guard lock(state_mu);
      for (const auto& [id, v] : videos) {
        out.push_back({{"video_id", id}, {"camera_id", v.manifest.camera_id},
                       {"duration_seconds", v.manifest.duration_seconds}, {"fps", v.manifest.fps},
                       {"status", v.status}, {"clip_count", v.clip_ids.size()}, {"job_id", v.job_id}});
      }
      send_json(res, 200, {{"videos", out}});
    }));
    add("GET", R"(/v1/videos/([^/]+)/clips)", wrap([this](const auto& req, auto& res) {
      const std::string id = req.matches[1];
      if (!video_known(id)) fail(404, "MissingVideo", "unknown video '" + id + "'");
      vecindex::SearchFilter f;
      f.video_id = id;
      auto clips = index->clips(f);
      std::sort(clips.begin(), clips.end(), [](const Clip& a, const Clip& b) { return a.clip_id < b.clip_id; });
      Json out = Json::array();
      for (const auto& c : clips) {
        Json cj = c;
        cj["thumbnail"] = "/v1/clips/" + percent_encode(c.clip_id) + "/thumbnail";
        out.push_back(std::move(cj));
      }
      send_json(res, 200, {{"video_id", id}, {"clips", out}, {"count", clips.size()}});
    }));
    add("GET", R"(/v1/clips/(.+)/thumbnail)", wrap([this](const auto& req, auto& res) {
      const std::string id = req.matches[1];
      const auto p = thumbnail_path(id);
      if (!index->contains(id) || !fs::exists(p)) fail(404, "NotFound", "no thumbnail for clip '" + id + "'");
      res.status = 200;
      res.set_content(read_file(p), "image/png");
    }));
    add("POST", "/v1/query", wrap([this](const auto& req, auto& res) { handle_query(req, res); }));
    add("POST", "/v1/eval/run", wrap([this](const auto& req, auto& res) { handle_eval(req, res); }));

    add("GET", "/v1/review/items", wrap([this](const auto& req, auto& res) { handle_review_list(req, res); }));
    add("GET", "/v1/review/audit", wrap([this](const auto&, auto& res) { handle_review_audit(res); }));
    add("GET", R"(/v1/review/items/([^/]+))", wrap([this](const auto& req, auto& res) {
      handle_review_get(req.matches[1], res);
    }));
    add("POST", R"(/v1/review/items/([^/]+)/(accept|reject))", wrap([this](const auto& req, auto& res) {
      handle_review_action(req.matches[1], req.matches[2], req, res);
    }));
    add("GET", R"(/v1/review/files/(.+))", wrap([this](const auto& req, auto& res) {
      handle_review_file(req.matches[1], res);
    }));
  }
};

Service::Service(ServiceConfig config, Backends backends)
    : impl_(std::make_unique<Impl>(std::move(config), backends)) {}

Service::~Service() = default;

const ServiceConfig& Service::config() const { return impl_->cfg; }

int Service::start() {
  auto& im = *impl_;
  if (im.started) throw Error(ErrorCode::kInvalidArgument, "service already started");
  int port = im.cfg.port;
  if (port == 0) {
    port = im.server.bind_to_any_port(im.cfg.host);
  } else if (!im.server.bind_to_port(im.cfg.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + im.cfg.host + ":" + std::to_string(im.cfg.port));
  }
  im.server_thread = std::thread([&im] { im.server.listen_after_bind(); });
  im.server.wait_until_ready();
  im.started = true;
  im.logger.log({{"event", "listening"}, {"host", im.cfg.host}, {"port", port}});
  return port;
}

void Service::wait() {
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void Service::stop() {
  if (impl_->started) impl_->stop_http();
}

LocalResponse Service::invoke(const std::string& method, const std::string& path, const Json& body) {
  return impl_->invoke(method, path, body.is_null() ? std::string() : body.dump());
}

void Service::drain() {
  impl_->ingest_pool->drain();
  impl_->eval_pool->drain();
}

}  // namespace foresearch::service
