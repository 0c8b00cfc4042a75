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
#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <sstream>
#include <thread>

#include "foresearch/core/digest.hpp"
#include "foresearch/core/prompts.hpp"
#include "foresearch/core/error.hpp"
#include "foresearch/imaging/image.hpp"
#include "foresearch/qaengine/engine.hpp"
#include "foresearch/service/service.hpp"
#include "foresearch/synth/scene_models.hpp"
#include "foresearch/synth/world.hpp"

using namespace foresearch;
using namespace foresearch::service;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fs_service_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Three small videos written to disk once for the whole suite.
struct WorldOnDisk {
  synth::World world;
  fs::path dir;
  std::vector<imaging::VideoManifest> manifests;

  WorldOnDisk() {
    synth::WorldConfig c;
    c.videos = 3;
    c.people_per_video = 4;
    c.fps = 4.0;
    c.duration_seconds = 20.0;
    c.width = 192;
    c.height = 96;
    c.seed = 21;
    world = synth::make_world(c);
    dir = scratch("world");
    synth::write_world(world, dir);
    manifests = read_jsonl_as<imaging::VideoManifest>(dir / "manifests.jsonl");
  }

  Json ingest_body(std::size_t v) const {
    Json dets = Json::array();
    for (const auto& d : synth::detections(world.videos[v])) dets.push_back(d);
    return {{"manifest", manifests[v]}, {"detections", dets}};
  }
};

const WorldOnDisk& disk() {
  static const WorldOnDisk w;
  return w;
}

ServiceConfig base_config(const std::string& name) {
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.data_dir = scratch(name);
  cfg.encoder.dimension = 64;
  cfg.mock_encoder.dimension = 64;
  cfg.mock_encoder.vocabulary = disk().world.vocabulary;
  cfg.encoder_retry.base_delay = std::chrono::milliseconds(1);
  cfg.encoder_retry.attempts = 2;
  cfg.vlm.endpoint = "mock://";
  cfg.vlm.truth_file = disk().dir / "benchmark.jsonl";
  cfg.vlm.retry.base_delay = std::chrono::milliseconds(1);
  cfg.job_backoff = std::chrono::milliseconds(5);
  return cfg;
}

struct Reply {
  int status = 0;
  Json body;
  std::string raw;
};

struct Client {
  explicit Client(int port, std::string token = {}) : cli("127.0.0.1", port), token(std::move(token)) {
    cli.set_read_timeout(std::chrono::seconds(60));
  }

  httplib::Headers headers() const {
    httplib::Headers h;
    if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
    return h;
  }

  static Reply wrap(const httplib::Result& r) {
    Reply out;
    if (!r) return out;
    out.status = r->status;
    out.raw = r->body;
    out.body = Json::parse(r->body, nullptr, false);
    return out;
  }

  Reply get(const std::string& path) { return wrap(cli.Get(path, headers())); }
  Reply post(const std::string& path, const Json& body) {
    return wrap(cli.Post(path, headers(), body.dump(), "application/json"));
  }
  Reply post_raw(const std::string& path, const std::string& body) {
    return wrap(cli.Post(path, headers(), body, "application/json"));
  }

  httplib::Client cli;
  std::string token;
};

// Expected clips per video: every visible person forms one unbroken track
// shorter than the clip length cap, so one clip per person.
std::size_t expected_clips(const synth::SynthVideo& v) {
  std::size_t n = 0;
  for (const auto& p : v.people) {
    REQUIRE(p.span(v.manifest.fps).end - p.span(v.manifest.fps).start < 30.0);
    n += (p.last_frame - p.first_frame + 1) >= 5;
  }
  return n;
}

class FailingEncoder : public encoder::EncoderBackend {
 public:
  std::vector<float> encode(const encoder::EncodeRequest&) override {
    ++calls;
    throw Error(ErrorCode::kEncoderUnavailable, "encoder is down");
  }
  std::atomic<int> calls{0};
};

std::string wait_status(Client& c, const std::string& job, std::set<std::string> until,
                        int max_ms = 20000) {
  std::string status;
  for (int waited = 0; waited < max_ms; waited += 5) {
    auto r = c.get("/v1/jobs/" + job);
    status = r.body.value("status", "");
    if (until.count(status)) return status;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return status;
}

std::string url_encode(const std::string& s) {
  std::string out;
  for (unsigned char ch : s) {
    if (std::isalnum(ch) || ch == '-' || ch == '_' || ch == '.') {
      out += static_cast<char>(ch);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02X", ch);
      out += buf;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("service config round-trips and validates") {
  auto cfg = base_config("cfg");
  cfg.auth_token = "tok";
  cfg.grounding.top_k = 5;
  cfg.tracker.assignment = tracklet::Assignment::kOptimal;
  cfg.clips.mode = ClipMode::kFullFrame;
  const Json j = cfg;
  ServiceConfig back;
  from_json(j, back);
  CHECK(Json(back).dump() == j.dump());
  CHECK_NOTHROW(back.validate());
  CHECK(back.resolved_index_path() == cfg.data_dir / "index.fsx");

  auto expect_bad = [&](auto mutate) {
    auto c = cfg;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), Error);
  };
  expect_bad([](ServiceConfig& c) { c.encoder.endpoint = "not a url"; });
  expect_bad([](ServiceConfig& c) { c.vlm.endpoint = "ftp://x"; });
  expect_bad([](ServiceConfig& c) { c.vlm.truth_file.clear(); });
  expect_bad([](ServiceConfig& c) { c.port = 70000; });
  expect_bad([](ServiceConfig& c) { c.auth_token = ""; });
  expect_bad([](ServiceConfig& c) { c.ingest_workers = 0; });
  expect_bad([](ServiceConfig& c) { c.grounding.crop = c.grounding.overlay = true; });
  expect_bad([](ServiceConfig& c) { c.index_path = c.data_dir; });
  CHECK_NOTHROW([&] {
    auto c = cfg;
    c.encoder.endpoint = "http://127.0.0.1:9000/models/enc";
    c.vlm.endpoint = "https://vlm.lab.internal:8443";
    c.validate();
  }());
  CHECK_THROWS_AS(from_json(Json::array(), back), Error);
  CHECK_THROWS_AS(from_json(Json{{"tracker", {{"motion", "teleport"}}}}, back), Error);
}

TEST_CASE("the OpenAPI document covers every route") {
  const auto& doc = openapi_document();
  CHECK(doc["openapi"].get<std::string>().rfind("3.", 0) == 0);
  const std::set<std::pair<std::string, std::string>> routes = {
      {"get", "/v1/health"},
      {"get", "/v1/openapi.json"},
      {"post", "/v1/ingest/detections"},
      {"get", "/v1/jobs"},
      {"get", "/v1/jobs/{job_id}"},
      {"get", "/v1/videos"},
      {"get", "/v1/videos/{video_id}/clips"},
      {"get", "/v1/clips/{clip_id}/thumbnail"},
      {"post", "/v1/query"},
      {"post", "/v1/eval/run"},
      {"get", "/v1/review/items"},
      {"get", "/v1/review/items/{item_id}"},
      {"post", "/v1/review/items/{item_id}/accept"},
      {"post", "/v1/review/items/{item_id}/reject"},
      {"get", "/v1/review/audit"},
      {"get", "/v1/review/files/{path}"},
  };
  std::set<std::pair<std::string, std::string>> documented;
  for (const auto& [path, ops] : doc["paths"].items()) {
    for (const auto& [method, op] : ops.items()) {
      documented.emplace(method, path);
      CHECK(op.contains("responses"));
      CHECK(op.contains("operationId"));
    }
  }
  CHECK(documented == routes);
  // Every $ref resolves.
  std::function<void(const Json&)> walk = [&](const Json& node) {
    if (node.is_object()) {
      if (node.contains("$ref")) {
        const auto ref = node["$ref"].get<std::string>();
        REQUIRE(ref.rfind("#/components/schemas/", 0) == 0);
        CHECK_MESSAGE(doc["components"]["schemas"].contains(ref.substr(21)), ref);
      }
      for (const auto& [k, v] : node.items()) walk(v);
    } else if (node.is_array()) {
      for (const auto& v : node) walk(v);
    }
  };
  walk(doc);
}

TEST_CASE("ingest, browse and query over HTTP") {
  std::ostringstream log;
  const auto& w = disk();
  auto cfg = base_config("main");
  std::optional<Service> svc;
  svc.emplace(cfg, Backends{nullptr, nullptr, &log});
  const int port = svc->start();
  Client c(port);

  CHECK(c.get("/v1/health").body["status"] == "ok");
  CHECK(c.get("/v1/openapi.json").body == openapi_document());

  std::vector<std::string> jobs;
  for (std::size_t v = 0; v < w.world.videos.size(); ++v) {
    const auto r = c.post("/v1/ingest/detections", w.ingest_body(v));
    REQUIRE(r.status == 202);
    CHECK(r.body["status"] == "queued");
    jobs.push_back(r.body["job_id"].get<std::string>());
  }
  svc->drain();

  SUBCASE("jobs finish and clips match the world") {
    for (std::size_t v = 0; v < jobs.size(); ++v) {
      const auto j = c.get("/v1/jobs/" + jobs[v]);
      REQUIRE(j.status == 200);
      CHECK(j.body["status"] == "succeeded");
      CHECK(j.body["kind"] == "ingest");
      for (const char* stage : {"tracking", "embedding", "thumbnails", "indexing"}) {
        CHECK(j.body["stage_ms"].contains(stage));
      }
      const auto& video = w.world.videos[v];
      const auto clips = c.get("/v1/videos/" + video.manifest.video_id + "/clips");
      REQUIRE(clips.status == 200);
      CHECK(clips.body["count"].get<std::size_t>() == expected_clips(video));
      CHECK(j.body["result"]["clip_count"] == clips.body["count"]);
    }
    const auto vids = c.get("/v1/videos").body["videos"];
    CHECK(vids.size() == 3);
    for (const auto& v : vids) CHECK(v["status"] == "ready");
    CHECK(c.get("/v1/jobs").body["jobs"].size() == 3);
    CHECK(c.get("/v1/jobs/job-999999").status == 404);
    CHECK(c.get("/v1/videos/nope/clips").status == 404);
  }

  SUBCASE("thumbnails are the boxed first sampled frame") {
    const auto& video = w.world.videos[0];
    const auto clips = c.get("/v1/videos/" + video.manifest.video_id + "/clips").body["clips"];
    REQUIRE(!clips.empty());
    for (const auto& cj : clips) {
      const auto clip = cj.get<Clip>();
      auto res = c.cli.Get(cj["thumbnail"].get<std::string>());
      REQUIRE(res);
      REQUIRE(res->status == 200);
      CHECK(res->get_header_value("Content-Type") == "image/png");
      const auto img = imaging::decode(res->body);
      CHECK(img.width() == w.world.config.width);
      // Oracle: first sampled index under the encoder's frame budget.
      const auto n = static_cast<std::int64_t>(clip.frame_indices.size());
      const auto first = n <= cfg.encoder.frame_budget ? 0 : n / (2 * cfg.encoder.frame_budget);
      const auto rect = imaging::clamp_box(img, clip.boxes[first].box);
      CHECK(img.at(rect.x0, rect.y0) == imaging::kOverlayColor);
      char name[32];
      std::snprintf(name, sizeof(name), "%06d.png", static_cast<int>(clip.frame_indices[first]));
      auto raw = imaging::decode(read_file(fs::path(w.manifests[0].frame_dir) / name));
      imaging::draw_box(raw, clip.boxes[first].box, imaging::kOverlayColor);
      CHECK(raw == img);
    }
    CHECK(c.get("/v1/clips/" + url_encode("no/such/clip") + "/thumbnail").status == 404);
  }

  SUBCASE("ingest is idempotent per content and rejects conflicts") {
    auto again = c.post("/v1/ingest/detections", w.ingest_body(0));
    CHECK(again.status == 200);
    CHECK(again.body["job_id"] == jobs[0]);
    CHECK(again.body["duplicate"] == true);
    auto changed = w.ingest_body(0);
    changed["detections"].erase(changed["detections"].size() - 1);
    CHECK(c.post("/v1/ingest/detections", changed).status == 409);
    CHECK(c.get("/v1/jobs").body["jobs"].size() == 3);
  }

  SUBCASE("malformed ingest bodies are 400 with a line number") {
    auto body = w.ingest_body(1);
    body["manifest"]["video_id"] = "fresh";
    std::string jsonl;
    for (auto d : body["detections"]) {
      d["video_id"] = "fresh";
      jsonl += d.dump() + "\n";
    }
    body.erase("detections");
    auto broken = body;
    broken["detections_jsonl"] = jsonl.substr(0, jsonl.find('\n') + 1) + "{\"frame_index\": \n" + jsonl;
    auto r = c.post("/v1/ingest/detections", broken);
    CHECK(r.status == 400);
    CHECK(r.body["error"]["message"].get<std::string>().find("line 2") != std::string::npos);

    auto mismatch = body;
    mismatch["detections_jsonl"] = jsonl + w.ingest_body(0)["detections"][0].dump() + "\n";
    r = c.post("/v1/ingest/detections", mismatch);
    CHECK(r.status == 400);
    CHECK(r.body["error"]["message"].get<std::string>().find("does not match") != std::string::npos);

    auto regress = body;
    auto rows = parse_jsonl(jsonl);
    std::swap(rows[0], rows[rows.size() - 1]);
    regress["detections_jsonl"] = dump_jsonl(rows);
    r = c.post("/v1/ingest/detections", regress);
    CHECK(r.status == 400);
    CHECK(r.body["error"]["code"] == "OutOfOrderFrames");

    CHECK(c.post_raw("/v1/ingest/detections", "{not json").status == 400);
    CHECK(c.post("/v1/ingest/detections", Json{{"detections", Json::array()}}).status == 400);
    CHECK(c.post("/v1/ingest/detections", Json{{"manifest", body["manifest"]}}).status == 400);
    auto missing = body;
    missing["detections_path"] = "/does/not/exist.jsonl";
    CHECK(c.post("/v1/ingest/detections", missing).status == 400);
    auto bad_manifest = body;
    bad_manifest["manifest"]["fps"] = -1;
    bad_manifest["detections_jsonl"] = jsonl;
    CHECK(c.post("/v1/ingest/detections", bad_manifest).status == 400);
    // None of the rejected bodies registered anything.
    CHECK(c.get("/v1/videos").body["videos"].size() == 3);
  }

  SUBCASE("text and photo queries rank the asked-about person first") {
    const encoder::Palette palette(w.world.vocabulary);
    for (const auto& video : w.world.videos) {
      const auto clips = c.get("/v1/videos/" + video.manifest.video_id + "/clips").body["clips"];
      for (const auto& person : video.people) {
        if (person.last_frame - person.first_frame + 1 < 5) continue;
        // The person's clip is the one covering exactly their visible frames.
        std::string want;
        for (const auto& cj : clips) {
          if (std::abs(cj["span"]["start"].get<double>() - person.first_frame / video.manifest.fps) < 1e-9 &&
              std::abs(cj["span"]["end"].get<double>() - person.last_frame / video.manifest.fps) < 1e-9) {
            want = cj["clip_id"].get<std::string>();
          }
        }
        REQUIRE(!want.empty());
        auto r = c.post("/v1/query", Json{{"text", "the person in the " + person.label},
                                          {"video_id", video.manifest.video_id},
                                          {"k", 3}});
        REQUIRE(r.status == 200);
        REQUIRE(!r.body["hits"].empty());
        CHECK(r.body["hits"][0]["clip_id"] == want);
        CHECK(r.body["hits"].size() <= 3);
        CHECK(!r.body.contains("answer"));

        const auto mid = (person.first_frame + person.last_frame) / 2;
        const auto frame = synth::render(video, mid, palette, w.world.config.width, w.world.config.height);
        const auto photo = imaging::encode(imaging::crop(frame, person.box_at(mid)));
        r = c.post("/v1/query", Json{{"text", "this person"},
                                     {"image_base64", base64_encode(photo)},
                                     {"video_id", video.manifest.video_id}});
        REQUIRE(r.status == 200);
        CHECK(r.body["hits"][0]["clip_id"] == want);
        CHECK(r.body["hits"][0]["thumbnail"].get<std::string>().find("/thumbnail") != std::string::npos);
      }
    }
  }

  SUBCASE("query validation and filters") {
    CHECK(c.post("/v1/query", Json{{"text", ""}}).status == 400);
    CHECK(c.post("/v1/query", Json{{"k", 3}}).status == 400);
    CHECK(c.post("/v1/query", Json{{"text", "x"}, {"k", 0}}).status == 400);
    CHECK(c.post("/v1/query", Json{{"text", "x"}, {"k", "3"}}).status == 400);
    CHECK(c.post("/v1/query", Json{{"text", "x"}, {"image_base64", "%%%"}}).status == 400);
    CHECK(c.post("/v1/query", Json{{"text", "x"}, {"image_base64", base64_encode("not an image")}}).status == 400);
    CHECK(c.post("/v1/query", Json{{"text", "x"}, {"video_id", "nope"}}).status == 404);
    CHECK(c.post("/v1/query", Json{{"text", "x"}, {"time_range", {{"start", 5}, {"end", 1}}}}).status == 400);
    CHECK(c.post("/v1/query", Json{{"text", "x"}, {"mode", {{"crop", true}, {"overlay", true}}}}).status == 400);
    CHECK(c.post("/v1/query", Json{{"text", "x"}, {"options", {"only one"}}}).status == 400);

    const auto cam = w.manifests[1].camera_id;
    auto r = c.post("/v1/query", Json{{"text", "person"}, {"camera_id", cam}, {"k", 50}});
    REQUIRE(r.status == 200);
    for (const auto& h : r.body["hits"]) CHECK(h["camera_id"] == cam);
    r = c.post("/v1/query", Json{{"text", "person"}, {"time_range", {{"start", 0}, {"end", 2}}}, {"k", 50}});
    for (const auto& h : r.body["hits"]) CHECK(h["span"]["start"].get<double>() <= 2.0);
    r = c.post("/v1/query", Json{{"text", "person"}, {"camera_id", "no-such-camera"}, {"answer", true}});
    CHECK(r.status == 200);
    CHECK(r.body["hits"].empty());
    CHECK(r.body["answer"].is_null());
    CHECK(!r.body["warning"].is_null());
  }

  SUBCASE("answer=true returns grounded output and evidence") {
    const auto& video = w.world.videos[0];
    const auto& person = video.people[0];
    auto r = c.post("/v1/query", Json{{"text", "What is the person in the " + person.label + " doing?"},
                                      {"video_id", video.manifest.video_id},
                                      {"options", {"walking", "running", "sitting"}},
                                      {"mode", {{"top_k", 2}}},
                                      {"answer", true}});
    REQUIRE(r.status == 200);
    CHECK(r.body["evidence"] == r.body["hits"]);
    CHECK(r.body["frames_sent"].get<int>() > 0);
    CHECK(r.body.contains("summary"));
    CHECK(r.body["intervals"].is_array());
    CHECK(r.body["timings"]["total_ms"].get<double>() >= r.body["timings"]["retrieval_ms"].get<double>());
  }

  SUBCASE("eval jobs run concurrently with independent reports") {
    const auto bench = disk().dir / "benchmark.jsonl";
    const auto samples = read_jsonl_as<QASample>(bench);
    std::vector<Json> right, wrong;
    for (const auto& s : samples) {
      right.push_back(Prediction{s.sample_id, s.answer_index, s.ground_truth, ""});
      wrong.push_back(Prediction{s.sample_id, (s.answer_index + 1) % 4, {}, ""});
    }
    const auto dir = scratch("preds");
    write_jsonl(dir / "right.jsonl", right);
    write_jsonl(dir / "wrong.jsonl", wrong);
    auto live = c.post("/v1/eval/run", Json{{"benchmark", bench.string()}});
    auto a = c.post("/v1/eval/run", Json{{"benchmark", bench.string()}, {"predictions", (dir / "right.jsonl").string()}});
    auto b = c.post("/v1/eval/run", Json{{"benchmark", bench.string()}, {"predictions", (dir / "wrong.jsonl").string()},
                                         {"config", {{"ks", {1, 2}}}}});
    REQUIRE(live.status == 202);
    REQUIRE(a.status == 202);
    REQUIRE(b.status == 202);
    svc->drain();
    auto report = [&](const Reply& r) { return c.get("/v1/jobs/" + r.body["job_id"].get<std::string>()).body; };
    const auto jl = report(live), ja = report(a), jb = report(b);
    REQUIRE(jl["status"] == "succeeded");
    REQUIRE(ja["status"] == "succeeded");
    REQUIRE(jb["status"] == "succeeded");
    CHECK(jl["result"]["report"]["schema"] == "foreseaqa-report/1");
    // Mock VLM at fidelity 1 over the oracle index answers every sample.
    CHECK(jl["result"]["report"]["overall"]["accuracy"].get<double>() == doctest::Approx(100.0));
    CHECK(jl["result"]["report"]["overall"]["count"].get<std::size_t>() == samples.size());
    CHECK(ja["result"]["report"]["overall"]["accuracy"].get<double>() == doctest::Approx(100.0));
    CHECK(jb["result"]["report"]["overall"]["accuracy"].get<double>() == doctest::Approx(0.0));
    CHECK(jb["result"]["report"]["retrieval"]["ks"] == Json({1, 2}));
    CHECK(fs::exists(cfg.data_dir / "reports" / (ja["id"].get<std::string>() + ".json")));

    CHECK(c.post("/v1/eval/run", Json{{"benchmark", "/no/such/file.jsonl"}}).status == 400);
    CHECK(c.post("/v1/eval/run", Json::object()).status == 400);
    CHECK(c.post("/v1/eval/run", Json{{"benchmark", bench.string()}, {"config", {{"ks", {3, 1}}}}}).status == 400);
  }

  SUBCASE("queries never mutate the index and run during ingestion") {
    const auto idx = cfg.data_dir / "index.fsx";
    const auto before = read_file(idx);
    auto extra = w.ingest_body(2);
    extra["manifest"]["video_id"] = "late-arrival";
    for (auto& d : extra["detections"]) d["video_id"] = "late-arrival";
    const auto job = c.post("/v1/ingest/detections", extra);
    REQUIRE(job.status == 202);
    int ok = 0;
    for (int i = 0; i < 20; ++i) {
      const auto r = c.post("/v1/query", Json{{"text", "person"}, {"video_id", w.manifests[0].video_id}});
      ok += r.status == 200 && !r.body["hits"].empty();
    }
    CHECK(ok == 20);
    svc->drain();
    CHECK(c.get("/v1/jobs/" + job.body["job_id"].get<std::string>()).body["status"] == "succeeded");
    const auto after_ingest = read_file(idx);
    CHECK(after_ingest != before);
    for (int i = 0; i < 5; ++i) c.post("/v1/query", Json{{"text", "person"}, {"answer", true}});
    CHECK(read_file(idx) == after_ingest);
  }

  SUBCASE("state survives a restart") {
    svc.reset();
    svc.emplace(cfg, Backends{nullptr, nullptr, &log});
    Client c2(svc->start());
    CHECK(c2.get("/v1/videos").body["videos"].size() == 3);
    for (std::size_t v = 0; v < 3; ++v) {
      CHECK(c2.get("/v1/videos/" + w.manifests[v].video_id + "/clips").body["count"].get<std::size_t>() ==
            expected_clips(w.world.videos[v]));
      CHECK(c2.get("/v1/jobs/" + jobs[v]).body["status"] == "succeeded");
    }
    // Job ids keep counting after a restart.
    auto extra = w.ingest_body(0);
    extra["manifest"]["video_id"] = "after-restart";
    for (auto& d : extra["detections"]) d["video_id"] = "after-restart";
    CHECK(c2.post("/v1/ingest/detections", extra).body["job_id"] == "job-000004");
    svc->drain();
  }

  svc.reset();
  // Structured logs carry the per-stage latency breakdown.
  std::istringstream in(log.str());
  std::string line;
  bool ingest_seen = false;
  while (std::getline(in, line)) {
    const auto ev = Json::parse(line);
    REQUIRE(ev.contains("ts"));
    if (ev["event"] == "query") {
      for (const char* k : {"retrieval_ms", "generation_ttft_ms", "generation_ms", "total_ms"}) {
        CHECK(ev.contains(k));
      }
    }
    if (ev["event"] == "ingest") {
      ingest_seen = true;
      CHECK(ev.contains("embedding"));
    }
  }
  CHECK(ingest_seen);
}

TEST_CASE("encoder outage: retrying then failed, and resumable") {
  std::ostringstream log;
  auto cfg = base_config("outage");
  cfg.job_attempts = 3;
  auto failing = std::make_shared<FailingEncoder>();
  {
    Service svc(cfg, Backends{failing, nullptr, &log});
    Client c(svc.start());
    const auto r = c.post("/v1/ingest/detections", disk().ingest_body(0));
    REQUIRE(r.status == 202);
    const auto job = r.body["job_id"].get<std::string>();
    svc.drain();
    const auto j = c.get("/v1/jobs/" + job).body;
    CHECK(j["status"] == "failed");
    CHECK(j["attempts"] == 3);
    CHECK(j["error"].get<std::string>().find("EncoderUnavailable") != std::string::npos);
    CHECK(c.get("/v1/videos").body["videos"][0]["status"] == "failed");
    CHECK(c.get("/v1/videos/" + disk().manifests[0].video_id + "/clips").status == 404);
  }
  // The journal shows the retry before the failure.
  std::vector<std::string> statuses;
  for (const auto& row : read_jsonl(cfg.data_dir / "jobs.jsonl")) statuses.push_back(row["status"]);
  auto first_retry = std::find(statuses.begin(), statuses.end(), "retrying");
  auto failed = std::find(statuses.begin(), statuses.end(), "failed");
  CHECK(first_retry < failed);
  CHECK(failed != statuses.end());
  CHECK(failing->calls.load() == 3 * cfg.encoder_retry.attempts);

  // A failed video may be submitted again.
  {
    Service svc(cfg, Backends{nullptr, nullptr, &log});
    Client c(svc.start());
    auto r = c.post("/v1/ingest/detections", disk().ingest_body(0));
    CHECK(r.status == 202);
    svc.drain();
    CHECK(c.get("/v1/jobs/" + r.body["job_id"].get<std::string>()).body["status"] == "succeeded");
  }

  // Interrupted while retrying: the next start picks the job up again.
  auto cfg2 = base_config("resume");
  cfg2.job_attempts = 50;
  cfg2.job_backoff = std::chrono::milliseconds(200);
  std::string job;
  {
    Service svc(cfg2, Backends{failing, nullptr, &log});
    Client c(svc.start());
    job = c.post("/v1/ingest/detections", disk().ingest_body(1)).body["job_id"];
    CHECK(wait_status(c, job, {"retrying"}) == "retrying");
  }
  {
    Service svc(cfg2, Backends{nullptr, nullptr, &log});
    svc.drain();
    Client c(svc.start());
    const auto j = c.get("/v1/jobs/" + job).body;
    CHECK(j["status"] == "succeeded");
    CHECK(c.get("/v1/videos/" + disk().manifests[1].video_id + "/clips").body["count"].get<std::size_t>() ==
          expected_clips(disk().world.videos[1]));
  }
}

TEST_CASE("VLM outage degrades to search-only answers") {
  std::ostringstream log;
  auto cfg = base_config("vlmdown");
  cfg.vlm.endpoint = "http://127.0.0.1:9";
  cfg.vlm.timeout = std::chrono::milliseconds(500);
  cfg.vlm.retry.attempts = 1;
  Service svc(cfg, Backends{nullptr, nullptr, &log});
  Client c(svc.start());
  REQUIRE(c.post("/v1/ingest/detections", disk().ingest_body(0)).status == 202);
  svc.drain();
  const auto r = c.post("/v1/query", Json{{"text", "the person in the " + disk().world.videos[0].people[0].label},
                                          {"answer", true}});
  REQUIRE(r.status == 200);
  CHECK(!r.body["hits"].empty());
  CHECK(r.body["evidence"] == r.body["hits"]);
  CHECK(r.body["answer"].is_null());
  REQUIRE(r.body["warning"].is_string());
  CHECK(r.body["warning"].get<std::string>().find("VLM unavailable") != std::string::npos);

  // No VLM configured at all behaves the same way.
  auto cfg2 = base_config("novlm");
  cfg2.vlm.endpoint.clear();
  Service svc2(cfg2, Backends{nullptr, nullptr, &log});
  Client c2(svc2.start());
  REQUIRE(c2.post("/v1/ingest/detections", disk().ingest_body(0)).status == 202);
  svc2.drain();
  const auto r2 = c2.post("/v1/query", Json{{"text", "person"}, {"answer", true}});
  CHECK(r2.status == 200);
  CHECK(r2.body["answer"].is_null());
  CHECK(!r2.body["warning"].is_null());
}

TEST_CASE("bearer auth guards everything but health and the OpenAPI document") {
  std::ostringstream log;
  auto cfg = base_config("auth");
  cfg.auth_token = "s3cret";
  Service svc(cfg, Backends{nullptr, nullptr, &log});
  const int port = svc.start();
  Client anon(port), wrong(port, "nope"), good(port, "s3cret");
  CHECK(anon.get("/v1/health").status == 200);
  CHECK(anon.get("/v1/openapi.json").status == 200);
  CHECK(anon.get("/v1/videos").status == 401);
  CHECK(wrong.get("/v1/videos").status == 401);
  CHECK(anon.post("/v1/query", Json{{"text", "x"}}).status == 401);
  CHECK(anon.get("/v1/videos").body["error"]["code"] == "Unauthorized");
  CHECK(good.get("/v1/videos").status == 200);
}

TEST_CASE("review queue endpoints") {
  std::ostringstream log;
  auto cfg = base_config("review");
  cfg.qa_dir = scratch("review_qa");
  // One reviewable item with a proposed sample, one without.
  qaengine::ReviewItem with;
  with.item_id = "rev-a";
  with.reasons = {"duplicate distractor"};
  with.candidate.video_id = "v1";
  with.candidate.question = "What is the person doing?";
  with.candidate.answer = "walking";
  with.candidate.timestamps = IntervalSet{TimeInterval{1, 2}};
  with.candidate.candidate_id = qaengine::candidate_id(with.candidate);
  QASample s;
  s.sample_id = "fsqa-a";
  s.video_id = "v1";
  s.subtask = Subtask::kAC;
  s.query.text = "What is the person doing?";
  s.options = {"walking", "running", "sitting"};
  s.ground_truth = IntervalSet{TimeInterval{1, 2}};
  with.proposed = s;
  qaengine::ReviewItem without = with;
  without.item_id = "rev-b";
  without.proposed.reset();
  write_jsonl_of(cfg.qa_dir / qaengine::kReviewFile, std::vector{with, without});
  fs::create_directories(cfg.qa_dir / "crops" / "ent-x");
  const auto png = imaging::encode(imaging::Image(4, 4, {200, 10, 10}));
  write_file(cfg.qa_dir / "crops" / "ent-x" / "m00_f000001.png", png);

  Service svc(cfg, Backends{nullptr, nullptr, &log});
  Client c(svc.start());
  auto list = c.get("/v1/review/items");
  REQUIRE(list.status == 200);
  CHECK(list.body["count"] == 2);
  CHECK(c.get("/v1/review/items?status=accepted").body["count"] == 0);
  CHECK(c.get("/v1/review/items/rev-a").body == Json(with));
  CHECK(c.get("/v1/review/items/rev-zzz").status == 404);

  auto r = c.post("/v1/review/items/rev-a/accept", Json{{"reviewer", "ana"}});
  REQUIRE(r.status == 200);
  CHECK(r.body["item"]["status"] == "accepted");
  auto bench = read_jsonl_as<QASample>(cfg.qa_dir / qaengine::kBenchmarkFile);
  REQUIRE(bench.size() == 1);
  CHECK(bench[0] == s);
  // Accepting twice does not duplicate the sample.
  CHECK(c.post("/v1/review/items/rev-a/accept", Json::object()).status == 200);
  CHECK(read_jsonl(cfg.qa_dir / qaengine::kBenchmarkFile).size() == 1);

  CHECK(c.post("/v1/review/items/rev-b/accept", Json::object()).status == 400);
  auto edited = s;
  edited.sample_id = "fsqa-b";
  edited.options = {"walking", "running", "sitting", "waving"};
  edited.answer_index = 3;
  r = c.post("/v1/review/items/rev-b/accept", Json{{"sample", edited}, {"reviewer", "bo"}});
  CHECK(r.status == 200);
  CHECK(r.body["audit"]["edited"] == true);
  auto broken = edited;
  broken.answer_index = 7;
  CHECK(c.post("/v1/review/items/rev-b/accept", Json{{"sample", broken}}).status == 400);

  CHECK(c.post("/v1/review/items/rev-a/reject", Json::object()).status == 400);
  r = c.post("/v1/review/items/rev-a/reject", Json{{"reason", "ambiguous"}, {"reviewer", "cy"}});
  CHECK(r.status == 200);
  CHECK(r.body["item"]["status"] == "rejected");
  CHECK(r.body["audit"]["previous_status"] == "accepted");
  CHECK(c.post("/v1/review/items/nope/reject", Json{{"reason", "x"}}).status == 404);

  const auto audit = c.get("/v1/review/audit").body["entries"];
  REQUIRE(audit.size() == 4);
  CHECK(audit[3]["reason"] == "ambiguous");
  CHECK(audit[3]["reviewer"] == "cy");
  for (std::size_t i = 1; i < audit.size(); ++i) CHECK(audit[i]["seq"] > audit[i - 1]["seq"]);
  // The queue file reflects the last writer.
  const auto items = read_jsonl_as<qaengine::ReviewItem>(cfg.qa_dir / qaengine::kReviewFile);
  CHECK(items[0].status == "rejected");
  CHECK(items[1].status == "accepted");

  auto file = c.cli.Get("/v1/review/files/crops/ent-x/m00_f000001.png");
  REQUIRE(file);
  CHECK(file->status == 200);
  CHECK(file->body == png);
  CHECK(c.get("/v1/review/files/crops/none.png").status == 404);
  CHECK(c.get("/v1/review/files/" + url_encode("../review_qa/review_queue.jsonl")).status >= 400);

  // Without a queue directory the endpoints say so.
  auto cfg2 = base_config("noreview");
  Service svc2(cfg2, Backends{nullptr, nullptr, &log});
  Client c2(svc2.start());
  CHECK(c2.get("/v1/review/items").status == 404);
}

TEST_CASE("mock backends speak the HTTP contracts") {
  std::ostringstream log;
  encoder::MockEncoderConfig ec;
  ec.vocabulary = disk().world.vocabulary;
  ec.dimension = 64;
  auto enc = MockServer::encoder(ec);
  const int enc_port = enc->start("127.0.0.1", 0);
  const auto samples = read_jsonl_as<QASample>(disk().dir / "benchmark.jsonl");
  auto vlm = MockServer::vlm(orchestrator::truth_table(samples), {});
  const int vlm_port = vlm->start("127.0.0.1", 0);

  auto cfg = base_config("remote");
  cfg.encoder.endpoint = "http://127.0.0.1:" + std::to_string(enc_port);
  cfg.vlm.endpoint = "http://127.0.0.1:" + std::to_string(vlm_port);
  Service svc(cfg, Backends{nullptr, nullptr, &log});
  Client c(svc.start());
  for (std::size_t v = 0; v < 3; ++v) REQUIRE(c.post("/v1/ingest/detections", disk().ingest_body(v)).status == 202);
  svc.drain();
  const auto eval = c.post("/v1/eval/run", Json{{"benchmark", (disk().dir / "benchmark.jsonl").string()}});
  svc.drain();
  const auto j = c.get("/v1/jobs/" + eval.body["job_id"].get<std::string>()).body;
  REQUIRE(j["status"] == "succeeded");
  CHECK(j["result"]["report"]["overall"]["accuracy"].get<double>() == doctest::Approx(100.0));

  // Data-engine model server answers the same way the in-process model does.
  auto llm = std::make_shared<synth::SceneLlm>();
  auto model = MockServer::model(llm);
  const int model_port = model->start("127.0.0.1", 0);
  qaengine::HttpModelClient remote(qaengine::ModelRole::kLlm, "http://127.0.0.1:" + std::to_string(model_port),
                                   llm->model_id());
  qaengine::ModelRequest req;
  req.prompt_id = "qa_entities_v1";
  req.text = fill_template(prompt_asset("qa_entities_v1"),
                           {{"input", R"({"captions":[{"start":0,"end":4,"text":"A person in a red jacket walks into view."}]})"}});
  CHECK(remote.complete(req) == llm->complete(req));
}

TEST_CASE("in-process dispatch mirrors the HTTP routes") {
  std::ostringstream log;
  auto cfg = base_config("invoke");
  cfg.auth_token = "s3cret";
  Service svc(cfg, Backends{nullptr, nullptr, &log});
  CHECK(svc.invoke("GET", "/v1/health").json()["status"] == "ok");
  const auto r = svc.invoke("POST", "/v1/ingest/detections", disk().ingest_body(2));
  REQUIRE(r.status == 202);
  svc.drain();
  const auto job = svc.invoke("GET", "/v1/jobs/" + r.json()["job_id"].get<std::string>()).json();
  CHECK(job["status"] == "succeeded");
  const auto q = svc.invoke("POST", "/v1/query", Json{{"text", "person"}, {"k", 2}}).json();
  CHECK(q["hits"].size() == 2);
  CHECK(svc.invoke("GET", "/v1/videos?unused=1").json()["videos"].size() == 1);
  CHECK(svc.invoke("GET", "/v1/nothing").status == 404);
  CHECK(svc.invoke("POST", "/v1/query", Json{{"text", ""}}).status == 400);
  const auto thumb = svc.invoke("GET", q["hits"][0]["thumbnail"].get<std::string>());
  CHECK(thumb.status == 200);
  const auto clip = q["hits"][0]["clip_id"].get<std::string>();
  CHECK(svc.invoke("GET", "/v1/clips/" + clip + "/thumbnail").content_type == "image/png");
}
