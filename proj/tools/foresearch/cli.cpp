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

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <iomanip>
#include <memory>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "foresearch/core/digest.hpp"
#include "foresearch/core/error.hpp"
#include "foresearch/evalkit/evalkit.hpp"
#include "foresearch/qaengine/engine.hpp"
#include "foresearch/synth/scene_models.hpp"
#include "foresearch/synth/world.hpp"

namespace foresearch::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

bool backend_code(ErrorCode c) {
  return c == ErrorCode::kEncoderUnavailable || c == ErrorCode::kVlmUnavailable ||
         c == ErrorCode::kLlmUnavailable || c == ErrorCode::kLmmUnavailable;
}

int exit_for_status(int status) {
  if (status < 300) return kExitOk;
  return status < 500 ? kExitInput : kExitBackend;
}

void print_error(std::ostream& err, const service::LocalResponse& r) {
  const auto body = r.json();
  if (body.is_object() && body.contains("error")) {
    err << "error: " << body["error"].value("message", r.body) << "\n";
  } else {
    err << "error: HTTP " << r.status << "\n";
  }
}

// Holds the options shared by every subcommand that builds a service.
struct Common {
  std::optional<std::string> config;
  std::string data_dir;
  bool verbose = false;
};

struct Env {
  std::ostream& out;
  std::ostream& err;
  const EnvFn& env;
  Common common;
};

service::ServiceConfig load(const Env& e) {
  std::optional<fs::path> file;
  if (e.common.config) file = *e.common.config;
  auto cfg = resolve_config(file, e.env);
  if (!e.common.data_dir.empty()) cfg.data_dir = e.common.data_dir;
  cfg.validate();
  return cfg;
}

// Service logs go to stderr only when asked for.
struct ServiceHandle {
  std::ostringstream sink;
  std::unique_ptr<service::Service> svc;

  ServiceHandle(const Env& e, service::ServiceConfig cfg) {
    service::Backends b;
    b.log = e.common.verbose ? &e.err : &sink;
    svc = std::make_unique<service::Service>(std::move(cfg), b);
  }
  service::Service* operator->() { return svc.get(); }
};

std::string format_hits(const Json& hits) {
  std::ostringstream os;
  os << std::left << std::setw(5) << "rank" << std::setw(32) << "clip" << std::setw(10) << "score"
     << "span\n";
  std::size_t rank = 1;
  for (const auto& h : hits) {
    char score[32], span[64];
    std::snprintf(score, sizeof(score), "%.4f", h["score"].get<double>());
    std::snprintf(span, sizeof(span), "%.2f-%.2fs", h["span"]["start"].get<double>(),
                  h["span"]["end"].get<double>());
    os << std::setw(5) << rank++ << std::setw(32) << h["clip_id"].get<std::string>() << std::setw(10)
       << score << span << "\n";
  }
  return os.str();
}

// ---- ingest ----

struct IngestArgs {
  std::vector<std::string> manifests;
  std::string detections;
};

int cmd_ingest(Env& e, const IngestArgs& a) {
  std::vector<imaging::VideoManifest> manifests;
  for (const auto& m : a.manifests) {
    if (fs::path(m).extension() == ".jsonl") {
      for (auto& v : read_jsonl_as<imaging::VideoManifest>(m)) manifests.push_back(std::move(v));
    } else {
      manifests.push_back(Json::parse(read_file(m)).get<imaging::VideoManifest>());
    }
  }
  if (manifests.empty()) throw Error(ErrorCode::kInvalidArgument, "no manifests given");
  const auto rows = read_jsonl(a.detections);
  ServiceHandle svc(e, load(e));
  std::vector<std::pair<std::string, std::string>> jobs;  // video, job
  int code = kExitOk;
  for (const auto& m : manifests) {
    Json dets = Json::array();
    for (const auto& r : rows) {
      if (r.value("video_id", m.video_id) == m.video_id) dets.push_back(r);
    }
    const auto res = svc->invoke("POST", "/v1/ingest/detections", Json{{"manifest", m}, {"detections", dets}});
    if (res.status >= 300) {
      e.err << m.video_id << ": ";
      print_error(e.err, res);
      code = std::max(code, exit_for_status(res.status));
      continue;
    }
    jobs.emplace_back(m.video_id, res.json()["job_id"].get<std::string>());
  }
  svc->drain();
  for (const auto& [video, job] : jobs) {
    const auto j = svc->invoke("GET", "/v1/jobs/" + job).json();
    e.out << Json{{"video_id", video}, {"job_id", job}, {"status", j["status"]},
                  {"clip_count", j["result"].is_object() ? j["result"]["clip_count"] : Json(nullptr)},
                  {"error", j["error"]}}
                 .dump()
          << "\n";
    if (j["status"] != "succeeded") {
      const auto msg = j["error"].is_string() ? j["error"].get<std::string>() : "";
      const bool backend = msg.find("Unavailable") != std::string::npos;
      code = std::max(code, backend ? kExitBackend : kExitInput);
    }
  }
  return code;
}

// ---- index ----

int cmd_index(Env& e, const std::string& video) {
  ServiceHandle svc(e, load(e));
  if (!video.empty()) {
    const auto r = svc->invoke("GET", "/v1/videos/" + video + "/clips");
    if (r.status != 200) {
      print_error(e.err, r);
      return exit_for_status(r.status);
    }
    e.out << r.json().dump(2) << "\n";
    return kExitOk;
  }
  const auto health = svc->invoke("GET", "/v1/health").json();
  const auto videos = svc->invoke("GET", "/v1/videos").json();
  e.out << Json{{"index_path", svc->config().resolved_index_path().string()},
                {"dimension", svc->config().encoder.dimension},
                {"clips", health["clips"]},
                {"videos", videos["videos"]}}
               .dump(2)
        << "\n";
  return kExitOk;
}

// ---- query ----

struct QueryArgs {
  std::string text;
  std::string image;
  std::optional<std::size_t> k;
  std::string video;
  std::string camera;
  std::optional<double> from;
  std::optional<double> to;
  bool answer = false;
  std::vector<std::string> options;
  bool json = false;
};

int cmd_query(Env& e, const QueryArgs& a) {
  Json body{{"text", a.text}, {"answer", a.answer}};
  if (!a.image.empty()) {
    if (!fs::exists(a.image)) throw Error(ErrorCode::kInvalidArgument, "image not found: " + a.image);
    body["image_base64"] = base64_encode(read_file(a.image));
  }
  if (a.k) body["k"] = *a.k;
  if (!a.video.empty()) body["video_id"] = a.video;
  if (!a.camera.empty()) body["camera_id"] = a.camera;
  if (a.from || a.to) body["time_range"] = {{"start", a.from.value_or(0.0)}, {"end", a.to.value_or(1e18)}};
  if (!a.options.empty()) body["options"] = a.options;
  ServiceHandle svc(e, load(e));
  const auto r = svc->invoke("POST", "/v1/query", body);
  if (r.status != 200) {
    print_error(e.err, r);
    return exit_for_status(r.status);
  }
  const auto res = r.json();
  if (a.json) {
    e.out << res.dump(2) << "\n";
  } else {
    e.out << format_hits(res["hits"]);
    if (a.answer) {
      e.out << "answer: " << (res["answer"].is_null() ? "(none)" : res["answer"].dump()) << "\n";
      if (res["summary"].is_string()) e.out << "summary: " << res["summary"].get<std::string>() << "\n";
      for (const auto& iv : res["intervals"]) {
        e.out << "interval: " << iv["start"].get<double>() << "-" << iv["end"].get<double>() << "s\n";
      }
    }
  }
  for (const auto& w : res["warnings"]) e.err << "warning: " << w.get<std::string>() << "\n";
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string benchmark;
  std::string predictions;
  std::string format = "json";
  std::vector<std::size_t> ks;
  std::vector<double> thresholds;
  std::vector<std::string> subtasks;
  std::size_t workers = 4;
};

int cmd_eval(Env& e, const EvalArgs& a) {
  const auto format = evalkit::parse_report_format(a.format);
  evalkit::EvalConfig ec;
  if (!a.ks.empty()) ec.ks = a.ks;
  if (!a.thresholds.empty()) ec.thresholds = a.thresholds;
  if (!a.subtasks.empty()) {
    std::set<Subtask> f;
    for (const auto& s : a.subtasks) f.insert(parse_subtask(s));
    ec.subtask_filter = f;
  }
  ec.workers = a.workers;
  ec.validate();
  Json body{{"benchmark", a.benchmark}, {"config", ec}};
  if (!a.predictions.empty()) body["predictions"] = a.predictions;
  ServiceHandle svc(e, load(e));
  const auto r = svc->invoke("POST", "/v1/eval/run", body);
  if (r.status != 202) {
    print_error(e.err, r);
    return exit_for_status(r.status);
  }
  svc->drain();
  const auto job = svc->invoke("GET", "/v1/jobs/" + r.json()["job_id"].get<std::string>()).json();
  if (job["status"] != "succeeded") {
    e.err << "error: " << job["error"].get<std::string>() << "\n";
    return kExitInput;
  }
  e.out << evalkit::emit_report(job["result"]["report"].get<evalkit::EvalReport>(), format);
  return kExitOk;
}

// ---- serve ----

int cmd_serve(Env& e) {
  auto cfg = load(e);
  service::Service svc(cfg);
  const int port = svc.start();
  e.out << "listening on " << cfg.host << ":" << port << std::endl;
  wait_for_signal();
  svc.stop();
  return kExitOk;
}

// ---- qa-engine ----

struct QaArgs {
  std::string stage;
  std::string captions;
  std::string out;
  std::string llm = "scene";
  std::string lmm = "scene";
  std::string manifests;
  std::string vocabulary;
  std::string record;
  std::size_t workers = 4;
  std::vector<std::string> subtasks;
  bool text_only = false;
};

std::set<std::string> vocabulary_from(const std::string& file) {
  std::set<std::string> out;
  if (file.empty()) return out;
  std::istringstream in(read_file(file));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.insert(line);
  }
  return out;
}

std::shared_ptr<qaengine::ModelClient> make_model(qaengine::ModelRole role, const std::string& source,
                                                  const std::set<std::string>& vocab) {
  if (source == "scene") {
    if (role == qaengine::ModelRole::kLlm) return std::make_shared<synth::SceneLlm>();
    return std::make_shared<synth::SceneLmm>(encoder::Palette(vocab));
  }
  if (source.rfind("replay:", 0) == 0) {
    const fs::path p = source.substr(7);
    if (!fs::exists(p)) throw Error(ErrorCode::kInvalidArgument, "replay file not found: " + p.string());
    return std::make_shared<qaengine::ReplayClient>(qaengine::ReplayClient::from_file(role, p));
  }
  if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
    const auto name = role == qaengine::ModelRole::kLlm ? "http-llm" : "http-lmm";
    return std::make_shared<qaengine::HttpModelClient>(role, source, name);
  }
  throw Error(ErrorCode::kInvalidArgument, "model source must be scene, replay:<file> or an http(s) URL");
}

int cmd_qa(Env& e, const QaArgs& a) {
  qaengine::EngineConfig cfg;
  cfg.captions = a.captions;
  cfg.out_dir = a.out;
  cfg.workers = a.workers;
  cfg.policy.multimodal = !a.text_only;
  if (!a.subtasks.empty()) {
    cfg.subtasks.clear();
    for (const auto& s : a.subtasks) cfg.subtasks.push_back(parse_subtask(s));
  }
  const auto vocab = vocabulary_from(a.vocabulary);
  std::shared_ptr<qaengine::ModelClient> llm = make_model(qaengine::ModelRole::kLlm, a.llm, vocab);
  std::shared_ptr<qaengine::ModelClient> lmm = make_model(qaengine::ModelRole::kLmm, a.lmm, vocab);
  std::shared_ptr<qaengine::RecordingClient> rec_llm, rec_lmm;
  if (!a.record.empty()) {
    rec_llm = std::make_shared<qaengine::RecordingClient>(llm);
    rec_lmm = std::make_shared<qaengine::RecordingClient>(lmm);
    llm = rec_llm;
    lmm = rec_lmm;
  }
  imaging::DirectoryFrameProvider frames;
  if (!a.manifests.empty()) {
    for (auto& m : read_jsonl_as<imaging::VideoManifest>(a.manifests)) frames.add(std::move(m));
  }
  qaengine::EngineClients clients{llm.get(), lmm.get(), &frames};
  auto save = [&] {
    if (rec_llm) {
      fs::create_directories(a.record);
      rec_llm->save(fs::path(a.record) / "llm.jsonl");
      rec_lmm->save(fs::path(a.record) / "lmm.jsonl");
    }
  };
  try {
    if (a.stage == "run") {
      qaengine::run_all(cfg, clients);
    } else {
      qaengine::run_stage(qaengine::parse_stage(a.stage), cfg, clients);
    }
  } catch (...) {
    save();
    throw;
  }
  save();
  const auto bench = fs::path(a.out) / qaengine::kBenchmarkFile;
  const auto review = fs::path(a.out) / qaengine::kReviewFile;
  Json summary{{"stage", a.stage}, {"out", a.out}};
  if (fs::exists(bench)) summary["accepted"] = read_jsonl(bench).size();
  if (fs::exists(review)) summary["review"] = read_jsonl(review).size();
  e.out << summary.dump() << "\n";
  return kExitOk;
}

// ---- mock ----

struct MockArgs {
  std::string kind;
  std::string host = "127.0.0.1";
  int port = 0;
  std::string vocabulary;
  std::size_t dimension = 512;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  std::string truth;
  double fidelity = 1.0;
  std::string replay;
};

int cmd_mock(Env& e, const MockArgs& a) {
  std::unique_ptr<service::MockServer> server;
  if (a.kind == "encoder") {
    encoder::MockEncoderConfig c;
    c.vocabulary = vocabulary_from(a.vocabulary);
    c.dimension = a.dimension;
    c.seed = a.seed;
    c.sigma = a.sigma;
    server = service::MockServer::encoder(c);
  } else if (a.kind == "vlm") {
    if (a.truth.empty()) throw Error(ErrorCode::kInvalidArgument, "mock vlm needs --truth");
    orchestrator::MockVlmConfig c;
    c.fidelity = a.fidelity;
    c.seed = a.seed;
    server = service::MockServer::vlm(orchestrator::truth_table(evalkit::load_samples(a.truth).samples), c);
  } else {
    const auto role = a.kind == "llm" ? qaengine::ModelRole::kLlm : qaengine::ModelRole::kLmm;
    server = service::MockServer::model(
        make_model(role, a.replay.empty() ? "scene" : "replay:" + a.replay, vocabulary_from(a.vocabulary)));
  }
  const int port = server->start(a.host, a.port);
  e.out << "mock " << a.kind << " listening on " << a.host << ":" << port << std::endl;
  wait_for_signal();
  server->stop();
  return kExitOk;
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  synth::WorldConfig world;
  std::size_t image_every = 5;
  std::size_t dimension = 512;
};

int cmd_synth(Env& e, const SynthArgs& a) {
  const auto world = synth::make_world(a.world);
  synth::OracleOptions opt;
  opt.image_every = a.image_every;
  synth::write_world(world, a.out, opt);
  write_jsonl_of(fs::path(a.out) / "captions.jsonl", synth::captions(world));
  std::ostringstream yaml;
  yaml << "# Service configuration for this synthetic world.\n"
       << "data_dir: data\n"
       << "encoder:\n  endpoint: \"mock://\"\n  dimension: " << a.dimension
       << "\n  vocabulary_file: vocabulary.txt\n"
       << "vlm:\n  endpoint: \"mock://\"\n  truth_file: benchmark.jsonl\n"
       << "qa_dir: qa\n";
  write_file(fs::path(a.out) / "foresearch.yaml", yaml.str());
  e.out << Json{{"out", a.out}, {"videos", world.videos.size()}}.dump() << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvFn& env) {
  CLI::App app{"foresearch: forensic video search", "foresearch"};
  app.require_subcommand(1);
  Env e{out, err, env, {}};
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", e.common.config, "YAML or JSON config file");
    sub->add_option("--data-dir", e.common.data_dir, "Override the data directory");
    sub->add_flag("--verbose", e.common.verbose, "Write structured logs to stderr");
  };

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Track, embed and index detections");
  s_ingest->add_option("--manifest", ingest.manifests, "Manifest JSON or manifests JSONL")->required();
  s_ingest->add_option("--detections", ingest.detections, "Detections JSONL")->required();
  add_common(s_ingest);

  std::string index_video;
  auto* s_index = app.add_subcommand("index", "Describe the index or list a video's clips");
  s_index->add_option("--video", index_video);
  add_common(s_index);

  QueryArgs query;
  auto* s_query = app.add_subcommand("query", "Search the index, optionally answering with the VLM");
  s_query->add_option("--text", query.text)->required();
  s_query->add_option("--image", query.image, "Query photo (PNG or JPEG)");
  s_query->add_option("--k", query.k);
  s_query->add_option("--video", query.video);
  s_query->add_option("--camera", query.camera);
  s_query->add_option("--from", query.from, "Time range start in seconds");
  s_query->add_option("--to", query.to, "Time range end in seconds");
  s_query->add_flag("--answer", query.answer);
  s_query->add_option("--option", query.options, "Answer option; repeat for each");
  s_query->add_flag("--json", query.json);
  add_common(s_query);

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "Score a benchmark live or against recorded predictions");
  s_eval->add_option("--benchmark", eval.benchmark)->required();
  s_eval->add_option("--predictions", eval.predictions);
  s_eval->add_option("--format", eval.format)->check(CLI::IsMember({"json", "markdown", "csv"}));
  s_eval->add_option("--ks", eval.ks)->delimiter(',');
  s_eval->add_option("--thresholds", eval.thresholds)->delimiter(',');
  s_eval->add_option("--subtasks", eval.subtasks)->delimiter(',');
  s_eval->add_option("--workers", eval.workers);
  add_common(s_eval);

  auto* s_serve = app.add_subcommand("serve", "Run the HTTP service");
  add_common(s_serve);

  QaArgs qa;
  auto* s_qa = app.add_subcommand("qa-engine", "Run data-engine stages");
  s_qa->add_option("stage", qa.stage, "extract | ground | generate | package | run")
      ->required()
      ->check(CLI::IsMember({"extract", "entities", "ground", "generate", "package", "validate", "run"}));
  s_qa->add_option("--captions", qa.captions)->required();
  s_qa->add_option("--out", qa.out)->required();
  s_qa->add_option("--llm", qa.llm, "scene | replay:<file> | http(s) URL");
  s_qa->add_option("--lmm", qa.lmm, "scene | replay:<file> | http(s) URL");
  s_qa->add_option("--manifests", qa.manifests, "Video manifests JSONL for grounding");
  s_qa->add_option("--vocabulary", qa.vocabulary, "Palette vocabulary for the scene LMM");
  s_qa->add_option("--record", qa.record, "Directory receiving llm.jsonl and lmm.jsonl replay files");
  s_qa->add_option("--workers", qa.workers);
  s_qa->add_option("--subtasks", qa.subtasks)->delimiter(',');
  s_qa->add_flag("--text-only", qa.text_only, "Skip photo variants");

  MockArgs mock;
  auto* s_mock = app.add_subcommand("mock", "Run a mock backend server");
  s_mock->add_option("kind", mock.kind)->required()->check(CLI::IsMember({"encoder", "vlm", "llm", "lmm"}));
  s_mock->add_option("--host", mock.host);
  s_mock->add_option("--port", mock.port);
  s_mock->add_option("--vocabulary", mock.vocabulary);
  s_mock->add_option("--dimension", mock.dimension);
  s_mock->add_option("--seed", mock.seed);
  s_mock->add_option("--sigma", mock.sigma);
  s_mock->add_option("--truth", mock.truth, "Benchmark JSONL answered by the mock VLM");
  s_mock->add_option("--fidelity", mock.fidelity);
  s_mock->add_option("--replay", mock.replay, "Replay file for llm/lmm instead of the scene model");

  SynthArgs syn;
  auto* s_synth = app.add_subcommand("synth", "Write a synthetic world with frames, detections and benchmark");
  s_synth->add_option("--out", syn.out)->required();
  s_synth->add_option("--videos", syn.world.videos);
  s_synth->add_option("--people", syn.world.people_per_video);
  s_synth->add_option("--fps", syn.world.fps);
  s_synth->add_option("--duration", syn.world.duration_seconds);
  s_synth->add_option("--width", syn.world.width);
  s_synth->add_option("--height", syn.world.height);
  s_synth->add_option("--seed", syn.world.seed);
  s_synth->add_option("--image-every", syn.image_every);
  s_synth->add_option("--dimension", syn.dimension, "Encoder dimension written to the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*s_ingest) return cmd_ingest(e, ingest);
    if (*s_index) return cmd_index(e, index_video);
    if (*s_query) return cmd_query(e, query);
    if (*s_eval) return cmd_eval(e, eval);
    if (*s_serve) return cmd_serve(e);
    if (*s_qa) return cmd_qa(e, qa);
    if (*s_mock) return cmd_mock(e, mock);
    if (*s_synth) return cmd_synth(e, syn);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return backend_code(ex.code()) ? kExitBackend : kExitInput;
  } catch (const Json::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace foresearch::cli
