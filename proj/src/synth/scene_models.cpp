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

#include "foresearch/synth/scene_models.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include "foresearch/core/error.hpp"

namespace foresearch::synth {

namespace {

std::string readable(const std::string& label) {
  auto s = label;
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

Json interval(double s, double e) { return {{"start", s}, {"end", e}}; }

// The engine serialises its input as one compact line starting with {"captions".
Json input_of(const std::string& prompt) {
  const auto pos = prompt.find("{\"captions\"");
  if (pos == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "prompt carries no caption input");
  const auto end = prompt.find('\n', pos);
  return Json::parse(prompt.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
}

const std::regex& person_re() {
  static const std::regex re(R"(person in (?:a |the )?([a-z]+) ([a-z]+))");
  return re;
}

struct Mention {
  std::string ref;  // "person in red jacket"
  double start, end;
  bool run;
};

std::vector<Mention> mentions(const Json& captions) {
  std::vector<Mention> out;
  for (const auto& c : captions) {
    const auto text = c.at("text").get<std::string>();
    std::smatch m;
    if (!std::regex_search(text, m, person_re())) continue;
    out.push_back({"person in " + m[1].str() + " " + m[2].str(), c.at("start").get<double>(),
                   c.at("end").get<double>(), text.find("suddenly") != std::string::npos});
  }
  return out;
}

Json entities(const Json& captions) {
  std::map<std::string, Json> grouped;
  std::vector<std::string> order;
  for (const auto& m : mentions(captions)) {
    if (!grouped.count(m.ref)) {
      grouped[m.ref] = {{"reference", m.ref}, {"mentions", Json::array()}};
      order.push_back(m.ref);
    }
    grouped[m.ref]["mentions"].push_back(interval(m.start, m.end));
  }
  Json out = Json::array();
  for (const auto& r : order) out.push_back(grouped[r]);
  return out;
}

Json generate(const std::string& prompt_id, const Json& input) {
  const auto all = mentions(input.at("captions"));
  Json out = Json::array();
  if (prompt_id.find("counting") != std::string::npos) {
    std::vector<const Mention*> firsts;
    std::map<std::string, bool> seen;
    for (const auto& m : all) {
      if (!seen[m.ref]) firsts.push_back(&m);
      seen[m.ref] = true;
    }
    if (firsts.empty()) return out;
    const auto n = firsts.size();
    Json ts = Json::array();
    for (const auto* m : firsts) ts.push_back(interval(m->start, m->end));
    out.push_back({{"question", "How many people walk through the scene?"},
                   {"answer", std::to_string(n) + " people"},
                   {"distractors", {std::to_string(n - 1) + " people", std::to_string(n + 1) + " people",
                                    std::to_string(n + 2) + " people"}},
                   {"timestamps", ts}});
    return out;
  }
  if (prompt_id.find("anomaly") != std::string::npos) {
    for (const auto& m : all) {
      if (!m.run) continue;
      out.push_back({{"question", "Which of the following describes the unusual event?"},
                     {"answer", "a person suddenly starts running"},
                     {"distractors", {"a car crashes into a wall", "a fight breaks out", "a bag is left behind"}},
                     {"timestamp", interval(m.start, m.end)}});
    }
    // A hallucinated event with no caption behind it; the engine must drop it.
    out.push_back({{"question", "What unexpected behavior was observed?"},
                   {"answer", "a person climbs a fence"},
                   {"distractors", {"a person falls", "a person shouts", "a dog runs past"}},
                   {"timestamp", interval(5000.0, 5010.0)}});
    return out;
  }

  const auto ref = input.at("person_reference").get<std::string>();
  std::vector<Mention> mine;
  for (const auto& m : all) {
    if (m.ref == ref) mine.push_back(m);
  }
  if (mine.empty()) return out;
  double lo = mine.front().start, hi = mine.front().end;
  bool runs = false;
  for (const auto& m : mine) {
    lo = std::min(lo, m.start);
    hi = std::max(hi, m.end);
    runs = runs || m.run;
  }
  const auto hull = interval(lo, hi);
  const std::string the = "the " + ref;

  if (prompt_id.find("search") != std::string::npos) {
    out.push_back({{"question", "Is there a " + ref + " in the video?"},
                   {"question_indirect", "Does this person appear in the video?"},
                   {"answer", "Yes"},
                   {"person", ref},
                   {"timestamp", hull}});
  } else if (prompt_id.find("activity") != std::string::npos) {
    const std::string answer = runs ? "running" : "walking";
    std::vector<std::string> distractors{"sitting", "waving", runs ? "walking" : "running"};
    // Black-clothed people get a sloppy duplicate distractor, which the
    // automated checks must route to review.
    if (ref.find("black") != std::string::npos) distractors = {"sitting", "Sitting", "waving"};
    out.push_back({{"question", "What is " + the + " doing?"},
                   {"answer", answer},
                   {"distractors", distractors},
                   {"person", ref},
                   {"timestamp", hull}});
  } else if (prompt_id.find("event") != std::string::npos) {
    out.push_back({{"question", "What role did " + the + " play in the scene?"},
                   {"answer", "passer-by"},
                   {"distractors", {"instigator", "victim", "security guard"}},
                   {"person", ref},
                   {"timestamp", hull}});
  } else if (prompt_id.find("temporal") != std::string::npos) {
    out.push_back({{"question", "What did " + the + " do first?"},
                   {"answer", "walked into view"},
                   {"distractors", {"left the scene", "sat down", "waved at someone"}},
                   {"person", ref},
                   {"timestamp", interval(mine.front().start, mine.front().end)}});
  }
  return out;
}

std::string reference_of(const std::string& prompt) {
  const auto b = prompt.find("described as \"");
  if (b == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "prompt names no person");
  const auto s = b + 14;
  return prompt.substr(s, prompt.find('"', s) - s);
}

}  // namespace

qaengine::CaptionTrack captions(const SynthVideo& video) {
  qaengine::CaptionTrack track;
  track.video_id = video.manifest.video_id;
  const double fps = video.manifest.fps;
  for (std::size_t i = 0; i < video.people.size(); ++i) {
    const auto& p = video.people[i];
    const auto mid = (p.first_frame + p.last_frame) / 2;
    const auto r = readable(p.label);
    track.captions.push_back({p.first_frame / fps, mid / fps, "A person in a " + r + " walks into view."});
    track.captions.push_back({mid / fps, p.last_frame / fps,
                              i == 0 ? "The person in the " + r + " suddenly breaks into a run."
                                     : "The person in the " + r + " keeps walking along the lane."});
  }
  std::stable_sort(track.captions.begin(), track.captions.end(),
                   [](const qaengine::Caption& a, const qaengine::Caption& b) { return a.start < b.start; });
  return track;
}

std::vector<qaengine::CaptionTrack> captions(const World& world) {
  std::vector<qaengine::CaptionTrack> out;
  for (const auto& v : world.videos) out.push_back(captions(v));
  return out;
}

std::string SceneLlm::complete(const qaengine::ModelRequest& request) {
  const auto input = input_of(request.text);
  if (request.prompt_id == "qa_entities_v1") return entities(input.at("captions")).dump();
  return generate(request.prompt_id, input).dump();
}

std::string SceneLmm::complete(const qaengine::ModelRequest& request) {
  if (request.images.empty()) throw Error(ErrorCode::kInvalidArgument, "multimodal prompt without an image");
  const auto ref = reference_of(request.text);
  std::smatch m;
  if (!std::regex_search(ref, m, person_re())) {
    return request.prompt_id == "qa_verify_v1" ? R"({"present": false})" : R"({"box": null})";
  }
  const auto label = m[1].str() + "_" + m[2].str();
  const auto& img = request.images.front();
  const bool known = palette_.vocabulary().count(label) > 0;
  const auto colour = known ? palette_.color_of(label) : imaging::Rgb{};
  int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
  std::size_t hits = 0;
  for (int y = 0; known && y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (img.at(x, y) != colour) continue;
      ++hits;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (request.prompt_id == "qa_verify_v1") {
    const auto total = static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.height());
    return Json{{"present", total > 0 && hits * 2 >= total}}.dump();
  }
  if (hits == 0) return R"({"box": null})";
  return Json{{"box", {x0, y0, x1 - x0 + 1, y1 - y0 + 1}}}.dump();
}

}  // namespace foresearch::synth
