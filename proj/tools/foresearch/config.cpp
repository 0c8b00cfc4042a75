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

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "foresearch/core/error.hpp"

namespace foresearch::cli {

namespace {

Json scalar(const YAML::Node& node) {
  const auto& s = node.Scalar();
  // Quoted scalars carry the "!" tag and stay strings.
  if (node.Tag() == "!") return s;
  if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  long long i = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ec == std::errc() && p == s.data() + s.size() && !s.empty()) return i;
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (!s.empty() && end == s.c_str() + s.size()) return d;
  return s;
}

Json to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Scalar: return scalar(node);
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      for (const auto& item : node) arr.push_back(to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = to_json(kv.second);
      return obj;
    }
  }
  return nullptr;
}

void set_path(Json& j, std::initializer_list<const char*> path, Json value) {
  Json* node = &j;
  for (auto it = path.begin(); it != path.end(); ++it) {
    if (std::next(it) == path.end()) {
      (*node)[*it] = std::move(value);
    } else {
      if (!node->contains(*it) || !(*node)[*it].is_object()) (*node)[*it] = Json::object();
      node = &(*node)[*it];
    }
  }
}

Json number_or_string(const std::string& v) {
  long long i = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ec == std::errc() && p == v.data() + v.size()) return i;
  return v;
}

std::set<std::string> read_vocabulary(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read vocabulary file " + p.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

Json load_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kInvalidArgument, "config file not found: " + path.string());
  }
  try {
    auto j = to_json(YAML::LoadFile(path.string()));
    if (j.is_null()) return Json::object();
    if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config file must hold a mapping");
    return j;
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "cannot parse " + path.string() + ": " + e.what());
  }
}

void apply_env(Json& config, const EnvFn& env) {
  struct Binding {
    const char* var;
    std::initializer_list<const char*> path;
  };
  const Binding bindings[] = {
      {"FORESEARCH_HOST", {"listen", "host"}},
      {"FORESEARCH_PORT", {"listen", "port"}},
      {"FORESEARCH_DATA_DIR", {"data_dir"}},
      {"FORESEARCH_INDEX_PATH", {"index_path"}},
      {"FORESEARCH_ENCODER_ENDPOINT", {"encoder", "endpoint"}},
      {"FORESEARCH_ENCODER_DIMENSION", {"encoder", "dimension"}},
      {"FORESEARCH_ENCODER_VOCABULARY_FILE", {"encoder", "vocabulary_file"}},
      {"FORESEARCH_VLM_ENDPOINT", {"vlm", "endpoint"}},
      {"FORESEARCH_VLM_TRUTH_FILE", {"vlm", "truth_file"}},
      {"FORESEARCH_AUTH_TOKEN", {"auth_token"}},
      {"FORESEARCH_QA_DIR", {"qa_dir"}},
  };
  for (const auto& b : bindings) {
    if (auto v = env(b.var)) set_path(config, b.path, number_or_string(*v));
  }
}

service::ServiceConfig resolve_config(const std::optional<std::filesystem::path>& file, const EnvFn& env) {
  Json j = file ? load_config_file(*file) : Json::object();
  if (file) {
    // Relative paths inside the file are relative to the file itself.
    const auto base = std::filesystem::absolute(*file).parent_path();
    auto rebase = [&](Json& node, const char* key) {
      if (node.is_object() && node.contains(key) && node[key].is_string()) {
        std::filesystem::path p = node[key].get<std::string>();
        if (!p.empty() && p.is_relative()) node[key] = (base / p).lexically_normal().string();
      }
    };
    rebase(j, "data_dir");
    rebase(j, "index_path");
    rebase(j, "qa_dir");
    if (j.contains("encoder")) rebase(j["encoder"], "vocabulary_file");
    if (j.contains("vlm")) rebase(j["vlm"], "truth_file");
  }
  apply_env(j, env);
  if (j.contains("encoder") && j["encoder"].contains("vocabulary_file")) {
    auto& e = j["encoder"];
    const auto words = read_vocabulary(e["vocabulary_file"].get<std::string>());
    e["vocabulary"] = words;
    e.erase("vocabulary_file");
  }
  service::ServiceConfig cfg;
  from_json(j, cfg);
  cfg.validate();
  return cfg;
}

}  // namespace foresearch::cli
