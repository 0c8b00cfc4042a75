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

#include "foresearch/core/prompts.hpp"

#include <map>

#include "foresearch/core/error.hpp"

namespace foresearch {

namespace detail {
const std::map<std::string, std::string_view, std::less<>>& prompt_assets();
}

std::string_view prompt_asset(std::string_view name) {
  const auto& assets = detail::prompt_assets();
  auto it = assets.find(name);
  if (it == assets.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown prompt asset '" + std::string(name) + "'");
  }
  return it->second;
}

std::vector<std::string> prompt_asset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : detail::prompt_assets()) names.push_back(name);
  return names;
}

std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out(tmpl);
  for (const auto& [key, value] : values) {
    const std::string marker = "{{" + key + "}}";
    std::size_t pos = 0;
    while ((pos = out.find(marker, pos)) != std::string::npos) {
      out.replace(pos, marker.size(), value);
      pos += value.size();
    }
  }
  return out;
}

}  // namespace foresearch
