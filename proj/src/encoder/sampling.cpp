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

#include "foresearch/encoder/sampling.hpp"

#include <string>

#include "foresearch/core/error.hpp"

namespace foresearch::encoder {

std::vector<std::int64_t> sample_frames(std::int64_t frame_count, std::int64_t budget) {
  if (frame_count < 1 || budget < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample_frames needs positive counts, got " + std::to_string(frame_count) +
                    " frames and budget " + std::to_string(budget));
  }
  std::vector<std::int64_t> out;
  if (frame_count <= budget) {
    out.resize(static_cast<std::size_t>(frame_count));
    for (std::int64_t i = 0; i < frame_count; ++i) out[static_cast<std::size_t>(i)] = i;
    return out;
  }
  out.reserve(static_cast<std::size_t>(budget));
  for (std::int64_t i = 0; i < budget; ++i) {
    // Integer form of floor((i + 0.5) * m / M), exact for any size.
    out.push_back(((2 * i + 1) * frame_count) / (2 * budget));
  }
  return out;
}

}  // namespace foresearch::encoder
