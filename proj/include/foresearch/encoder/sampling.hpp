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

#include <cstdint>
#include <vector>

namespace foresearch::encoder {

// Uniform frame sampling S(.). Returns [0, frame_count) when the clip fits the
// budget, otherwise floor((i + 0.5) * frame_count / budget) for i < budget.
// Requires frame_count >= 1 and budget >= 1.
std::vector<std::int64_t> sample_frames(std::int64_t frame_count, std::int64_t budget);

}  // namespace foresearch::encoder
