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

#include "foresearch/evalkit/live.hpp"

namespace foresearch::evalkit {

SystemFn pipeline_system(const orchestrator::Pipeline& pipeline) {
  return [&pipeline](const QASample& sample) {
    auto result = pipeline.run_sample(sample);
    SystemOutput out;
    out.prediction.sample_id = sample.sample_id;
    if (result.response) out.prediction = orchestrator::to_prediction(sample.sample_id, *result.response);
    out.hits = std::move(result.hits);
    out.frames_sent = result.frames_sent;
    out.retrieval_ms = result.timings.retrieval_ms;
    out.ttft_ms = result.timings.ttft_ms;
    out.generation_ms = result.timings.generation_ms;
    out.total_ms = result.timings.total_ms;
    return out;
  };
}

}  // namespace foresearch::evalkit
