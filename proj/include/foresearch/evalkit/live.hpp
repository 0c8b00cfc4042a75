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

#include "foresearch/evalkit/evalkit.hpp"
#include "foresearch/orchestrator/pipeline.hpp"

namespace foresearch::evalkit {

// Adapts a pipeline to the live benchmark runner. A VLM outage yields an
// unparsed prediction; the pipeline must outlive the returned function.
SystemFn pipeline_system(const orchestrator::Pipeline& pipeline);

}  // namespace foresearch::evalkit
