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

// Exact top-k scan kernels. scan_topk_serial is the reference implementation
// kept for testing; scan_topk_parallel shards the rows across OpenMP threads
// and merges per-thread heaps under the same total order, so both return
// identical results for any input.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace foresearch::vecindex {

// Dot product accumulated in double over 8 lanes in a fixed order; every scan
// path uses this so scores are bit-identical between kernels.
double dot(const float* a, const float* b, std::size_t n);

// A contiguous block of row-major vectors.
struct RowBlock {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::uint64_t first_row = 0;  // global row number of data[0]
};

struct Candidate {
  double score = 0.0;
  std::uint64_t row = 0;
};

// Tie key lookup (clip id) for a global row.
using RowKey = std::function<const std::string&(std::uint64_t row)>;
// Row admission; empty accepts every row.
using RowFilter = std::function<bool(std::uint64_t row)>;

// Ordering used everywhere: higher score first, then ascending key.
bool ranks_before(const Candidate& a, const Candidate& b, const RowKey& key);

std::vector<Candidate> scan_topk_serial(std::span<const RowBlock> blocks, std::size_t dim,
                                        std::span<const float> query, std::size_t k,
                                        const RowKey& key, const RowFilter& filter = {});

std::vector<Candidate> scan_topk_parallel(std::span<const RowBlock> blocks, std::size_t dim,
                                          std::span<const float> query, std::size_t k,
                                          const RowKey& key, const RowFilter& filter = {},
                                          int threads = 0);

}  // namespace foresearch::vecindex
