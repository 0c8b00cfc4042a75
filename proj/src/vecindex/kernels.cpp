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

#include "foresearch/vecindex/kernels.hpp"

#include <algorithm>
#include <queue>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace foresearch::vecindex {

// Cloned for AVX2 where the CPU has it. Contraction stays off under ISO C++,
// so every clone rounds identically.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
__attribute__((target_clones("avx2", "default")))
#endif
double dot(const float* a, const float* b, std::size_t n) {
  constexpr std::size_t kLanes = 8;
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      acc[l] += static_cast<double>(a[i + l]) * static_cast<double>(b[i + l]);
    }
  }
  for (std::size_t l = kLanes / 2; l > 0; l /= 2) {
    for (std::size_t j = 0; j < l; ++j) acc[j] += acc[j + l];
  }
  double s = acc[0];
  for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

bool ranks_before(const Candidate& a, const Candidate& b, const RowKey& key) {
  if (a.score != b.score) return a.score > b.score;
  if (a.row == b.row) return false;
  return key(a.row) < key(b.row);
}

namespace {

// Bounded heap whose top is the worst kept candidate.
class TopK {
 public:
  TopK(std::size_t k, const RowKey& key)
      : k_(k), key_(&key), heap_([this](const Candidate& a, const Candidate& b) {
          return ranks_before(a, b, *key_);
        }) {}

  void offer(const Candidate& c) {
    if (k_ == 0) return;
    if (heap_.size() < k_) {
      heap_.push(c);
    } else if (ranks_before(c, heap_.top(), *key_)) {
      heap_.pop();
      heap_.push(c);
    }
  }

  std::vector<Candidate> take() {
    std::vector<Candidate> out;
    out.reserve(heap_.size());
    while (!heap_.empty()) {
      out.push_back(heap_.top());
      heap_.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  using Cmp = std::function<bool(const Candidate&, const Candidate&)>;
  std::size_t k_;
  const RowKey* key_;
  std::priority_queue<Candidate, std::vector<Candidate>, Cmp> heap_;
};

inline double clamp_score(double s) { return std::clamp(s, -1.0, 1.0); }

void scan_block(const RowBlock& block, std::size_t begin, std::size_t end, std::size_t dim,
                const float* q, const RowFilter& filter, TopK& top) {
  for (std::size_t r = begin; r < end; ++r) {
    const std::uint64_t row = block.first_row + r;
    if (filter && !filter(row)) continue;
    top.offer({clamp_score(dot(block.data + r * dim, q, dim)), row});
  }
}

}  // namespace

std::vector<Candidate> scan_topk_serial(std::span<const RowBlock> blocks, std::size_t dim,
                                        std::span<const float> query, std::size_t k,
                                        const RowKey& key, const RowFilter& filter) {
  TopK top(k, key);
  for (const auto& block : blocks) scan_block(block, 0, block.rows, dim, query.data(), filter, top);
  return top.take();
}

std::vector<Candidate> scan_topk_parallel(std::span<const RowBlock> blocks, std::size_t dim,
                                          std::span<const float> query, std::size_t k,
                                          const RowKey& key, const RowFilter& filter,
                                          int threads) {
  constexpr std::size_t kChunk = 2048;
  struct Task {
    std::size_t block, begin, end;
  };
  std::vector<Task> tasks;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t r = 0; r < blocks[b].rows; r += kChunk) {
      tasks.push_back({b, r, std::min(blocks[b].rows, r + kChunk)});
    }
  }
  int n_threads = 1;
#ifdef _OPENMP
  n_threads = threads > 0 ? threads : omp_get_max_threads();
#endif
  std::vector<std::vector<Candidate>> partial(static_cast<std::size_t>(n_threads));

#pragma omp parallel num_threads(n_threads)
  {
    int tid = 0;
#ifdef _OPENMP
    tid = omp_get_thread_num();
#endif
    TopK local(k, key);
#pragma omp for schedule(dynamic)
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      scan_block(blocks[tasks[t].block], tasks[t].begin, tasks[t].end, dim, query.data(), filter,
                 local);
    }
    partial[static_cast<std::size_t>(tid)] = local.take();
  }

  TopK merged(k, key);
  for (const auto& part : partial) {
    for (const auto& c : part) merged.offer(c);
  }
  return merged.take();
}

}  // namespace foresearch::vecindex
