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

// Serial reference scan against the OpenMP scan, through the raw kernels and
// through VectorIndex::search. Arguments are rows and dimension.

#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "foresearch/vecindex/index.hpp"
#include "foresearch/vecindex/kernels.hpp"

using namespace foresearch;
using namespace foresearch::vecindex;

namespace {

std::vector<float> unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> n;
  std::vector<float> v(dim);
  double s = 0.0;
  for (auto& x : v) {
    x = n(rng);
    s += static_cast<double>(x) * x;
  }
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(s));
  return v;
}

struct Corpus {
  std::size_t dim;
  std::vector<float> data;
  std::vector<std::string> ids;
  std::vector<float> query;

  Corpus(std::size_t rows, std::size_t d) : dim(d) {
    std::mt19937_64 rng(rows * 31 + d);
    data.reserve(rows * d);
    char buf[32];
    for (std::size_t i = 0; i < rows; ++i) {
      const auto v = unit(rng, d);
      data.insert(data.end(), v.begin(), v.end());
      std::snprintf(buf, sizeof(buf), "c%07zu", i);
      ids.emplace_back(buf);
    }
    query = unit(rng, d);
  }
};

template <bool Parallel>
void BM_Kernel(benchmark::State& state) {
  const Corpus c(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const RowBlock block{c.data.data(), c.ids.size(), 0};
  const RowKey key = [&](std::uint64_t row) -> const std::string& { return c.ids[row]; };
  for (auto _ : state) {
    auto top = Parallel ? scan_topk_parallel({&block, 1}, c.dim, c.query, 10, key)
                        : scan_topk_serial({&block, 1}, c.dim, c.query, 10, key);
    benchmark::DoNotOptimize(top);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <ScanMode Mode>
void BM_Index(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const Corpus c(rows, dim);
  VectorIndex index(dim);
  for (std::size_t i = 0; i < rows; ++i) {
    Clip clip;
    clip.clip_id = c.ids[i];
    clip.video_id = "v";
    index.insert({c.ids[i], std::vector<float>(c.data.begin() + i * dim, c.data.begin() + (i + 1) * dim), 1.0},
                 clip);
  }
  for (auto _ : state) {
    auto hits = index.search(c.query, 10, {}, Mode);
    benchmark::DoNotOptimize(hits);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({10000, 128})->Args({100000, 128})->Args({100000, 512})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_Kernel<false>)->Name("scan/serial")->Apply(sizes);
BENCHMARK(BM_Kernel<true>)->Name("scan/parallel")->Apply(sizes);
BENCHMARK(BM_Index<ScanMode::kSerial>)->Name("index/serial")->Apply(sizes);
BENCHMARK(BM_Index<ScanMode::kParallel>)->Name("index/parallel")->Apply(sizes);

BENCHMARK_MAIN();
