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
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foresearch/core/types.hpp"

namespace foresearch::vecindex {

struct SearchHit {
  std::string clip_id;
  double score = 0.0;
  Clip clip;

  bool operator==(const SearchHit&) const = default;
};

// Metadata predicate. Time ranges match clips whose span intersects them.
struct SearchFilter {
  std::optional<std::string> camera_id;
  std::optional<std::string> video_id;
  std::optional<TimeInterval> time_range;

  bool empty() const { return !camera_id && !video_id && !time_range; }
  bool accepts(const Clip& clip) const;
};

enum class ScanMode { kSerial, kParallel };

// Fixed-capacity storage block. Rows below a snapshot's count are immutable.
struct Segment {
  Segment(std::size_t dim, std::size_t capacity);

  std::size_t capacity;
  std::unique_ptr<float[]> vectors;
  std::unique_ptr<std::string[]> ids;
  std::unique_ptr<Clip[]> clips;
};

// Immutable view published by the writer. Searches run against a snapshot
// without holding any lock.
struct Snapshot {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<std::shared_ptr<Segment>> segments;
  std::shared_ptr<const std::vector<bool>> tombstones;  // indexed by row; may be shorter than count

  bool live(std::uint64_t row) const;
  const std::string& id(std::uint64_t row) const;
  const Clip& clip(std::uint64_t row) const;
  const float* vector(std::uint64_t row) const;
  std::size_t live_count() const;
};

// Exact flat cosine index over unit vectors with a clip metadata sidecar.
// Many concurrent readers, one writer at a time.
class VectorIndex {
 public:
  static constexpr std::size_t kSegmentRows = 4096;

  explicit VectorIndex(std::size_t dimension);
  VectorIndex(VectorIndex&& other) noexcept;
  VectorIndex& operator=(VectorIndex&&) = delete;

  std::size_t dimension() const { return dim_; }
  std::size_t size() const;

  // The stored vector is L2-normalised. Throws DimensionMismatch or DuplicateClipId.
  void insert(const EmbeddingRecord& record, const Clip& clip);
  // Tombstones the clip; returns false when it is unknown.
  bool remove(const std::string& clip_id);
  bool contains(const std::string& clip_id) const;

  std::vector<SearchHit> search(std::span<const float> query, std::size_t k,
                                const SearchFilter& filter = {},
                                ScanMode mode = ScanMode::kSerial) const;

  std::optional<Clip> clip(const std::string& clip_id) const;
  std::optional<std::vector<float>> vector(const std::string& clip_id) const;
  std::vector<Clip> clips(const SearchFilter& filter = {}) const;

  std::shared_ptr<const Snapshot> snapshot() const;

  // Vector file plus "<path>.meta.jsonl" sidecar. Tombstoned rows are dropped.
  void save(const std::filesystem::path& path) const;
  // Throws CorruptIndex on bad magic, truncation, checksum or sidecar mismatch.
  static VectorIndex load(const std::filesystem::path& path);

 private:
  void publish(std::shared_ptr<const Snapshot> next);

  std::size_t dim_;
  mutable std::mutex writer_;
  std::map<std::string, std::uint64_t> rows_;  // writer-owned
  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> current_;
};

std::filesystem::path sidecar_path(const std::filesystem::path& index_path);

}  // namespace foresearch::vecindex
