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

#include "foresearch/vecindex/index.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "foresearch/core/error.hpp"
#include "foresearch/core/json.hpp"
#include "foresearch/vecindex/kernels.hpp"

namespace foresearch::vecindex {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'E', 'A', 'I', 'D', 'X', '1'};
constexpr std::uint8_t kMetricCosine = 0;
constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 1;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return static_cast<T>(v);
}

std::uint32_t crc32_of(const std::string& bytes, std::size_t len) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < len) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(len - done, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + done), chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& why) {
  throw Error(ErrorCode::kCorruptIndex, path.string() + ": " + why);
}

RowKey key_of(const Snapshot& snap) {
  return [&snap](std::uint64_t row) -> const std::string& { return snap.id(row); };
}

std::vector<RowBlock> blocks_of(const Snapshot& snap) {
  std::vector<RowBlock> blocks;
  std::uint64_t first = 0;
  for (const auto& seg : snap.segments) {
    if (first >= snap.count) break;
    const auto rows = std::min<std::uint64_t>(seg->capacity, snap.count - first);
    blocks.push_back({seg->vectors.get(), static_cast<std::size_t>(rows), first});
    first += seg->capacity;
  }
  return blocks;
}

}  // namespace

bool SearchFilter::accepts(const Clip& clip) const {
  if (camera_id && clip.camera_id != *camera_id) return false;
  if (video_id && clip.video_id != *video_id) return false;
  if (time_range &&
      (clip.span.end < time_range->start || clip.span.start > time_range->end)) {
    return false;
  }
  return true;
}

Segment::Segment(std::size_t dim, std::size_t cap)
    : capacity(cap),
      vectors(new float[dim * cap]),
      ids(new std::string[cap]),
      clips(new Clip[cap]) {}

namespace {

// Segments start small and double up to the full segment size.
std::size_t segment_capacity(std::size_t index) {
  return std::min<std::size_t>(VectorIndex::kSegmentRows, std::size_t{64} << std::min<std::size_t>(index, 6));
}

std::pair<std::size_t, std::size_t> locate(const Snapshot& snap, std::uint64_t row) {
  std::size_t s = 0;
  while (row >= snap.segments[s]->capacity) {
    row -= snap.segments[s]->capacity;
    ++s;
  }
  return {s, static_cast<std::size_t>(row)};
}

}  // namespace

bool Snapshot::live(std::uint64_t row) const {
  return row < count && !(tombstones && row < tombstones->size() && (*tombstones)[row]);
}

const std::string& Snapshot::id(std::uint64_t row) const {
  const auto [s, r] = locate(*this, row);
  return segments[s]->ids[r];
}

const Clip& Snapshot::clip(std::uint64_t row) const {
  const auto [s, r] = locate(*this, row);
  return segments[s]->clips[r];
}

const float* Snapshot::vector(std::uint64_t row) const {
  const auto [s, r] = locate(*this, row);
  return segments[s]->vectors.get() + r * dim;
}

std::size_t Snapshot::live_count() const {
  std::size_t dead = 0;
  if (tombstones) {
    for (std::size_t i = 0; i < std::min(count, tombstones->size()); ++i) dead += (*tombstones)[i];
  }
  return count - dead;
}

VectorIndex::VectorIndex(std::size_t dimension) : dim_(dimension) {
  if (dimension == 0) throw Error(ErrorCode::kInvalidArgument, "index dimension must be positive");
  auto snap = std::make_shared<Snapshot>();
  snap->dim = dim_;
  current_ = std::move(snap);
}

VectorIndex::VectorIndex(VectorIndex&& other) noexcept : dim_(other.dim_) {
  std::scoped_lock lock(other.writer_, other.snap_mu_);
  rows_ = std::move(other.rows_);
  current_ = std::move(other.current_);
  auto empty = std::make_shared<Snapshot>();
  empty->dim = dim_;
  other.current_ = std::move(empty);
}

std::shared_ptr<const Snapshot> VectorIndex::snapshot() const {
  std::lock_guard lock(snap_mu_);
  return current_;
}

void VectorIndex::publish(std::shared_ptr<const Snapshot> next) {
  std::lock_guard lock(snap_mu_);
  current_ = std::move(next);
}

std::size_t VectorIndex::size() const { return snapshot()->live_count(); }

void VectorIndex::insert(const EmbeddingRecord& record, const Clip& clip) {
  if (record.vector.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                record.clip_id + " has dimension " + std::to_string(record.vector.size()) +
                    ", index expects " + std::to_string(dim_));
  }
  if (record.clip_id != clip.clip_id) {
    throw Error(ErrorCode::kInvalidArgument, "record and clip ids differ: " + record.clip_id +
                                                 " vs " + clip.clip_id);
  }
  std::vector<float> v = record.vector;
  double n = 0.0;
  for (float x : v) n += static_cast<double>(x) * x;
  n = std::sqrt(n);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidArgument, record.clip_id + " has a zero or non-finite vector");
  }
  for (float& x : v) x = static_cast<float>(x / n);

  std::lock_guard lock(writer_);
  if (rows_.contains(record.clip_id)) {
    throw Error(ErrorCode::kDuplicateClipId, record.clip_id);
  }
  const auto prev = snapshot();
  auto next = std::make_shared<Snapshot>(*prev);
  const std::uint64_t row = next->count;
  std::uint64_t total_cap = 0;
  for (const auto& seg : next->segments) total_cap += seg->capacity;
  if (row >= total_cap) {
    next->segments.push_back(
        std::make_shared<Segment>(dim_, segment_capacity(next->segments.size())));
  }
  const auto [s, r] = locate(*next, row);
  auto& seg = *next->segments[s];
  std::copy(v.begin(), v.end(), seg.vectors.get() + r * dim_);
  seg.ids[r] = record.clip_id;
  seg.clips[r] = clip;
  next->count = row + 1;
  rows_[record.clip_id] = row;
  publish(std::move(next));
}

bool VectorIndex::remove(const std::string& clip_id) {
  std::lock_guard lock(writer_);
  auto it = rows_.find(clip_id);
  if (it == rows_.end()) return false;
  const auto prev = snapshot();
  auto next = std::make_shared<Snapshot>(*prev);
  auto stones = prev->tombstones ? std::make_shared<std::vector<bool>>(*prev->tombstones)
                                 : std::make_shared<std::vector<bool>>();
  stones->resize(next->count, false);
  (*stones)[it->second] = true;
  next->tombstones = std::move(stones);
  rows_.erase(it);
  publish(std::move(next));
  return true;
}

bool VectorIndex::contains(const std::string& clip_id) const {
  std::lock_guard lock(writer_);
  return rows_.contains(clip_id);
}

std::vector<SearchHit> VectorIndex::search(std::span<const float> query, std::size_t k,
                                           const SearchFilter& filter, ScanMode mode) const {
  if (query.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query has dimension " + std::to_string(query.size()) + ", index expects " +
                    std::to_string(dim_));
  }
  const auto snap = snapshot();
  if (k == 0 || snap->count == 0) return {};
  std::vector<float> q(query.begin(), query.end());
  double n = 0.0;
  for (float x : q) n += static_cast<double>(x) * x;
  n = std::sqrt(n);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidArgument, "query vector is zero or non-finite");
  }
  for (float& x : q) x = static_cast<float>(x / n);

  const auto blocks = blocks_of(*snap);
  const auto key = key_of(*snap);
  RowFilter row_filter;
  if (!filter.empty() || snap->tombstones) {
    row_filter = [&](std::uint64_t row) {
      return snap->live(row) && (filter.empty() || filter.accepts(snap->clip(row)));
    };
  }
  const auto found = mode == ScanMode::kSerial
                         ? scan_topk_serial(blocks, dim_, q, k, key, row_filter)
                         : scan_topk_parallel(blocks, dim_, q, k, key, row_filter);
  std::vector<SearchHit> hits;
  hits.reserve(found.size());
  for (const auto& c : found) hits.push_back({snap->id(c.row), c.score, snap->clip(c.row)});
  return hits;
}

std::optional<Clip> VectorIndex::clip(const std::string& clip_id) const {
  std::uint64_t row = 0;
  {
    std::lock_guard lock(writer_);
    auto it = rows_.find(clip_id);
    if (it == rows_.end()) return std::nullopt;
    row = it->second;
  }
  const auto snap = snapshot();
  if (!snap->live(row)) return std::nullopt;
  return snap->clip(row);
}

std::optional<std::vector<float>> VectorIndex::vector(const std::string& clip_id) const {
  std::uint64_t row = 0;
  {
    std::lock_guard lock(writer_);
    auto it = rows_.find(clip_id);
    if (it == rows_.end()) return std::nullopt;
    row = it->second;
  }
  const auto snap = snapshot();
  if (!snap->live(row)) return std::nullopt;
  const float* v = snap->vector(row);
  return std::vector<float>(v, v + dim_);
}

std::vector<Clip> VectorIndex::clips(const SearchFilter& filter) const {
  const auto snap = snapshot();
  std::vector<Clip> out;
  for (std::uint64_t row = 0; row < snap->count; ++row) {
    if (snap->live(row) && filter.accepts(snap->clip(row))) out.push_back(snap->clip(row));
  }
  std::sort(out.begin(), out.end(),
            [](const Clip& a, const Clip& b) { return a.clip_id < b.clip_id; });
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& index_path) {
  auto p = index_path;
  p += ".meta.jsonl";
  return p;
}

void VectorIndex::save(const std::filesystem::path& path) const {
  const auto snap = snapshot();
  std::vector<std::uint64_t> rows;
  for (std::uint64_t row = 0; row < snap->count; ++row) {
    if (snap->live(row)) rows.push_back(row);
  }
  std::string bytes(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(dim_));
  put_le<std::uint64_t>(bytes, rows.size());
  put_le<std::uint8_t>(bytes, kMetricCosine);
  std::string meta;
  for (auto row : rows) {
    const auto& id = snap->id(row);
    if (id.size() > 0xffff) throw Error(ErrorCode::kInvalidArgument, "clip id too long: " + id);
    put_le<std::uint16_t>(bytes, static_cast<std::uint16_t>(id.size()));
    bytes += id;
    const float* v = snap->vector(row);
    for (std::size_t i = 0; i < dim_; ++i) put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(v[i]));
    meta += Json(snap->clip(row)).dump();
    meta += '\n';
  }
  // The sidecar is covered too, so edited metadata cannot load silently.
  put_le<std::uint32_t>(bytes, crc32_of(meta, meta.size()));
  put_le<std::uint32_t>(bytes, crc32_of(bytes, bytes.size()));

  auto tmp = path;
  tmp += ".tmp";
  auto tmp_meta = sidecar_path(path);
  tmp_meta += ".tmp";
  write_file(tmp, bytes);
  write_file(tmp_meta, meta);
  std::filesystem::rename(tmp, path);
  std::filesystem::rename(tmp_meta, sidecar_path(path));
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const Error&) {
    corrupt(path, "unreadable");
  }
  if (bytes.size() < kHeaderBytes + 8) corrupt(path, "truncated header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) corrupt(path, "bad magic");
  const auto stored_crc = get_le<std::uint32_t>(bytes, bytes.size() - 4);
  if (crc32_of(bytes, bytes.size() - 4) != stored_crc) corrupt(path, "checksum mismatch");
  const auto dim = get_le<std::uint32_t>(bytes, 8);
  const auto count = get_le<std::uint64_t>(bytes, 12);
  const auto metric = get_le<std::uint8_t>(bytes, 20);
  if (dim == 0) corrupt(path, "zero dimension");
  if (metric != kMetricCosine) corrupt(path, "unknown metric");

  std::string meta;
  try {
    meta = read_file(sidecar_path(path));
  } catch (const Error&) {
    corrupt(sidecar_path(path), "unreadable");
  }
  if (crc32_of(meta, meta.size()) != get_le<std::uint32_t>(bytes, bytes.size() - 8)) {
    corrupt(sidecar_path(path), "sidecar checksum mismatch");
  }
  std::map<std::string, Clip> clips;
  try {
    std::istringstream lines(meta);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const auto row = Json::parse(line);
      auto c = row.get<Clip>();
      auto id = c.clip_id;
      clips.emplace(std::move(id), std::move(c));
    }
  } catch (const std::exception& e) {
    corrupt(sidecar_path(path), std::string("bad metadata sidecar: ") + e.what());
  }

  VectorIndex index(dim);
  std::size_t at = kHeaderBytes;
  const std::size_t end = bytes.size() - 8;
  const std::size_t vec_bytes = std::size_t{dim} * 4;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (at + 2 > end) corrupt(path, "truncated record");
    const auto len = get_le<std::uint16_t>(bytes, at);
    at += 2;
    if (at + len + vec_bytes > end) corrupt(path, "truncated record");
    EmbeddingRecord rec;
    rec.clip_id = bytes.substr(at, len);
    at += len;
    rec.vector.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      rec.vector[d] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, at));
      at += 4;
    }
    auto it = clips.find(rec.clip_id);
    if (it == clips.end()) corrupt(path, "no metadata for " + rec.clip_id);
    // Stored vectors are already unit length; copy them in verbatim.
    std::lock_guard lock(index.writer_);
    if (index.rows_.contains(rec.clip_id)) corrupt(path, "duplicate id " + rec.clip_id);
    const auto prev = index.snapshot();
    auto next = std::make_shared<Snapshot>(*prev);
    std::uint64_t cap = 0;
    for (const auto& seg : next->segments) cap += seg->capacity;
    if (next->count >= cap) {
      next->segments.push_back(
          std::make_shared<Segment>(dim, segment_capacity(next->segments.size())));
    }
    const auto [s, r] = locate(*next, next->count);
    std::copy(rec.vector.begin(), rec.vector.end(), next->segments[s]->vectors.get() + r * dim);
    next->segments[s]->ids[r] = rec.clip_id;
    next->segments[s]->clips[r] = it->second;
    index.rows_[rec.clip_id] = next->count;
    next->count += 1;
    index.publish(std::move(next));
  }
  if (at != end) corrupt(path, "trailing bytes after records");
  return index;
}

}  // namespace foresearch::vecindex
