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

#include <initializer_list>
#include <span>
#include <vector>

namespace foresearch {

// Closed time interval in seconds relative to video start. Degenerate points
// (start == end) are allowed and have zero measure.
struct TimeInterval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool operator==(const TimeInterval&) const = default;
};

// Throws InvalidArgument for non-finite values, negative start, or start > end.
TimeInterval make_interval(double start, double end);
void validate(const TimeInterval& interval);

// Sorted, pairwise disjoint intervals. Touching intervals are merged.
class IntervalSet {
 public:
  IntervalSet() = default;
  explicit IntervalSet(std::vector<TimeInterval> intervals);
  IntervalSet(std::initializer_list<TimeInterval> intervals);

  const std::vector<TimeInterval>& intervals() const { return intervals_; }
  bool empty() const { return intervals_.empty(); }
  std::size_t size() const { return intervals_.size(); }
  auto begin() const { return intervals_.begin(); }
  auto end() const { return intervals_.end(); }

  double measure() const;
  // Smallest interval containing every member; requires non-empty.
  TimeInterval hull() const;

  bool operator==(const IntervalSet&) const = default;

 private:
  std::vector<TimeInterval> intervals_;
};

IntervalSet canonicalize(std::span<const TimeInterval> intervals);

double intersection_measure(const IntervalSet& a, const IntervalSet& b);

// Pointwise intersection. Pieces where members merely touch come back as
// zero-length points.
IntervalSet intersect(const IntervalSet& a, const IntervalSet& b);

double interval_iou(const TimeInterval& a, const TimeInterval& b);

// Union semantics: |union(a) ∩ union(b)| / |union(a) ∪ union(b)|.
// Both empty scores 1, exactly one empty scores 0.
double interval_set_iou(const IntervalSet& pred, const IntervalSet& gt);

}  // namespace foresearch
