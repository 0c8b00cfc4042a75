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

#include "foresearch/core/interval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "foresearch/core/error.hpp"

namespace foresearch {

void validate(const TimeInterval& interval) {
  if (!std::isfinite(interval.start) || !std::isfinite(interval.end)) {
    throw Error(ErrorCode::kInvalidArgument, "interval bounds must be finite");
  }
  if (interval.start < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "interval start must be non-negative, got " +
                    std::to_string(interval.start));
  }
  if (interval.start > interval.end) {
    throw Error(ErrorCode::kInvalidArgument,
                "interval start " + std::to_string(interval.start) +
                    " exceeds end " + std::to_string(interval.end));
  }
}

TimeInterval make_interval(double start, double end) {
  TimeInterval interval{start, end};
  validate(interval);
  return interval;
}

IntervalSet canonicalize(std::span<const TimeInterval> intervals) {
  return IntervalSet(std::vector<TimeInterval>(intervals.begin(), intervals.end()));
}

IntervalSet::IntervalSet(std::initializer_list<TimeInterval> intervals)
    : IntervalSet(std::vector<TimeInterval>(intervals)) {}

IntervalSet::IntervalSet(std::vector<TimeInterval> intervals) {
  for (const auto& i : intervals) validate(i);
  std::sort(intervals.begin(), intervals.end(),
            [](const TimeInterval& a, const TimeInterval& b) {
              return a.start < b.start || (a.start == b.start && a.end < b.end);
            });
  for (const auto& i : intervals) {
    if (!intervals_.empty() && i.start <= intervals_.back().end) {
      intervals_.back().end = std::max(intervals_.back().end, i.end);
    } else {
      intervals_.push_back(i);
    }
  }
}

double IntervalSet::measure() const {
  double total = 0.0;
  for (const auto& i : intervals_) total += i.length();
  return total;
}

TimeInterval IntervalSet::hull() const {
  if (intervals_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "hull of an empty interval set");
  }
  return {intervals_.front().start, intervals_.back().end};
}

double intersection_measure(const IntervalSet& a, const IntervalSet& b) {
  const auto& xs = a.intervals();
  const auto& ys = b.intervals();
  double total = 0.0;
  std::size_t i = 0, j = 0;
  while (i < xs.size() && j < ys.size()) {
    const double lo = std::max(xs[i].start, ys[j].start);
    const double hi = std::min(xs[i].end, ys[j].end);
    if (hi > lo) total += hi - lo;
    if (xs[i].end < ys[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

IntervalSet intersect(const IntervalSet& a, const IntervalSet& b) {
  const auto& xs = a.intervals();
  const auto& ys = b.intervals();
  std::vector<TimeInterval> out;
  std::size_t i = 0, j = 0;
  while (i < xs.size() && j < ys.size()) {
    const double lo = std::max(xs[i].start, ys[j].start);
    const double hi = std::min(xs[i].end, ys[j].end);
    if (hi >= lo) out.push_back({lo, hi});
    if (xs[i].end < ys[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return IntervalSet(std::move(out));
}

double interval_iou(const TimeInterval& a, const TimeInterval& b) {
  const double inter =
      std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) return a == b ? 1.0 : 0.0;
  return inter / uni;
}

double interval_set_iou(const IntervalSet& pred, const IntervalSet& gt) {
  if (pred.empty() && gt.empty()) return 1.0;
  if (pred.empty() || gt.empty()) return 0.0;
  const double inter = intersection_measure(pred, gt);
  const double uni = pred.measure() + gt.measure() - inter;
  if (uni <= 0.0) return pred == gt ? 1.0 : 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace foresearch
