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
#include <set>
#include <string>
#include <vector>

#include "foresearch/imaging/image.hpp"

namespace foresearch::encoder {

// Deterministic stand-in for the multimodal encoder.
//
// Each label owns a base direction drawn from an mt19937_64 stream seeded by
// SHA-256("<seed>:<label>"); components are standard normals via Box-Muller on
// 53-bit uniforms, then L2-normalised. An embedding is the normalised sum of
// its label directions plus isotropic Gaussian noise with per-component
// standard deviation sigma / sqrt(p) (so the expected noise norm is sigma),
// renormalised. The noise stream is keyed by (seed, noise_key).
std::vector<float> mock_encode(const std::set<std::string>& labels, std::uint64_t seed,
                               std::size_t dimension, double sigma = 0.0,
                               std::uint64_t noise_key = 0);

// Maps a label vocabulary onto distinct flat colours so that synthetic frames
// carry their semantic labels in pixel data (and survive PNG transport).
// Colours use channel levels {16, 48, ..., 240}; neither the mid-grey
// background nor the pure-green overlay stroke can collide with them.
class Palette {
 public:
  Palette() = default;
  explicit Palette(std::set<std::string> vocabulary);

  const std::set<std::string>& vocabulary() const { return vocabulary_; }
  imaging::Rgb color_of(const std::string& label) const;

  // Labels whose colour covers at least min_fraction of the pixels.
  std::set<std::string> labels_in(const imaging::Image& image, double min_fraction = 0.01) const;

  // Vocabulary words found in the text (lowercased, split on non-word chars).
  // An empty vocabulary admits every token.
  std::set<std::string> labels_in(const std::string& text) const;

 private:
  std::set<std::string> vocabulary_;
  std::vector<imaging::Rgb> colors_;
};

inline constexpr imaging::Rgb kBackground{128, 128, 128};

}  // namespace foresearch::encoder
