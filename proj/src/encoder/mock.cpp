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

#include "foresearch/encoder/mock.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "foresearch/core/digest.hpp"
#include "foresearch/core/error.hpp"

namespace foresearch::encoder {

namespace {

class Normal {
 public:
  explicit Normal(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

void normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

std::vector<double> base_direction(const std::string& label, std::uint64_t seed,
                                   std::size_t dimension) {
  Normal normal(stable_hash64(std::to_string(seed) + ":" + label));
  std::vector<double> v(dimension);
  for (double& x : v) x = normal();
  normalize(v);
  return v;
}

}  // namespace

std::vector<float> mock_encode(const std::set<std::string>& labels, std::uint64_t seed,
                               std::size_t dimension, double sigma, std::uint64_t noise_key) {
  if (labels.empty()) throw Error(ErrorCode::kInvalidArgument, "mock_encode needs labels");
  if (dimension == 0) throw Error(ErrorCode::kInvalidArgument, "dimension must be positive");
  if (sigma < 0.0) throw Error(ErrorCode::kInvalidArgument, "sigma must be non-negative");
  std::vector<double> acc(dimension, 0.0);
  for (const auto& label : labels) {
    const auto base = base_direction(label, seed, dimension);
    for (std::size_t i = 0; i < dimension; ++i) acc[i] += base[i];
  }
  normalize(acc);
  if (sigma > 0.0) {
    Normal normal(stable_hash64("noise:" + std::to_string(seed) + ":" + std::to_string(noise_key)));
    const double scale = sigma / std::sqrt(static_cast<double>(dimension));
    for (double& x : acc) x += scale * normal();
    normalize(acc);
  }
  return {acc.begin(), acc.end()};
}

Palette::Palette(std::set<std::string> vocabulary) : vocabulary_(std::move(vocabulary)) {
  if (vocabulary_.size() > 512) {
    throw Error(ErrorCode::kInvalidArgument, "palette supports at most 512 labels");
  }
  std::size_t i = 0;
  for (const auto& _ : vocabulary_) {
    (void)_;
    // Spread consecutive labels across channels: 7 is coprime with 512.
    const std::size_t k = (i++ * 7 + 3) % 512;
    auto level = [](std::size_t d) { return static_cast<std::uint8_t>(16 + 32 * d); };
    colors_.push_back({level(k & 7), level((k >> 3) & 7), level((k >> 6) & 7)});
  }
}

imaging::Rgb Palette::color_of(const std::string& label) const {
  auto it = vocabulary_.find(label);
  if (it == vocabulary_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "label '" + label + "' is not in the palette");
  }
  return colors_[static_cast<std::size_t>(std::distance(vocabulary_.begin(), it))];
}

std::set<std::string> Palette::labels_in(const imaging::Image& image, double min_fraction) const {
  std::map<std::uint32_t, std::size_t> counts;
  const auto& d = image.data();
  for (std::size_t i = 0; i + 2 < d.size(); i += 3) {
    ++counts[(std::uint32_t{d[i]} << 16) | (std::uint32_t{d[i + 1]} << 8) | d[i + 2]];
  }
  const double total = static_cast<double>(d.size() / 3);
  std::set<std::string> out;
  std::size_t idx = 0;
  for (const auto& label : vocabulary_) {
    const auto c = colors_[idx++];
    const auto key = (std::uint32_t{c.r} << 16) | (std::uint32_t{c.g} << 8) | c.b;
    auto it = counts.find(key);
    if (it != counts.end() && total > 0 &&
        static_cast<double>(it->second) / total >= min_fraction) {
      out.insert(label);
    }
  }
  return out;
}

std::set<std::string> Palette::labels_in(const std::string& text) const {
  std::set<std::string> out;
  std::string token;
  auto flush = [&] {
    if (!token.empty() && (vocabulary_.empty() || vocabulary_.contains(token))) {
      out.insert(token);
    }
    token.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '_') {
      token += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

}  // namespace foresearch::encoder
