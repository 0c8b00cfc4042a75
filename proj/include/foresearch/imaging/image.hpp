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
#include <string>
#include <string_view>
#include <vector>

#include "foresearch/core/types.hpp"

namespace foresearch::imaging {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  bool operator==(const Rgb&) const = default;
};

// Packed 8-bit RGB raster, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Pixel rectangle covered by a box after clamping to the image bounds.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

PixelRect clamp_box(const Image& image, const BBox& box);

// Copies the region under `box`. Throws InvalidArgument when the box misses the image.
Image crop(const Image& image, const BBox& box);

// Solid rectangle outline of `stroke` pixels drawn inside the box edges.
void draw_box(Image& image, const BBox& box, Rgb color, int stroke = 3);

inline constexpr Rgb kOverlayColor{0, 255, 0};

enum class Codec { kPng, kJpeg };

std::string encode(const Image& image, Codec codec = Codec::kPng);
// Decodes PNG, JPEG or PPM bytes. Throws InvalidArgument on failure.
Image decode(std::string_view bytes);

// Resolves bytes or a local file path.
Image load(const ImageRef& ref);

}  // namespace foresearch::imaging
