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

#include "foresearch/imaging/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "foresearch/core/error.hpp"
#include "foresearch/core/json.hpp"

namespace foresearch::imaging {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::kInvalidArgument, "negative image size");
  data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

Rgb Image::at(int x, int y) const {
  const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {data_[i], data_[i + 1], data_[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
  const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  data_[i] = c.r;
  data_[i + 1] = c.g;
  data_[i + 2] = c.b;
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  x0 = std::clamp(x0, 0, width_);
  x1 = std::clamp(x1, 0, width_);
  y0 = std::clamp(y0, 0, height_);
  y1 = std::clamp(y1, 0, height_);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) set(x, y, c);
  }
}

PixelRect clamp_box(const Image& image, const BBox& box) {
  PixelRect r;
  r.x0 = std::clamp(static_cast<int>(std::floor(box.x)), 0, image.width());
  r.y0 = std::clamp(static_cast<int>(std::floor(box.y)), 0, image.height());
  r.x1 = std::clamp(static_cast<int>(std::ceil(box.x + box.w)), 0, image.width());
  r.y1 = std::clamp(static_cast<int>(std::ceil(box.y + box.h)), 0, image.height());
  return r;
}

Image crop(const Image& image, const BBox& box) {
  const auto r = clamp_box(image, box);
  if (r.empty()) throw Error(ErrorCode::kInvalidArgument, "crop box lies outside the image");
  Image out(r.x1 - r.x0, r.y1 - r.y0);
  for (int y = r.y0; y < r.y1; ++y) {
    const auto* src = image.data().data() + (static_cast<std::size_t>(y) * image.width() + r.x0) * 3;
    auto* dst = out.data().data() + static_cast<std::size_t>(y - r.y0) * out.width() * 3;
    std::copy(src, src + static_cast<std::size_t>(out.width()) * 3, dst);
  }
  return out;
}

void draw_box(Image& image, const BBox& box, Rgb color, int stroke) {
  const auto r = clamp_box(image, box);
  if (r.empty()) return;
  const int sx = std::min(stroke, r.x1 - r.x0);
  const int sy = std::min(stroke, r.y1 - r.y0);
  image.fill_rect(r.x0, r.y0, r.x1, r.y0 + sy, color);
  image.fill_rect(r.x0, r.y1 - sy, r.x1, r.y1, color);
  image.fill_rect(r.x0, r.y0, r.x0 + sx, r.y1, color);
  image.fill_rect(r.x1 - sx, r.y0, r.x1, r.y1, color);
}

std::string encode(const Image& image, Codec codec) {
  if (image.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot encode an empty image");
  cv::Mat rgb(image.height(), image.width(), CV_8UC3,
              const_cast<std::uint8_t*>(image.data().data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<uchar> buf;
  const bool ok = cv::imencode(codec == Codec::kPng ? ".png" : ".jpg", bgr, buf);
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "image encoding failed");
  return {buf.begin(), buf.end()};
}

Image decode(std::string_view bytes) {
  if (bytes.empty()) throw Error(ErrorCode::kInvalidArgument, "empty image bytes");
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1,
              const_cast<char*>(bytes.data()));
  cv::Mat bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorCode::kInvalidArgument, "undecodable image bytes");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Image out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    std::copy(row, row + static_cast<std::size_t>(rgb.cols) * 3,
              out.data().data() + static_cast<std::size_t>(y) * rgb.cols * 3);
  }
  return out;
}

Image load(const ImageRef& ref) {
  if (!ref.bytes.empty()) return decode(ref.bytes);
  if (ref.uri.empty()) throw Error(ErrorCode::kInvalidArgument, "empty image reference");
  std::string path = ref.uri;
  if (path.rfind("file://", 0) == 0) path = path.substr(7);
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kIo, "image not found: " + ref.uri);
  }
  return decode(read_file(path));
}

}  // namespace foresearch::imaging
